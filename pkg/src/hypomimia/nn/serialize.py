"""Flat binary container for network parameters.

Layout (all integers little-endian, documented in docs/formats.md):

    magic   4 bytes  b"HYPN"
    version u32      currently 1
    count   u32      number of parameter records
    record:
        layer_index u32
        name_len    u16, then name bytes (utf-8, layer-local name)
        ndim        u8,  then ndim * u32 dimension sizes
        data        float64 little-endian, row-major
"""

from __future__ import annotations

import struct

import numpy as np

MAGIC = b"HYPN"
VERSION = 1


class FormatError(ValueError):
    """Corrupt or mismatched parameter container."""


def save_params(network, path) -> None:
    records = []
    for i, layer in enumerate(network.layers):
        for name, p in layer.named_params():
            records.append((i, name, p))
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(records)))
        for index, name, p in records:
            nb = name.encode("utf-8")
            fh.write(struct.pack("<IH", index, len(nb)))
            fh.write(nb)
            fh.write(struct.pack("<B", p.ndim))
            fh.write(struct.pack(f"<{p.ndim}I", *p.shape))
            fh.write(np.ascontiguousarray(p, dtype="<f8").tobytes())


def load_params(network, path) -> None:
    """Load parameters into an existing network of matching architecture."""
    with open(path, "rb") as fh:
        if fh.read(4) != MAGIC:
            raise FormatError("bad magic, not a HYPN parameter file")
        version, count = struct.unpack("<II", fh.read(8))
        if version != VERSION:
            raise FormatError(f"unsupported version {version}")
        for _ in range(count):
            index, name_len = struct.unpack("<IH", fh.read(6))
            name = fh.read(name_len).decode("utf-8")
            (ndim,) = struct.unpack("<B", fh.read(1))
            shape = struct.unpack(f"<{ndim}I", fh.read(4 * ndim))
            n = int(np.prod(shape)) if shape else 1
            data = np.frombuffer(fh.read(8 * n), dtype="<f8").reshape(shape)
            if index >= len(network.layers):
                raise FormatError(f"record for layer {index} beyond network")
            try:
                network.layers[index].set_param(name, data.astype(np.float64))
            except (KeyError, ValueError) as exc:
                raise FormatError(
                    f"layer {index} parameter {name!r} does not fit: {exc}"
                ) from exc
