"""Model zoo builders and layer freezing for domain adaptation.

Three architectures are built here:

- ``build_vgg8``: 8 convolutional layers in 4 groups of 2 with max pooling
  and dropout, global average pooling, then a chain of 6 dense layers.
- ``build_resnet7``: a stem convolution followed by 7 residual blocks
  (identity or conv shortcut) and global average pooling.
- ``build_fr_backbone``: a small residual net ending in a dense embedding,
  standing in for a large pretrained face-recognition extractor.

The default width configurations are calibrated so the VGG-8 and ResNet-7
totals land within 5% of 295,448 and 366,626 parameters respectively; the
derivation is written out in docs/width_calibration.md.  Custom widths are
accepted; totals more than 25% away from the calibration target are noted
as warnings in the build report.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .nn import (
    ConfigError,
    Conv2d,
    Dense,
    Dropout,
    GlobalAvgPool,
    MaxPool2d,
    Network,
    ReLU,
    ResidualBlock,
)

VGG8_PARAM_TARGET = 295_448
RESNET7_PARAM_TARGET = 366_626

STANDARD_FREEZE_RATIOS = (0.50, 0.75, 1.00)


@dataclass(frozen=True)
class VggWidths:
    """Per-group conv channel counts and the dense chain widths."""

    groups: tuple[int, ...] = (8, 16, 32, 72)
    dense: tuple[int, ...] = (512, 256, 128, 64, 32, 16)
    dropout: float = 0.25

    def validate(self):
        if len(self.groups) != 4:
            raise ConfigError(f"vgg8 needs 4 conv groups, got {len(self.groups)}")
        if len(self.dense) != 6:
            raise ConfigError(f"vgg8 needs 6 dense widths, got {len(self.dense)}")
        if any(c <= 0 for c in self.groups + self.dense):
            raise ConfigError("channel and unit counts must be positive")


@dataclass(frozen=True)
class ResNetBlockSpec:
    variant: str            # "identity" | "conv"
    channels: int
    stride: int = 1


@dataclass(frozen=True)
class ResNetWidths:
    stem: int = 8
    blocks: tuple[ResNetBlockSpec, ...] = (
        ResNetBlockSpec("conv", 16, 2),
        ResNetBlockSpec("identity", 16),
        ResNetBlockSpec("conv", 36, 2),
        ResNetBlockSpec("identity", 36),
        ResNetBlockSpec("conv", 80, 2),
        ResNetBlockSpec("identity", 80),
        ResNetBlockSpec("identity", 80),
    )
    stem_stride: int = 2

    def validate(self):
        if self.stem <= 0:
            raise ConfigError("stem channels must be positive")
        if len(self.blocks) != 7:
            raise ConfigError(f"resnet7 needs 7 blocks, got {len(self.blocks)}")


@dataclass(frozen=True)
class FrWidths:
    stem: int = 8
    blocks: tuple[ResNetBlockSpec, ...] = (
        ResNetBlockSpec("conv", 16, 2),
        ResNetBlockSpec("identity", 16),
        ResNetBlockSpec("conv", 32, 2),
    )
    stem_stride: int = 2


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def build_vgg8(widths: VggWidths | None = None, input_shape=(32, 32, 1),
               seed: int = 0) -> Network:
    """VGG-style net: 4 groups of 2 convs + pool + dropout, then dense chain.

    Convolutions use 'same' padding so four pooling stages fit the input;
    the conv output is condensed by global average pooling before the first
    dense layer.  feature_cut is the last dense layer.
    """
    widths = widths or VggWidths()
    widths.validate()
    rng = _rng(seed)
    layers = []
    cin = input_shape[2]
    for c in widths.groups:
        layers.append(Conv2d(cin, c, 3, rng, padding="same"))
        layers.append(ReLU())
        layers.append(Conv2d(c, c, 3, rng, padding="same"))
        layers.append(ReLU())
        layers.append(MaxPool2d(2))
        layers.append(Dropout(widths.dropout))
        cin = c
    layers.append(GlobalAvgPool())
    fan = widths.groups[-1]
    for i, units in enumerate(widths.dense):
        layers.append(Dense(fan, units, rng))
        layers.append(ReLU())
        if i < 2:
            layers.append(Dropout(widths.dropout))
        fan = units
    net = Network(layers, input_shape,
                  meta={"arch": "vgg8", "param_target": VGG8_PARAM_TARGET})
    return net


def build_resnet7(widths: ResNetWidths | None = None, input_shape=(32, 32, 1),
                  seed: int = 0) -> Network:
    """Stem conv + 7 residual blocks + global average pooling."""
    widths = widths or ResNetWidths()
    widths.validate()
    rng = _rng(seed)
    layers = [
        Conv2d(input_shape[2], widths.stem, 3, rng,
               stride=widths.stem_stride, padding="same"),
        ReLU(),
    ]
    cin = widths.stem
    for spec in widths.blocks:
        layers.append(ResidualBlock(cin, spec.channels, spec.variant, rng,
                                    stride=spec.stride))
        cin = spec.channels
    layers.append(GlobalAvgPool())
    net = Network(layers, input_shape,
                  meta={"arch": "resnet7", "param_target": RESNET7_PARAM_TARGET})
    return net


def build_fr_backbone(embed_dim: int = 128, widths: FrWidths | None = None,
                      input_shape=(32, 32, 1), seed: int = 0) -> Network:
    """Residual feature extractor ending in a dense embedding.

    Stands in for the pretrained face-recognition model; ``embed_dim=2048``
    reproduces the original extractor's output contract at desk scale.
    """
    if embed_dim < 8:
        raise ConfigError(f"embed_dim must be >= 8, got {embed_dim}")
    widths = widths or FrWidths()
    rng = _rng(seed)
    layers = [
        Conv2d(input_shape[2], widths.stem, 3, rng,
               stride=widths.stem_stride, padding="same"),
        ReLU(),
    ]
    cin = widths.stem
    for spec in widths.blocks:
        layers.append(ResidualBlock(cin, spec.channels, spec.variant, rng,
                                    stride=spec.stride))
        cin = spec.channels
    layers.append(GlobalAvgPool())
    layers.append(Dense(cin, embed_dim, rng))
    net = Network(layers, input_shape, meta={"arch": "fr", "embed_dim": embed_dim})
    return net


def freeze_layers(network: Network, ratio: float) -> Network:
    """Freeze the leading parameter-bearing layers by cumulative share.

    The first k non-head parameter-bearing layers are frozen, where k is the
    smallest count whose cumulative parameter share reaches ``ratio``.
    Ratio 1.0 freezes the whole backbone up to (not including) any attached
    head.  Freezing never touches parameter values and is idempotent; the
    network is modified in place and returned.
    """
    if not 0.0 < ratio <= 1.0:
        raise ConfigError(f"freeze ratio must be in (0, 1], got {ratio}")
    bearing = [l for l in network.layers if l.param_count() > 0 and not l.is_head]
    total = sum(l.param_count() for l in bearing)
    for layer in bearing:
        layer.frozen = False
    cumulative = 0
    for layer in bearing:
        if cumulative >= ratio * total:
            break
        layer.frozen = True
        cumulative += layer.param_count()
    return network


def build_report(network: Network) -> dict:
    """JSON-ready description: layers, parameter totals, calibration warnings."""
    report = {
        "arch": network.meta.get("arch", "custom"),
        "layers": network.describe(),
        "param_count": network.param_count(),
        "frozen_count": network.param_count() - network.trainable_count(),
        "warnings": [],
    }
    target = network.meta.get("param_target")
    if target is not None:
        deviation = abs(report["param_count"] - target) / target
        report["param_target"] = target
        report["param_deviation"] = deviation
        if deviation > 0.25:
            report["warnings"].append(
                f"parameter count {report['param_count']} is more than 25% "
                f"away from the calibration target {target}"
            )
    return report


def write_build_report(network: Network, path) -> dict:
    report = build_report(network)
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
    return report


# -- declarative width-config files -----------------------------------------

def load_width_config(path) -> VggWidths | ResNetWidths | FrWidths:
    """Parse a key = value width file.

    Recognized keys: ``arch`` (vgg8 | resnet7 | fr), ``groups`` and ``dense``
    (comma-separated ints, vgg8), ``stem``, ``stem_stride`` and ``blocks``
    (comma-separated ``kind:channels[:stride]`` entries), ``dropout``,
    ``embed_dim``.
    """
    entries: dict[str, str] = {}
    with open(path) as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"malformed width config line: {raw.rstrip()}")
            key, value = (part.strip() for part in line.split("=", 1))
            entries[key] = value
    arch = entries.pop("arch", None)
    if arch is None:
        raise ConfigError("width config missing 'arch'")
    try:
        if arch == "vgg8":
            return VggWidths(
                groups=_int_tuple(entries.pop("groups")),
                dense=_int_tuple(entries.pop("dense")),
                dropout=float(entries.pop("dropout", "0.25")),
            )
        if arch in ("resnet7", "fr"):
            blocks = _block_tuple(entries.pop("blocks"))
            stem = int(entries.pop("stem"))
            stride = int(entries.pop("stem_stride", "2"))
            if arch == "resnet7":
                return ResNetWidths(stem=stem, blocks=blocks, stem_stride=stride)
            return FrWidths(stem=stem, blocks=blocks, stem_stride=stride)
    except KeyError as exc:
        raise ConfigError(f"width config missing key {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"malformed width config value: {exc}") from exc
    raise ConfigError(f"unknown arch {arch!r}")


def _int_tuple(text: str) -> tuple[int, ...]:
    return tuple(int(tok) for tok in text.split(",") if tok.strip())


def _block_tuple(text: str) -> tuple[ResNetBlockSpec, ...]:
    blocks = []
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            continue
        parts = tok.split(":")
        kind = {"id": "identity", "identity": "identity", "conv": "conv"}.get(parts[0])
        if kind is None or len(parts) not in (2, 3):
            raise ConfigError(f"malformed block spec {tok!r}")
        stride = int(parts[2]) if len(parts) == 3 else 1
        blocks.append(ResNetBlockSpec(kind, int(parts[1]), stride))
    return tuple(blocks)
