"""Sequential network container with an explicit gradient tape.

A :class:`Network` owns an ordered list of layers, a declared per-sample
input shape and a ``feature_cut`` index: the layer whose output is the
feature vector handed to downstream classifiers.  Layers appended after
the cut are "head" layers (task-specific) and are excluded from freezing
arithmetic.
"""

from __future__ import annotations

import copy

import numpy as np

from .layers import ConfigError, Layer, ShapeError


class TapeConsumedError(RuntimeError):
    """A gradient tape may only be walked backward once."""


class NonFiniteError(FloatingPointError):
    """A forward or backward pass produced NaN or infinity."""


class GradientTape:
    """Record of one train-mode forward pass, consumed by ``backward``."""

    def __init__(self, network: "Network"):
        self.network = network
        self.records: list[tuple[int, object]] = []
        self.consumed = False

    def record(self, index: int, cache) -> None:
        self.records.append((index, cache))

    def clear(self) -> None:
        self.records.clear()
        self.consumed = True

    def backward(self, loss_grad: np.ndarray) -> dict[str, np.ndarray]:
        """Walk the tape in reverse; return gradients for trainable params.

        Frozen layers contribute no entries.  The walk stops once every
        remaining layer below is frozen or parameter-free, since nothing
        there needs a gradient.
        """
        if self.consumed:
            raise TapeConsumedError("gradient tape already consumed")
        net = self.network
        stop = net.earliest_trainable_index()
        grads: dict[str, np.ndarray] = {}
        g = loss_grad
        for index, cache in reversed(self.records):
            if stop is None or index < stop:
                break
            layer = net.layers[index]
            g, pgrads = layer.backward(g, cache)
            if layer.frozen:
                continue
            for name, pg in pgrads.items():
                if not np.isfinite(pg).all():
                    raise NonFiniteError(
                        f"non-finite gradient at layer {index} ({layer.kind}), "
                        f"parameter {name}"
                    )
                grads[f"{index}.{name}"] = pg
        self.clear()
        return grads


class Network:
    """Ordered layers plus freeze flags and a feature extraction cut."""

    def __init__(self, layers: list[Layer], input_shape: tuple[int, ...],
                 feature_cut: int | None = None, meta: dict | None = None):
        if not layers:
            raise ConfigError("network needs at least one layer")
        self.layers = list(layers)
        self.input_shape = tuple(input_shape)
        self.meta = dict(meta or {})
        shape = self.input_shape
        for layer in self.layers:
            shape = layer.infer_shape(shape)
        self.feature_cut = len(self.layers) - 1 if feature_cut is None else feature_cut
        if not 0 <= self.feature_cut < len(self.layers):
            raise ConfigError(f"feature_cut {self.feature_cut} out of range")

    # -- structure ------------------------------------------------------
    @property
    def output_shape(self) -> tuple[int, ...]:
        return self.layers[-1].out_shape

    @property
    def feature_dim(self) -> int:
        shape = self.layers[self.feature_cut].out_shape
        if len(shape) != 1:
            raise ConfigError(f"feature layer output {shape} is not a vector")
        return shape[0]

    def has_head(self) -> bool:
        return any(layer.is_head for layer in self.layers)

    def attach_head(self, layers: list[Layer]) -> None:
        shape = self.layers[-1].out_shape
        for layer in layers:
            layer.is_head = True
            shape = layer.infer_shape(shape)
        self.layers.extend(layers)

    def detach_head(self) -> None:
        self.layers = [l for l in self.layers if not l.is_head]

    def clone(self) -> "Network":
        return copy.deepcopy(self)

    # -- parameters -----------------------------------------------------
    def named_params(self):
        for i, layer in enumerate(self.layers):
            for name, p in layer.named_params():
                yield f"{i}.{name}", p

    def parameters(self) -> dict[str, np.ndarray]:
        return dict(self.named_params())

    def trainable_params(self) -> dict[str, np.ndarray]:
        out = {}
        for i, layer in enumerate(self.layers):
            if layer.frozen:
                continue
            for name, p in layer.named_params():
                out[f"{i}.{name}"] = p
        return out

    def set_param(self, key: str, value: np.ndarray) -> None:
        index, _, name = key.partition(".")
        self.layers[int(index)].set_param(name, value)

    def param_count(self) -> int:
        return sum(l.param_count() for l in self.layers)

    def trainable_count(self) -> int:
        return sum(l.param_count() for l in self.layers if not l.frozen)

    def earliest_trainable_index(self) -> int | None:
        for i, layer in enumerate(self.layers):
            if not layer.frozen and layer.param_count() > 0:
                return i
        return None

    # -- execution --------------------------------------------------------
    def _run(self, x, train, rng, upto):
        x = np.asarray(x, dtype=np.float64)
        single = x.shape == self.input_shape
        if single:
            x = x[None]
        if x.shape[1:] != self.input_shape:
            raise ShapeError(0, self.input_shape, x.shape[1:],
                             self.layers[0].kind)
        tape = GradientTape(self) if train else None
        for i, layer in enumerate(self.layers[:upto]):
            if x.shape[1:] != layer.in_shape:
                raise ShapeError(i, layer.in_shape, x.shape[1:], layer.kind)
            x, cache = layer.forward(x, train=train, rng=rng)
            if train:
                tape.record(i, cache)
        if single:
            x = x[0]
        return x, tape

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Eval-mode forward pass: pure, dropout is the identity."""
        y, _ = self._run(x, train=False, rng=None, upto=len(self.layers))
        return y

    def train_forward(self, x: np.ndarray, rng: np.random.Generator):
        """Train-mode forward pass returning (output, gradient tape)."""
        y, tape = self._run(x, train=True, rng=rng, upto=len(self.layers))
        if not np.isfinite(y).all():
            raise NonFiniteError("non-finite network output in train forward")
        return y, tape

    def extract_features(self, x: np.ndarray) -> np.ndarray:
        """Eval-mode forward through the feature_cut layer inclusive."""
        y, _ = self._run(x, train=False, rng=None, upto=self.feature_cut + 1)
        return y

    def describe(self) -> list[dict]:
        rows = []
        for i, layer in enumerate(self.layers):
            d = layer.describe()
            d.update(index=i, frozen=layer.frozen, head=layer.is_head,
                     output_shape=list(layer.out_shape))
            rows.append(d)
        return rows
