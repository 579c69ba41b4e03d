"""Differentiable layer primitives.

Every layer implements ``forward`` returning ``(output, cache)`` and
``backward`` returning ``(input_gradient, parameter_gradients)``.  All data
moves as float64 numpy arrays with an explicit leading batch dimension;
image tensors are laid out (N, H, W, C).
"""

from __future__ import annotations

import numpy as np


class ConfigError(ValueError):
    """Invalid layer or network configuration."""


class ShapeError(ValueError):
    """Tensor shape does not match what a layer expects.

    Carries the layer index (set by the owning network), the expected
    per-sample shape and the actual one.
    """

    def __init__(self, layer_index, expected, actual, kind=""):
        self.layer_index = layer_index
        self.expected = tuple(expected)
        self.actual = tuple(actual)
        super().__init__(
            f"layer {layer_index} ({kind}): expected per-sample shape "
            f"{self.expected}, got {self.actual}"
        )


def he_uniform(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape)


def _pad_amount(size: int, kernel: int, stride: int) -> tuple[int, int]:
    # TensorFlow-style "same": output = ceil(size / stride).
    out = -(-size // stride)
    total = max((out - 1) * stride + kernel - size, 0)
    return total // 2, total - total // 2


class Layer:
    """Base layer: stateless by default, no parameters."""

    kind = "base"

    def __init__(self):
        self.frozen = False
        self.is_head = False
        self.in_shape: tuple[int, ...] | None = None
        self.out_shape: tuple[int, ...] | None = None

    # -- parameters ---------------------------------------------------
    def named_params(self):
        return iter(())

    def get_param(self, name: str) -> np.ndarray:
        for n, p in self.named_params():
            if n == name:
                return p
        raise KeyError(name)

    def set_param(self, name: str, value: np.ndarray) -> None:
        current = self.get_param(name)
        if current.shape != value.shape:
            raise ConfigError(
                f"parameter {name}: shape {value.shape} != {current.shape}"
            )
        current[...] = value

    def param_count(self) -> int:
        return sum(p.size for _, p in self.named_params())

    # -- shape inference ----------------------------------------------
    def infer_shape(self, in_shape: tuple[int, ...]) -> tuple[int, ...]:
        """Record in/out per-sample shapes; raise ConfigError if invalid."""
        self.in_shape = tuple(in_shape)
        self.out_shape = self._out_shape(self.in_shape)
        return self.out_shape

    def _out_shape(self, in_shape):
        return in_shape

    # -- compute -------------------------------------------------------
    def forward(self, x: np.ndarray, train: bool = False, rng=None):
        raise NotImplementedError

    def backward(self, grad_out: np.ndarray, cache):
        raise NotImplementedError

    def describe(self) -> dict:
        return {"kind": self.kind, "params": self.param_count()}


class Dense(Layer):
    """Fully connected layer y = x @ W + b."""

    kind = "dense"

    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator):
        super().__init__()
        if in_features <= 0 or out_features <= 0:
            raise ConfigError("dense layer needs positive unit counts")
        self.in_features = in_features
        self.out_features = out_features
        self.weight = he_uniform(rng, (in_features, out_features), in_features)
        self.bias = np.zeros(out_features)

    def named_params(self):
        yield "weight", self.weight
        yield "bias", self.bias

    def _out_shape(self, in_shape):
        if len(in_shape) != 1 or in_shape[0] != self.in_features:
            raise ConfigError(
                f"dense expects ({self.in_features},) input, got {in_shape}"
            )
        return (self.out_features,)

    def forward(self, x, train=False, rng=None):
        return x @ self.weight + self.bias, x

    def backward(self, grad_out, cache):
        x = cache
        grads = {"weight": x.T @ grad_out, "bias": grad_out.sum(axis=0)}
        return grad_out @ self.weight.T, grads


class Conv2d(Layer):
    """2D cross-correlation with zero padding ('valid' or 'same')."""

    kind = "conv2d"

    def __init__(self, in_channels, out_channels, kernel_size, rng,
                 stride=1, padding="valid"):
        super().__init__()
        if in_channels <= 0 or out_channels <= 0:
            raise ConfigError("conv2d needs positive channel counts")
        if padding not in ("valid", "same"):
            raise ConfigError(f"unknown padding {padding!r}")
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = int(kernel_size)
        self.stride = int(stride)
        self.padding = padding
        k = self.kernel_size
        self.weight = he_uniform(
            rng, (k, k, in_channels, out_channels), k * k * in_channels
        )
        self.bias = np.zeros(out_channels)

    def named_params(self):
        yield "weight", self.weight
        yield "bias", self.bias

    def _pads(self, h, w):
        k, s = self.kernel_size, self.stride
        if self.padding == "same":
            return _pad_amount(h, k, s), _pad_amount(w, k, s)
        return (0, 0), (0, 0)

    def _out_shape(self, in_shape):
        if len(in_shape) != 3 or in_shape[2] != self.in_channels:
            raise ConfigError(
                f"conv2d expects (H, W, {self.in_channels}) input, got {in_shape}"
            )
        h, w, _ = in_shape
        (pt, pb), (pl, pr) = self._pads(h, w)
        k, s = self.kernel_size, self.stride
        oh = (h + pt + pb - k) // s + 1
        ow = (w + pl + pr - k) // s + 1
        if oh <= 0 or ow <= 0:
            raise ConfigError(f"conv2d output collapses for input {in_shape}")
        return (oh, ow, self.out_channels)

    def forward(self, x, train=False, rng=None):
        n, h, w, _ = x.shape
        (pt, pb), (pl, pr) = self._pads(h, w)
        xp = np.pad(x, ((0, 0), (pt, pb), (pl, pr), (0, 0))) if pt + pb + pl + pr else x
        k, s = self.kernel_size, self.stride
        oh, ow, co = self.out_shape
        out = np.broadcast_to(self.bias, (n, oh, ow, co)).copy()
        for di in range(k):
            for dj in range(k):
                patch = xp[:, di:di + s * oh:s, dj:dj + s * ow:s, :]
                out += patch @ self.weight[di, dj]
        return out, (xp, x.shape)

    def backward(self, grad_out, cache):
        xp, x_shape = cache
        n, h, w, _ = x_shape
        (pt, pb), (pl, pr) = self._pads(h, w)
        k, s = self.kernel_size, self.stride
        oh, ow, _ = self.out_shape
        gw = np.zeros_like(self.weight)
        gxp = np.zeros_like(xp)
        for di in range(k):
            for dj in range(k):
                patch = xp[:, di:di + s * oh:s, dj:dj + s * ow:s, :]
                gw[di, dj] = np.tensordot(patch, grad_out, axes=([0, 1, 2], [0, 1, 2]))
                gxp[:, di:di + s * oh:s, dj:dj + s * ow:s, :] += (
                    grad_out @ self.weight[di, dj].T
                )
        gb = grad_out.sum(axis=(0, 1, 2))
        gx = gxp[:, pt:pt + h, pl:pl + w, :] if pt + pb + pl + pr else gxp
        return gx, {"weight": gw, "bias": gb}


class MaxPool2d(Layer):
    """Max pooling; routes the gradient to the first maximum per window."""

    kind = "maxpool2d"

    def __init__(self, size=2, stride=None):
        super().__init__()
        self.size = int(size)
        self.stride = int(stride) if stride is not None else self.size

    def _out_shape(self, in_shape):
        if len(in_shape) != 3:
            raise ConfigError(f"maxpool2d expects (H, W, C) input, got {in_shape}")
        h, w, c = in_shape
        if h < self.size or w < self.size:
            raise ConfigError(f"pool window {self.size} exceeds input {in_shape}")
        oh = (h - self.size) // self.stride + 1
        ow = (w - self.size) // self.stride + 1
        return (oh, ow, c)

    def _fast(self, h, w):
        return self.stride == self.size and h % self.size == 0 and w % self.size == 0

    def forward(self, x, train=False, rng=None):
        n, h, w, c = x.shape
        oh, ow, _ = self.out_shape
        k = self.size
        if self._fast(h, w):
            xr = (
                x.reshape(n, oh, k, ow, k, c)
                .transpose(0, 1, 3, 2, 4, 5)
                .reshape(n, oh, ow, k * k, c)
            )
            idx = xr.argmax(axis=3)
            out = np.take_along_axis(xr, idx[:, :, :, None, :], axis=3)[:, :, :, 0, :]
            return out, (x.shape, idx)
        out = np.empty((n, oh, ow, c))
        idx = np.empty((n, oh, ow, c), dtype=np.int64)
        for i in range(oh):
            for j in range(ow):
                win = x[:, i * self.stride:i * self.stride + k,
                        j * self.stride:j * self.stride + k, :]
                flat = win.reshape(n, k * k, c)
                am = flat.argmax(axis=1)
                idx[:, i, j, :] = am
                out[:, i, j, :] = np.take_along_axis(flat, am[:, None, :], axis=1)[:, 0, :]
        return out, (x.shape, idx)

    def backward(self, grad_out, cache):
        x_shape, idx = cache
        n, h, w, c = x_shape
        oh, ow, _ = self.out_shape
        k = self.size
        if self._fast(h, w):
            gxr = np.zeros((n, oh, ow, k * k, c))
            np.put_along_axis(gxr, idx[:, :, :, None, :], grad_out[:, :, :, None, :], axis=3)
            gx = (
                gxr.reshape(n, oh, ow, k, k, c)
                .transpose(0, 1, 3, 2, 4, 5)
                .reshape(n, h, w, c)
            )
            return gx, {}
        gx = np.zeros(x_shape)
        ns = np.arange(n)[:, None]
        cs = np.arange(c)[None, :]
        for i in range(oh):
            for j in range(ow):
                am = idx[:, i, j, :]
                gx[ns, i * self.stride + am // k, j * self.stride + am % k, cs] += (
                    grad_out[:, i, j, :]
                )
        return gx, {}


class ReLU(Layer):
    kind = "relu"

    def forward(self, x, train=False, rng=None):
        mask = x > 0
        return x * mask, mask

    def backward(self, grad_out, cache):
        return grad_out * cache, {}


class Sigmoid(Layer):
    kind = "sigmoid"

    def forward(self, x, train=False, rng=None):
        # Split by sign to avoid overflow in exp.
        out = np.empty_like(x)
        pos = x >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
        ex = np.exp(x[~pos])
        out[~pos] = ex / (1.0 + ex)
        return out, out

    def backward(self, grad_out, cache):
        s = cache
        return grad_out * s * (1.0 - s), {}


class Dropout(Layer):
    """Inverted dropout: scales at train time so eval is the identity."""

    kind = "dropout"

    def __init__(self, rate=0.25):
        super().__init__()
        if not 0.0 <= rate < 1.0:
            raise ConfigError(f"dropout rate must be in [0, 1), got {rate}")
        self.rate = float(rate)

    def forward(self, x, train=False, rng=None):
        if not train or self.rate == 0.0:
            return x, None
        if rng is None:
            raise ConfigError("train-mode dropout requires an rng")
        mask = (rng.random(x.shape) >= self.rate) / (1.0 - self.rate)
        return x * mask, mask

    def backward(self, grad_out, cache):
        if cache is None:
            return grad_out, {}
        return grad_out * cache, {}


class Flatten(Layer):
    kind = "flatten"

    def _out_shape(self, in_shape):
        return (int(np.prod(in_shape)),)

    def forward(self, x, train=False, rng=None):
        return x.reshape(x.shape[0], -1), x.shape

    def backward(self, grad_out, cache):
        return grad_out.reshape(cache), {}


class GlobalAvgPool(Layer):
    """Spatial mean per channel; output is already flat (N, C)."""

    kind = "global_avg_pool"

    def _out_shape(self, in_shape):
        if len(in_shape) != 3:
            raise ConfigError(f"global_avg_pool expects (H, W, C), got {in_shape}")
        return (in_shape[2],)

    def forward(self, x, train=False, rng=None):
        return x.mean(axis=(1, 2)), x.shape

    def backward(self, grad_out, cache):
        n, h, w, c = cache
        gx = np.broadcast_to(grad_out[:, None, None, :] / (h * w), cache).copy()
        return gx, {}


class ResidualBlock(Layer):
    """Two 3x3 'same' convolutions with a shortcut connection.

    The identity variant requires matching input/output channels and unit
    stride; the conv variant reshapes the shortcut with a 1x1 convolution
    (striding both paths when downsampling).
    """

    kind = "residual_block"

    def __init__(self, in_channels, out_channels, variant, rng, stride=1):
        super().__init__()
        if variant not in ("identity", "conv"):
            raise ConfigError(f"unknown residual variant {variant!r}")
        if variant == "identity" and (in_channels != out_channels or stride != 1):
            raise ConfigError(
                "identity block requires equal in/out channels and stride 1 "
                f"(got {in_channels}->{out_channels}, stride {stride})"
            )
        self.variant = variant
        self.stride = int(stride)
        self.conv1 = Conv2d(in_channels, out_channels, 3, rng,
                            stride=stride, padding="same")
        self.conv2 = Conv2d(out_channels, out_channels, 3, rng, padding="same")
        self.shortcut = (
            Conv2d(in_channels, out_channels, 1, rng, stride=stride, padding="same")
            if variant == "conv" else None
        )

    def named_params(self):
        for sub, name in ((self.conv1, "conv1"), (self.conv2, "conv2"),
                          (self.shortcut, "shortcut")):
            if sub is None:
                continue
            for pname, p in sub.named_params():
                yield f"{name}.{pname}", p

    def set_param(self, name, value):
        sub, _, pname = name.partition(".")
        layer = {"conv1": self.conv1, "conv2": self.conv2,
                 "shortcut": self.shortcut}.get(sub)
        if layer is None:
            raise KeyError(name)
        layer.set_param(pname, value)

    def _out_shape(self, in_shape):
        mid = self.conv1.infer_shape(in_shape)
        out = self.conv2.infer_shape(mid)
        if self.shortcut is not None:
            short = self.shortcut.infer_shape(in_shape)
            if short != out:
                raise ConfigError(
                    f"shortcut shape {short} does not match main path {out}"
                )
        elif out != tuple(in_shape):
            raise ConfigError("identity block changed the tensor shape")
        return out

    def forward(self, x, train=False, rng=None):
        h1, c1 = self.conv1.forward(x, train, rng)
        m1 = h1 > 0
        h2, c2 = self.conv2.forward(h1 * m1, train, rng)
        if self.shortcut is not None:
            s, cs = self.shortcut.forward(x, train, rng)
        else:
            s, cs = x, None
        pre = h2 + s
        m2 = pre > 0
        return pre * m2, (c1, m1, c2, cs, m2)

    def backward(self, grad_out, cache):
        c1, m1, c2, cs, m2 = cache
        g = grad_out * m2
        g_main, grads2 = self.conv2.backward(g, c2)
        g_main *= m1
        gx, grads1 = self.conv1.backward(g_main, c1)
        if self.shortcut is not None:
            gs, grads_s = self.shortcut.backward(g, cs)
            gx = gx + gs
        else:
            grads_s = {}
            gx = gx + g
        out = {f"conv1.{k}": v for k, v in grads1.items()}
        out.update({f"conv2.{k}": v for k, v in grads2.items()})
        out.update({f"shortcut.{k}": v for k, v in grads_s.items()})
        return gx, out

    def describe(self):
        d = super().describe()
        d["variant"] = self.variant
        return d
