"""Numpy neural layers with explicit forward/backward passes.

Every layer caches what its backward needs during forward, returns
d(loss)/d(input) from backward, and accumulates parameter gradients in
its `grads` dict.  Convolutions reduce to GEMMs via sliding windows, so
the heavy lifting stays inside BLAS.  Data layout is NCHW throughout.
"""

from __future__ import annotations

import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..rng import Rng


def glorot_uniform(rng: Rng, shape, fan_in: int, fan_out: int, dtype) -> np.ndarray:
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, shape).astype(dtype)


class Layer:
    """Base: stateless unless a subclass says otherwise."""

    def __init__(self):
        self.training = True
        self.grads: dict[str, np.ndarray] = {}

    def params(self) -> dict[str, np.ndarray]:
        return {}

    def state(self) -> dict[str, np.ndarray]:
        """Everything that must persist in a checkpoint (params + buffers)."""
        return self.params()

    def set_training(self, flag: bool) -> None:
        self.training = flag

    def output_shape(self, in_shape):
        return in_shape

    def flops(self, in_shape) -> int:
        return 0

    def spec(self) -> dict:
        raise NotImplementedError


class Conv2d(Layer):
    """2-D convolution (cross-correlation), zero padding, optional stride."""

    def __init__(self, in_channels: int, out_channels: int, kernel=(3, 3),
                 stride: int = 1, padding=(1, 1), rng: Rng | None = None,
                 dtype=np.float32):
        super().__init__()
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kh, self.kw = kernel
        self.stride = stride
        self.ph, self.pw = padding
        fan_in = in_channels * self.kh * self.kw
        fan_out = out_channels * self.kh * self.kw
        if rng is None:
            self.weight = np.zeros((out_channels, in_channels, self.kh, self.kw), dtype=dtype)
        else:
            self.weight = glorot_uniform(rng, (out_channels, in_channels, self.kh, self.kw),
                                         fan_in, fan_out, dtype)
        self.bias = np.zeros(out_channels, dtype=dtype)
        self._xp = None

    def params(self):
        return {"weight": self.weight, "bias": self.bias}

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.ndim != 4 or x.shape[1] != self.in_channels:
            raise ValueError(
                f"conv2d expects (N, {self.in_channels}, H, W), got input shape {x.shape} "
                f"against weight shape {self.weight.shape}")
        xp = np.pad(x, ((0, 0), (0, 0), (self.ph, self.ph), (self.pw, self.pw)))
        win = sliding_window_view(xp, (self.kh, self.kw), axis=(2, 3))[:, :, ::self.stride, ::self.stride]
        z = np.tensordot(win, self.weight, axes=([1, 4, 5], [1, 2, 3]))
        self._xp = xp
        return z.transpose(0, 3, 1, 2) + self.bias[None, :, None, None]

    def backward(self, g: np.ndarray) -> np.ndarray:
        xp = self._xp
        n, _, hp, wp = xp.shape
        ho, wo = g.shape[2], g.shape[3]
        s = self.stride
        win = sliding_window_view(xp, (self.kh, self.kw), axis=(2, 3))[:, :, ::s, ::s]
        self.grads["weight"] = np.tensordot(g, win, axes=([0, 2, 3], [0, 2, 3])).astype(self.weight.dtype)
        self.grads["bias"] = g.sum(axis=(0, 2, 3)).astype(self.bias.dtype)

        gp = np.zeros_like(xp)
        for u in range(self.kh):
            for v in range(self.kw):
                contrib = np.tensordot(g, self.weight[:, :, u, v], axes=(1, 0))
                gp[:, :, u:u + s * ho:s, v:v + s * wo:s] += contrib.transpose(0, 3, 1, 2)
        h = hp - 2 * self.ph
        w = wp - 2 * self.pw
        return gp[:, :, self.ph:self.ph + h, self.pw:self.pw + w]

    def output_shape(self, in_shape):
        c, h, w = in_shape
        ho = (h + 2 * self.ph - self.kh) // self.stride + 1
        wo = (w + 2 * self.pw - self.kw) // self.stride + 1
        return (self.out_channels, ho, wo)

    def flops(self, in_shape) -> int:
        _, ho, wo = self.output_shape(in_shape)
        return 2 * ho * wo * self.kh * self.kw * self.in_channels * self.out_channels

    def spec(self):
        return {"type": "conv2d", "in": self.in_channels, "out": self.out_channels,
                "kernel": [self.kh, self.kw], "stride": self.stride,
                "padding": [self.ph, self.pw]}


class BatchNorm2d(Layer):
    """Per-channel batch normalization over (N, H, W).

    Train mode normalizes by batch statistics (biased variance) and
    updates running stats with momentum; eval mode normalizes by the
    running stats.  Backward in train mode includes the dependence of
    the batch statistics on the input.
    """

    def __init__(self, channels: int, eps: float = 1e-5, momentum: float = 0.1,
                 dtype=np.float32):
        super().__init__()
        self.channels = channels
        self.eps = eps
        self.momentum = momentum
        self.gamma = np.ones(channels, dtype=dtype)
        self.beta = np.zeros(channels, dtype=dtype)
        self.running_mean = np.zeros(channels, dtype=dtype)
        self.running_var = np.ones(channels, dtype=dtype)
        self._xhat = None
        self._invstd = None
        self._was_training = True

    def params(self):
        return {"gamma": self.gamma, "beta": self.beta}

    def state(self):
        return {"gamma": self.gamma, "beta": self.beta,
                "running_mean": self.running_mean, "running_var": self.running_var}

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.ndim != 4 or x.shape[1] != self.channels:
            raise ValueError(f"batchnorm expects (N, {self.channels}, H, W), got {x.shape}")
        if self.training:
            n, _, h, w = x.shape
            if n * h * w == 1:
                raise ValueError("batchnorm train mode needs more than one value per channel; "
                                 "variance is degenerate for a single spatial-batch element")
            mean = x.mean(axis=(0, 2, 3))
            var = x.var(axis=(0, 2, 3))
            self.running_mean[...] = (1 - self.momentum) * self.running_mean + self.momentum * mean
            self.running_var[...] = (1 - self.momentum) * self.running_var + self.momentum * var
        else:
            mean = self.running_mean
            var = self.running_var
        invstd = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mean[None, :, None, None]) * invstd[None, :, None, None]
        self._xhat = xhat
        self._invstd = invstd
        self._was_training = self.training
        return self.gamma[None, :, None, None] * xhat + self.beta[None, :, None, None]

    def backward(self, g: np.ndarray) -> np.ndarray:
        xhat, invstd = self._xhat, self._invstd
        self.grads["gamma"] = (g * xhat).sum(axis=(0, 2, 3)).astype(self.gamma.dtype)
        self.grads["beta"] = g.sum(axis=(0, 2, 3)).astype(self.beta.dtype)
        scale = (self.gamma * invstd)[None, :, None, None]
        if not self._was_training:
            return g * scale
        g_mean = g.mean(axis=(0, 2, 3), keepdims=True)
        gx_mean = (g * xhat).mean(axis=(0, 2, 3), keepdims=True)
        return scale * (g - g_mean - xhat * gx_mean)

    def spec(self):
        return {"type": "batchnorm2d", "channels": self.channels,
                "eps": self.eps, "momentum": self.momentum}


class Swish(Layer):
    """x * sigmoid(x); f'(x) = f(x) + sigmoid(x) (1 - f(x))."""

    def __init__(self):
        super().__init__()
        self._sig = None
        self._f = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        pos = x >= 0
        z = np.exp(np.where(pos, -x, x))
        sig = np.where(pos, 1.0 / (1.0 + z), z / (1.0 + z))
        f = x * sig
        self._sig = sig
        self._f = f
        return f

    def backward(self, g: np.ndarray) -> np.ndarray:
        return g * (self._f + self._sig * (1.0 - self._f))

    def spec(self):
        return {"type": "swish"}


class MaxPool2x2(Layer):
    """2x2 max pooling, stride 2, zero padding of 1 on each side.

    Windows tile the padded input disjointly, so backward is a plain
    scatter of the gradient to each window's argmax (first occurrence in
    row-major window order on ties; gradient landing on a padding cell
    is dropped).
    """

    def __init__(self):
        super().__init__()
        self._arg = None
        self._shape = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
        win = sliding_window_view(xp, (2, 2), axis=(2, 3))[:, :, ::2, ::2]
        n, c, ho, wo, _, _ = win.shape
        flat = win.reshape(n, c, ho, wo, 4)
        arg = flat.argmax(axis=-1)
        out = np.take_along_axis(flat, arg[..., None], axis=-1)[..., 0]
        self._arg = arg
        self._shape = x.shape
        return out

    def backward(self, g: np.ndarray) -> np.ndarray:
        n, c, h, w = self._shape
        arg = self._arg
        ho, wo = arg.shape[2], arg.shape[3]
        gp = np.zeros((n, c, h + 2, w + 2), dtype=g.dtype)
        ni, ci, ii, ji = np.indices(arg.shape, sparse=True)
        rows = 2 * ii + arg // 2
        cols = 2 * ji + arg % 2
        gp[ni, ci, rows, cols] = g
        return gp[:, :, 1:1 + h, 1:1 + w]

    def output_shape(self, in_shape):
        c, h, w = in_shape
        return (c, h // 2 + 1, w // 2 + 1)

    def spec(self):
        return {"type": "maxpool2x2"}


class GlobalAvgPool(Layer):
    """(N, C, H, W) -> (N, C) spatial mean; backward spreads g / (H W)."""

    def __init__(self):
        super().__init__()
        self._shape = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._shape = x.shape
        return x.mean(axis=(2, 3))

    def backward(self, g: np.ndarray) -> np.ndarray:
        n, c, h, w = self._shape
        return np.broadcast_to(g[:, :, None, None] / (h * w), self._shape).astype(g.dtype).copy()

    def output_shape(self, in_shape):
        return (in_shape[0],)

    def spec(self):
        return {"type": "gap"}


class Linear(Layer):
    def __init__(self, in_features: int, out_features: int, rng: Rng | None = None,
                 dtype=np.float32):
        super().__init__()
        self.in_features = in_features
        self.out_features = out_features
        if rng is None:
            self.weight = np.zeros((in_features, out_features), dtype=dtype)
        else:
            self.weight = glorot_uniform(rng, (in_features, out_features),
                                         in_features, out_features, dtype)
        self.bias = np.zeros(out_features, dtype=dtype)
        self._x = None

    def params(self):
        return {"weight": self.weight, "bias": self.bias}

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.ndim != 2 or x.shape[1] != self.in_features:
            raise ValueError(f"linear expects (N, {self.in_features}), got {x.shape}")
        self._x = x
        return x @ self.weight + self.bias

    def backward(self, g: np.ndarray) -> np.ndarray:
        self.grads["weight"] = (self._x.T @ g).astype(self.weight.dtype)
        self.grads["bias"] = g.sum(axis=0).astype(self.bias.dtype)
        return g @ self.weight.T

    def output_shape(self, in_shape):
        return (self.out_features,)

    def flops(self, in_shape) -> int:
        return (2 * self.in_features - 1) * self.out_features

    def spec(self):
        return {"type": "linear", "in": self.in_features, "out": self.out_features}


class AcbBlock(Layer):
    """Asymmetric convolution block: parallel 3x3, 1x3 and 3x1 branches,
    each conv -> batchnorm, summed.  The 1x3/3x1 paddings keep all three
    branch outputs the same size as the 3x3 branch, so at inference the
    block folds into one 3x3 convolution (see fuse())."""

    def __init__(self, in_channels: int, out_channels: int, stride: int = 1,
                 rng: Rng | None = None, dtype=np.float32):
        super().__init__()
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.stride = stride
        self.square = Conv2d(in_channels, out_channels, (3, 3), stride, (1, 1), rng, dtype)
        self.bn_square = BatchNorm2d(out_channels, dtype=dtype)
        self.horizontal = Conv2d(in_channels, out_channels, (1, 3), stride, (0, 1), rng, dtype)
        self.bn_horizontal = BatchNorm2d(out_channels, dtype=dtype)
        self.vertical = Conv2d(in_channels, out_channels, (3, 1), stride, (1, 0), rng, dtype)
        self.bn_vertical = BatchNorm2d(out_channels, dtype=dtype)

    def _branches(self):
        return (("square", self.square, self.bn_square),
                ("horizontal", self.horizontal, self.bn_horizontal),
                ("vertical", self.vertical, self.bn_vertical))

    def params(self):
        out = {}
        for tag, conv, bn in self._branches():
            for k, v in conv.params().items():
                out[f"{tag}.{k}"] = v
            for k, v in bn.params().items():
                out[f"bn_{tag}.{k}"] = v
        return out

    def state(self):
        out = {}
        for tag, conv, bn in self._branches():
            for k, v in conv.state().items():
                out[f"{tag}.{k}"] = v
            for k, v in bn.state().items():
                out[f"bn_{tag}.{k}"] = v
        return out

    def set_training(self, flag: bool) -> None:
        super().set_training(flag)
        for _, conv, bn in self._branches():
            conv.set_training(flag)
            bn.set_training(flag)

    def forward(self, x: np.ndarray) -> np.ndarray:
        ys = [bn.forward(conv.forward(x)) for _, conv, bn in self._branches()]
        return (ys[0] + ys[1]) + ys[2]

    def backward(self, g: np.ndarray) -> np.ndarray:
        gx = [conv.backward(bn.backward(g)) for _, conv, bn in self._branches()]
        self.grads = {}
        for tag, conv, bn in self._branches():
            for k, v in conv.grads.items():
                self.grads[f"{tag}.{k}"] = v
            for k, v in bn.grads.items():
                self.grads[f"bn_{tag}.{k}"] = v
        return (gx[0] + gx[1]) + gx[2]

    def output_shape(self, in_shape):
        return self.square.output_shape(in_shape)

    def flops(self, in_shape) -> int:
        return sum(conv.flops(in_shape) for _, conv, _ in self._branches())

    def spec(self):
        return {"type": "acb", "in": self.in_channels, "out": self.out_channels,
                "stride": self.stride}

    def fuse(self) -> Conv2d:
        """Fold the three conv+BN branches into one 3x3 convolution.

        Uses running (eval-mode) statistics: w' = w * gamma / sqrt(var + eps),
        b' = (b - mean) * gamma / sqrt(var + eps) + beta, with the slim
        kernels zero-padded into the 3x3 center row/column.
        """
        dtype = self.square.weight.dtype
        fused = Conv2d(self.in_channels, self.out_channels, (3, 3), self.stride, (1, 1),
                       rng=None, dtype=dtype)
        w_acc = np.zeros_like(fused.weight, dtype=np.float64)
        b_acc = np.zeros(self.out_channels, dtype=np.float64)
        for tag, conv, bn in self._branches():
            denom = bn.running_var.astype(np.float64) + bn.eps
            if np.any(denom <= 0):
                raise ValueError(f"cannot fuse {tag} branch: running_var + eps is not positive")
            scale = bn.gamma.astype(np.float64) / np.sqrt(denom)
            w = conv.weight.astype(np.float64) * scale[:, None, None, None]
            full = np.zeros_like(w_acc)
            if conv.kh == 3 and conv.kw == 3:
                full[...] = w
            elif conv.kh == 1:
                full[:, :, 1:2, :] = w
            else:
                full[:, :, :, 1:2] = w
            w_acc += full
            b_acc += (conv.bias.astype(np.float64) - bn.running_mean.astype(np.float64)) * scale \
                + bn.beta.astype(np.float64)
        fused.weight[...] = w_acc.astype(dtype)
        fused.bias[...] = b_acc.astype(dtype)
        return fused


class Model:
    """An ordered stack of layers with a flat parameter namespace."""

    def __init__(self, layers: list[Layer]):
        self.layers = list(layers)

    def forward(self, x: np.ndarray) -> np.ndarray:
        for layer in self.layers:
            x = layer.forward(x)
        return x

    def backward(self, g: np.ndarray) -> np.ndarray:
        for layer in reversed(self.layers):
            g = layer.backward(g)
        return g

    def set_training(self, flag: bool) -> None:
        for layer in self.layers:
            layer.set_training(flag)

    def named_params(self) -> list[tuple[str, np.ndarray]]:
        out = []
        for i, layer in enumerate(self.layers):
            for k, v in layer.params().items():
                out.append((f"{i}.{k}", v))
        return out

    def named_grads(self) -> list[tuple[str, np.ndarray]]:
        out = []
        for i, layer in enumerate(self.layers):
            for k in layer.params():
                out.append((f"{i}.{k}", layer.grads[k]))
        return out

    def named_state(self) -> list[tuple[str, np.ndarray]]:
        out = []
        for i, layer in enumerate(self.layers):
            for k, v in layer.state().items():
                out.append((f"{i}.{k}", v))
        return out

    def specs(self) -> list[dict]:
        return [layer.spec() for layer in self.layers]


_LAYER_BUILDERS = {
    "conv2d": lambda d, dt: Conv2d(d["in"], d["out"], tuple(d["kernel"]), d["stride"],
                                   tuple(d["padding"]), rng=None, dtype=dt),
    "batchnorm2d": lambda d, dt: BatchNorm2d(d["channels"], d["eps"], d["momentum"], dtype=dt),
    "swish": lambda d, dt: Swish(),
    "maxpool2x2": lambda d, dt: MaxPool2x2(),
    "gap": lambda d, dt: GlobalAvgPool(),
    "linear": lambda d, dt: Linear(d["in"], d["out"], rng=None, dtype=dt),
    "acb": lambda d, dt: AcbBlock(d["in"], d["out"], d["stride"], rng=None, dtype=dt),
}


def layer_from_spec(d: dict, dtype=np.float32) -> Layer:
    if d.get("type") not in _LAYER_BUILDERS:
        raise ValueError(f"unknown layer type in manifest: {d.get('type')!r}")
    return _LAYER_BUILDERS[d["type"]](d, dtype)
