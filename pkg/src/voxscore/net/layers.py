"""Dense-tensor building blocks: 3D convolution, 2x2x2 max pooling, fully
connected layers, with exact analytic backward passes.

Batched layout is (N, C, D, H, W). Convolutions are stride 1 with trailing
same-padding (even kernels pad k-1 cells at the high end of each axis), so
spatial size is preserved and pooling does every downsample with full
windows. Backward reductions run in a fixed order, so results are
bit-reproducible.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def relu(x):
    return np.maximum(x, 0.0)


def sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


class Conv3dSame:
    """Stride-1 cross-correlation, output spatial size == input size."""

    def __init__(self, in_channels: int, out_channels: int, kernel=(2, 2, 2)):
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel = tuple(kernel)

    def param_shapes(self):
        return {
            "w": (self.out_channels, self.in_channels, *self.kernel),
            "b": (self.out_channels,),
        }

    def fan_in(self) -> int:
        kd, kh, kw = self.kernel
        return self.in_channels * kd * kh * kw

    def _cols(self, x):
        n, c, d, h, w = x.shape
        kd, kh, kw = self.kernel
        xp = np.pad(x, ((0, 0), (0, 0), (0, kd - 1), (0, kh - 1), (0, kw - 1)))
        win = sliding_window_view(xp, self.kernel, axis=(2, 3, 4))
        cols = win.transpose(0, 2, 3, 4, 1, 5, 6, 7).reshape(
            n * d * h * w, c * kd * kh * kw
        )
        return np.ascontiguousarray(cols)

    def forward(self, x, params):
        n, _, d, h, w = x.shape
        cols = self._cols(x)
        wmat = params["w"].reshape(self.out_channels, -1)
        out = cols @ wmat.T + params["b"]
        out = out.reshape(n, d, h, w, self.out_channels).transpose(0, 4, 1, 2, 3)
        return np.ascontiguousarray(out), (cols, x.shape)

    def backward(self, dy, cache, params):
        cols, x_shape = cache
        n, c, d, h, w = x_shape
        kd, kh, kw = self.kernel
        dymat = dy.transpose(0, 2, 3, 4, 1).reshape(n * d * h * w, self.out_channels)
        wmat = params["w"].reshape(self.out_channels, -1)
        dw = (dymat.T @ cols).reshape(params["w"].shape)
        db = dymat.sum(axis=0)
        dcols = (dymat @ wmat).reshape(n, d, h, w, c, kd, kh, kw)
        dxp = np.zeros((n, c, d + kd - 1, h + kh - 1, w + kw - 1), dtype=dy.dtype)
        for a in range(kd):
            for b in range(kh):
                for cc in range(kw):
                    dxp[:, :, a : a + d, b : b + h, cc : cc + w] += dcols[
                        :, :, :, :, :, a, b, cc
                    ].transpose(0, 4, 1, 2, 3)
        dx = dxp[:, :, :d, :h, :w]
        return np.ascontiguousarray(dx), {"w": dw, "b": db}


class MaxPool2:
    """2x2x2 max pooling with stride 2; input spatial dims must be even.
    Backward routes the gradient only to each window's argmax cell (first
    index on ties)."""

    def _windows(self, x):
        n, c, d, h, w = x.shape
        if d % 2 or h % 2 or w % 2:
            raise ValueError(f"pooling needs even spatial dims, got {(d, h, w)}")
        win = x.reshape(n, c, d // 2, 2, h // 2, 2, w // 2, 2)
        win = win.transpose(0, 1, 2, 4, 6, 3, 5, 7)
        return win.reshape(n, c, d // 2, h // 2, w // 2, 8)

    def forward(self, x, params=None):
        win = self._windows(x)
        arg = win.argmax(axis=-1)
        out = np.take_along_axis(win, arg[..., None], axis=-1)[..., 0]
        return np.ascontiguousarray(out), (arg, x.shape)

    def backward(self, dy, cache, params=None):
        arg, x_shape = cache
        n, c, d, h, w = x_shape
        scatter = np.zeros((n, c, d // 2, h // 2, w // 2, 8), dtype=dy.dtype)
        np.put_along_axis(scatter, arg[..., None], dy[..., None], axis=-1)
        dx = scatter.reshape(n, c, d // 2, h // 2, w // 2, 2, 2, 2)
        dx = dx.transpose(0, 1, 2, 5, 3, 6, 4, 7).reshape(n, c, d, h, w)
        return np.ascontiguousarray(dx), None


class Dense:
    def __init__(self, in_features: int, out_features: int):
        self.in_features = in_features
        self.out_features = out_features

    def param_shapes(self):
        return {
            "w": (self.out_features, self.in_features),
            "b": (self.out_features,),
        }

    def fan_in(self) -> int:
        return self.in_features

    def forward(self, x, params):
        return x @ params["w"].T + params["b"], x

    def backward(self, dy, cache, params):
        x = cache
        dw = dy.T @ x
        db = dy.sum(axis=0)
        dx = dy @ params["w"]
        return dx, {"w": dw, "b": db}


class Activation:
    def __init__(self, kind: str):
        if kind not in ("relu", "sigmoid"):
            raise ValueError(f"unknown activation {kind!r}")
        self.kind = kind

    def forward(self, x, params=None):
        if self.kind == "relu":
            y = relu(x)
            return y, x
        y = sigmoid(x)
        return y, y

    def backward(self, dy, cache, params=None):
        if self.kind == "relu":
            return dy * (cache > 0), None
        y = cache
        return dy * y * (1.0 - y), None


class Flatten:
    def forward(self, x, params=None):
        return x.reshape(x.shape[0], -1), x.shape

    def backward(self, dy, cache, params=None):
        return dy.reshape(cache), None
