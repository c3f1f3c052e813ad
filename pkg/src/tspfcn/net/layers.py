"""Primitive layer operations with explicit forward/backward passes.

All activations are (C, H, W) arrays. Convolution weights are
(C_out, C_in, K, K); transposed-convolution weights are (C_in, C_out, K, K).
Each forward returns (output, cache); the matching backward consumes the
cache and returns input/parameter gradients.
"""
from __future__ import annotations

import numpy as np

from ..errors import ShapeError


def _im2col(x_pad: np.ndarray, k: int, out_h: int, out_w: int) -> np.ndarray:
    """Stack k*k shifted views of the padded input: (C*k*k, out_h*out_w)."""
    c = x_pad.shape[0]
    cols = np.empty((c, k, k, out_h, out_w), dtype=x_pad.dtype)
    for ki in range(k):
        for kj in range(k):
            cols[:, ki, kj] = x_pad[:, ki : ki + out_h, kj : kj + out_w]
    return cols.reshape(c * k * k, out_h * out_w)


def conv2d_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray, pad: int):
    """Stride-1 cross-correlation with zero padding."""
    c_out, c_in, k, _ = w.shape
    if x.shape[0] != c_in:
        raise ShapeError(f"conv input has {x.shape[0]} channels, kernel expects {c_in}")
    h, wd = x.shape[1], x.shape[2]
    out_h = h + 2 * pad - k + 1
    out_w = wd + 2 * pad - k + 1
    x_pad = np.pad(x, ((0, 0), (pad, pad), (pad, pad))) if pad else x
    cols = _im2col(x_pad, k, out_h, out_w)
    y = w.reshape(c_out, -1) @ cols + b[:, None]
    cache = (cols, x.shape, w, pad)
    return y.reshape(c_out, out_h, out_w), cache


def conv2d_backward(dout: np.ndarray, cache):
    cols, x_shape, w, pad = cache
    c_out, c_in, k, _ = w.shape
    dout_mat = dout.reshape(c_out, -1)
    dw = (dout_mat @ cols.T).reshape(w.shape)
    db = dout_mat.sum(axis=1)
    dcols = w.reshape(c_out, -1).T @ dout_mat
    _, h, wd = x_shape
    out_h, out_w = dout.shape[1], dout.shape[2]
    dx_pad = np.zeros((c_in, h + 2 * pad, wd + 2 * pad), dtype=dout.dtype)
    dcols = dcols.reshape(c_in, k, k, out_h, out_w)
    for ki in range(k):
        for kj in range(k):
            dx_pad[:, ki : ki + out_h, kj : kj + out_w] += dcols[:, ki, kj]
    dx = dx_pad[:, pad : pad + h, pad : pad + wd] if pad else dx_pad
    return dx, dw, db


def deconv2d_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray, stride: int, pad: int):
    """Transposed convolution: each input pixel stamps a weighted kernel patch.

    Output spatial size is (in - 1) * stride - 2 * pad + k.
    """
    c_in, c_out, k, _ = w.shape
    if x.shape[0] != c_in:
        raise ShapeError(f"deconv input has {x.shape[0]} channels, kernel expects {c_in}")
    in_h, in_w = x.shape[1], x.shape[2]
    out_h = (in_h - 1) * stride - 2 * pad + k
    out_w = (in_w - 1) * stride - 2 * pad + k
    y_pad = np.zeros((c_out, out_h + 2 * pad, out_w + 2 * pad), dtype=x.dtype)
    w_flat = w.reshape(c_in, -1)
    for i in range(in_h):
        for j in range(in_w):
            patch = (x[:, i, j] @ w_flat).reshape(c_out, k, k)
            y_pad[:, i * stride : i * stride + k, j * stride : j * stride + k] += patch
    y = y_pad[:, pad : pad + out_h, pad : pad + out_w] if pad else y_pad
    y += b[:, None, None]
    cache = (x, w, stride, pad, (out_h, out_w))
    return y, cache


def deconv2d_backward(dout: np.ndarray, cache):
    x, w, stride, pad, (out_h, out_w) = cache
    c_in, c_out, k, _ = w.shape
    in_h, in_w = x.shape[1], x.shape[2]
    dy_pad = (
        np.pad(dout, ((0, 0), (pad, pad), (pad, pad))) if pad else dout
    )
    dx = np.empty_like(x)
    dw = np.zeros_like(w)
    w_mat = w.reshape(c_in, c_out * k * k)
    for i in range(in_h):
        for j in range(in_w):
            patch = dy_pad[:, i * stride : i * stride + k, j * stride : j * stride + k]
            flat = patch.reshape(-1)
            dx[:, i, j] = w_mat @ flat
            dw += np.multiply.outer(x[:, i, j], flat).reshape(w.shape)
    db = dout.sum(axis=(1, 2))
    return dx, dw, db


def maxpool2_forward(x: np.ndarray):
    """2x2 max pooling with stride 2; keeps the argmax for the backward pass."""
    c, h, w = x.shape
    if h % 2 or w % 2:
        raise ShapeError(f"maxpool2 needs even spatial dims, got {h}x{w}")
    h2, w2 = h // 2, w // 2
    windows = x.reshape(c, h2, 2, w2, 2).transpose(0, 1, 3, 2, 4).reshape(c, h2, w2, 4)
    idx = windows.argmax(axis=3)
    y = np.take_along_axis(windows, idx[..., None], axis=3)[..., 0]
    return y, (idx, x.shape)


def maxpool2_backward(dout: np.ndarray, cache):
    idx, x_shape = cache
    c, h, w = x_shape
    h2, w2 = h // 2, w // 2
    dwin = np.zeros((c, h2, w2, 4), dtype=dout.dtype)
    np.put_along_axis(dwin, idx[..., None], dout[..., None], axis=3)
    return dwin.reshape(c, h2, w2, 2, 2).transpose(0, 1, 3, 2, 4).reshape(c, h, w)


def relu_forward(x: np.ndarray):
    mask = x > 0
    return x * mask, mask


def relu_backward(dout: np.ndarray, mask: np.ndarray):
    return dout * mask


def dropout_forward(x: np.ndarray, rate: float, rng: np.random.Generator):
    """Inverted dropout: scaling happens at train time so inference is identity."""
    keep = 1.0 - rate
    mask = (rng.random(x.shape) < keep).astype(x.dtype) / keep
    return x * mask, mask


def dropout_backward(dout: np.ndarray, mask: np.ndarray):
    return dout * mask


def channel_softmax(z: np.ndarray) -> np.ndarray:
    """Per-pixel softmax over the channel axis of a (C, H, W) map."""
    shifted = z - z.max(axis=0, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=0, keepdims=True)


def channel_softmax_backward(dout: np.ndarray, y: np.ndarray) -> np.ndarray:
    return y * (dout - (dout * y).sum(axis=0, keepdims=True))
