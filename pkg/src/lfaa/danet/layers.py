"""Layer primitives with explicit reverse-mode gradients.

Tensors are ``(N, C, S, U)``: batch, channels, views, pixels. Kernel and
stride tuples follow the ``(spatial, angular)`` order of the layer tables and
are swapped to ``(S, U)`` array order internally.

Padding is "same" style: a strided convolution maps ``m`` samples to
``ceil(m / stride)`` and splits the padding ``(n - 1) * stride + k - m`` with
the smaller half in front. A deconvolution is the exact adjoint of that
convolution for an explicitly given output size.
"""
from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .. import kernels

LEAKY_SLOPE = 0.2
BN_MOMENTUM = 0.9
BN_EPS = 1e-5


def same_out(m: int, stride: int) -> int:
    return -(-m // stride)


def same_pad(m_in: int, n_out: int, k: int, stride: int):
    total = (n_out - 1) * stride + k - m_in
    lo = total // 2 if total > 0 else 0
    return lo, (n_out - 1) * stride + k


def _pad_axis(x, axis, lo, length):
    # place x at offset ``lo`` inside a zero buffer of ``length``; crops if too long
    shape = list(x.shape)
    shape[axis] = length
    out = np.zeros(shape, dtype=x.dtype)
    n = min(x.shape[axis], length - lo)
    dst = [slice(None)] * x.ndim
    src = [slice(None)] * x.ndim
    dst[axis] = slice(lo, lo + n)
    src[axis] = slice(0, n)
    out[tuple(dst)] = x[tuple(src)]
    return out


def _unpad_axis(g, axis, lo, m):
    shape = list(g.shape)
    shape[axis] = m
    out = np.zeros(shape, dtype=g.dtype)
    n = min(m, g.shape[axis] - lo)
    dst = [slice(None)] * g.ndim
    src = [slice(None)] * g.ndim
    dst[axis] = slice(0, n)
    src[axis] = slice(lo, lo + n)
    out[tuple(dst)] = g[tuple(src)]
    return out


class ConvGeometry:
    """Index bookkeeping shared by a convolution and its adjoint."""

    def __init__(self, in_size, out_size, kernel, stride):
        self.in_size = tuple(in_size)
        self.out_size = tuple(out_size)
        self.kernel = tuple(kernel)
        self.stride = tuple(stride)
        self.pads = [same_pad(m, n, k, s) for m, n, k, s in zip(in_size, out_size, kernel, stride)]

    def pad(self, x):
        for ax, (lo, length) in zip((2, 3), self.pads):
            x = _pad_axis(x, ax, lo, length)
        return x

    def unpad(self, g):
        for ax, (lo, _), m in zip((2, 3), self.pads, self.in_size):
            g = _unpad_axis(g, ax, lo, m)
        return g

    def im2col(self, x):
        """``(N, C, H, W)`` -> ``(N, Ho, Wo, C * kh * kw)``."""
        kh, kw = self.kernel
        sh, sw = self.stride
        Ho, Wo = self.out_size
        xp = self.pad(x)
        win = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::sh, ::sw][:, :, :Ho, :Wo]
        N, C = x.shape[:2]
        return np.ascontiguousarray(win.transpose(0, 2, 3, 1, 4, 5)).reshape(N, Ho, Wo, C * kh * kw)

    def col2im(self, cols, C):
        kh, kw = self.kernel
        N = cols.shape[0]
        Ho, Wo = self.out_size
        cols = np.ascontiguousarray(cols).reshape(N, Ho, Wo, C, kh, kw)
        gp = kernels.col2im(cols, self.pads[0][1], self.pads[1][1], *self.stride)
        return self.unpad(gp)


def conv_forward(x, w, b, stride, out_size=None):
    """Strided convolution (cross-correlation). ``w``: ``(O, C, kS, kU)``; ``stride`` in (S, U) order."""
    N, C, H, W = x.shape
    O, _, kh, kw = w.shape
    if out_size is None:
        out_size = (same_out(H, stride[0]), same_out(W, stride[1]))
    geo = ConvGeometry((H, W), out_size, (kh, kw), stride)
    cols = geo.im2col(x)
    y = cols @ w.reshape(O, -1).T
    if b is not None:
        y = y + b
    return np.ascontiguousarray(y.transpose(0, 3, 1, 2)), (geo, cols)


def conv_backward(dy, w, cache, need_dx=True):
    geo, cols = cache
    O, C = w.shape[:2]
    dy2 = dy.transpose(0, 2, 3, 1)
    dw = np.tensordot(dy2, cols, axes=([0, 1, 2], [0, 1, 2])).reshape(w.shape)
    db = dy2.sum(axis=(0, 1, 2))
    dx = geo.col2im(dy2 @ w.reshape(O, -1), C) if need_dx else None
    return dx, dw, db


def deconv_forward(x, w, b, stride, out_size):
    """Transposed convolution. ``w``: ``(C_in, O, kS, kU)``; output ``(N, O, *out_size)``.

    It is the adjoint of a convolution mapping ``out_size`` to the input size.
    """
    N, C, H, W = x.shape
    _, O, kh, kw = w.shape
    geo = ConvGeometry(out_size, (H, W), (kh, kw), stride)
    if (same_out(out_size[0], stride[0]), same_out(out_size[1], stride[1])) != (H, W):
        raise ValueError(f"deconvolution output {out_size} incompatible with input {(H, W)} at stride {stride}")
    x2 = x.transpose(0, 2, 3, 1)
    y = geo.col2im(x2 @ w.reshape(C, -1), O)
    if b is not None:
        y = y + b[None, :, None, None]
    return y, (geo, x2)


def deconv_backward(dy, w, cache, need_dx=True):
    geo, x2 = cache
    C, O = w.shape[:2]
    cols = geo.im2col(dy)
    dw = np.tensordot(x2, cols, axes=([0, 1, 2], [0, 1, 2])).reshape(w.shape)
    db = dy.sum(axis=(0, 2, 3))
    dx = (cols @ w.reshape(C, -1).T).transpose(0, 3, 1, 2) if need_dx else None
    return (np.ascontiguousarray(dx) if dx is not None else None), dw, db


def prefilter_forward(x, w):
    """Grouped 1D filtering along ``u``: each input channel yields ``w.shape[1]`` outputs.

    ``w``: ``(C, M, L)`` with odd ``L``; output channel ``c * M + j`` is input
    channel ``c`` correlated with ``w[c, j]`` under zero padding.
    """
    N, C, S, U = x.shape
    _, M, L = w.shape
    h = L // 2
    xp = np.zeros((N, C, S, U + 2 * h), dtype=x.dtype)
    xp[..., h:h + U] = x
    win = sliding_window_view(xp, L, axis=3)  # (N, C, S, U, L)
    y = np.einsum("ncsul,cml->ncmsu", win, w, optimize=True)
    return y.reshape(N, C * M, S, U), (win, x.shape)


def prefilter_backward(dy, w, cache):
    win, shape = cache
    N, C, S, U = shape
    _, M, L = w.shape
    h = L // 2
    g = dy.reshape(N, C, M, S, U)
    dw = np.einsum("ncmsu,ncsul->cml", g, win, optimize=True)
    # adjoint of correlation: scatter each tap back onto the padded input
    gx = np.einsum("ncmsu,cml->ncsul", g, w, optimize=True)
    dxp = np.zeros((N, C, S, U + 2 * h), dtype=dy.dtype)
    for l in range(L):
        dxp[..., l:l + U] += gx[..., l]
    return dxp[..., h:h + U], dw


def leaky_forward(x, slope=LEAKY_SLOPE):
    return np.where(x > 0, x, slope * x)


def leaky_backward(dy, x, slope=LEAKY_SLOPE):
    return np.where(x > 0, dy, slope * dy)


def norm_forward(x, gamma, beta, state, training):
    """Per-channel normalization over (N, S, U) with running statistics."""
    if training:
        mu = x.mean(axis=(0, 2, 3))
        var = x.var(axis=(0, 2, 3))
        state["mean"] = BN_MOMENTUM * state["mean"] + (1 - BN_MOMENTUM) * mu
        state["var"] = BN_MOMENTUM * state["var"] + (1 - BN_MOMENTUM) * var
    else:
        mu, var = state["mean"], state["var"]
    inv = 1.0 / np.sqrt(var + BN_EPS)
    xhat = (x - mu[None, :, None, None]) * inv[None, :, None, None]
    y = gamma[None, :, None, None] * xhat + beta[None, :, None, None]
    return y, (xhat, inv, training)


def norm_backward(dy, gamma, cache):
    xhat, inv, training = cache
    dgamma = (dy * xhat).sum(axis=(0, 2, 3))
    dbeta = dy.sum(axis=(0, 2, 3))
    g = dy * gamma[None, :, None, None]
    if training:
        m = dy.shape[0] * dy.shape[2] * dy.shape[3]
        dx = (inv[None, :, None, None] / m) * (
            m * g - g.sum(axis=(0, 2, 3))[None, :, None, None]
            - xhat * (g * xhat).sum(axis=(0, 2, 3))[None, :, None, None])
    else:
        dx = g * inv[None, :, None, None]
    return dx, dgamma, dbeta
