"""Cubic-convolution resampling and the exact Laplacian residual pyramid.

Spatial operations act on the last axis (``u``) of any array; angular
helpers take an explicit axis. Resampling uses the Keys kernel with
``a = -0.5`` and edge replication at the borders. When downscaling, the
kernel is stretched by the factor so it doubles as the anti-aliasing filter.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import List, Sequence

import numpy as np

from . import kernels

KEYS_A = -0.5


def keys_kernel(x, a: float = KEYS_A):
    x = np.abs(np.asarray(x, dtype=np.float64))
    x2, x3 = x * x, x * x * x
    near = (a + 2.0) * x3 - (a + 3.0) * x2 + 1.0
    far = a * x3 - 5.0 * a * x2 + 8.0 * a * x - 4.0 * a
    return np.where(x <= 1.0, near, np.where(x < 2.0, far, 0.0))


def _plan(n_in: int, positions: np.ndarray, stretch: float):
    radius = 2.0 * stretch
    first = np.floor(positions - radius).astype(np.int64) + 1
    taps = int(np.ceil(2.0 * radius)) + 1
    idx = first[:, None] + np.arange(taps)[None, :]
    w = keys_kernel((positions[:, None] - idx) / stretch)
    w /= w.sum(axis=1, keepdims=True)
    idx = np.clip(idx, 0, n_in - 1)
    return np.ascontiguousarray(idx), np.ascontiguousarray(w)


@lru_cache(maxsize=256)
def _down_plan(n_in: int, factor: int):
    n_out = -(-n_in // factor)
    pos = (np.arange(n_out) + 0.5) * factor - 0.5
    return _plan(n_in, pos, float(factor))


@lru_cache(maxsize=256)
def _up_plan(n_in: int, factor: int, n_out: int):
    pos = (np.arange(n_out) + 0.5) / factor - 0.5
    return _plan(n_in, pos, 1.0)


@lru_cache(maxsize=256)
def _angular_plan(n_in: int, n_out: int):
    if n_out == 1:
        pos = np.zeros(1)
        step = 1.0
    else:
        step = (n_in - 1) / (n_out - 1)
        pos = np.arange(n_out) * step
    return _plan(n_in, pos, max(1.0, step))


def _apply_last(x, plan):
    idx, w = plan
    x = np.asarray(x, dtype=np.float64)
    lead = x.shape[:-1]
    flat = np.ascontiguousarray(x.reshape(-1, x.shape[-1]))
    return kernels.gather_rows(flat, idx, w).reshape(lead + (idx.shape[0],))


def _apply_axis(x, plan, axis):
    x = np.moveaxis(np.asarray(x, dtype=np.float64), axis, -1)
    return np.moveaxis(_apply_last(x, plan), -1, axis)


def _check_factor(factor):
    if int(factor) != factor or factor < 1:
        raise ValueError(f"factor must be a positive integer, got {factor}")
    return int(factor)


def downscale_spatial(x, factor: int) -> np.ndarray:
    """Anti-aliased reduction of the last axis to ``ceil(U / factor)`` samples."""
    factor = _check_factor(factor)
    x = np.asarray(x, dtype=np.float64)
    if factor == 1:
        return x.copy()
    return _apply_last(x, _down_plan(x.shape[-1], factor))


def upscale_spatial(x, factor: int, width: int | None = None) -> np.ndarray:
    """Cubic interpolation of the last axis to ``factor`` times its size (or ``width``)."""
    factor = _check_factor(factor)
    x = np.asarray(x, dtype=np.float64)
    n_out = x.shape[-1] * factor if width is None else int(width)
    if factor == 1 and n_out == x.shape[-1]:
        return x.copy()
    return _apply_last(x, _up_plan(x.shape[-1], factor, n_out))


def filter_spatial(x, taps) -> np.ndarray:
    """Correlate the last axis with an odd-length symmetric kernel (edge replication)."""
    taps = np.asarray(taps, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if taps.size == 1:
        return x * taps[0]
    U = x.shape[-1]
    h = taps.size // 2
    idx = np.clip(np.arange(U)[:, None] + np.arange(-h, h + 1)[None, :], 0, U - 1)
    w = np.broadcast_to(taps, idx.shape)
    return _apply_last(x, (np.ascontiguousarray(idx), np.ascontiguousarray(w)))


def angular_upsample(x, alpha_s: int, axis: int = -2) -> np.ndarray:
    """Cubic interpolation of ``alpha_s - 1`` new views between each pair of views.

    Output row ``k * alpha_s`` equals input row ``k`` exactly.
    """
    alpha_s = _check_factor(alpha_s)
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[axis]
    if alpha_s == 1:
        return x.copy()
    n_out = alpha_s * n - (alpha_s - 1)
    pos = np.arange(n_out) / alpha_s
    plan = _plan(n, pos, 1.0)
    return _apply_axis(x, plan, axis)


def resample_angular(x, n_out: int, axis: int = 0) -> np.ndarray:
    """Resample views along ``axis`` to ``n_out`` views with the end views aligned."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[axis] == n_out:
        return x.copy()
    return _apply_axis(x, _angular_plan(x.shape[axis], int(n_out)), axis)


def downsample_angular_nearest(x, rate: int, offset: int = 0, axis: int = -2) -> np.ndarray:
    """Keep views ``s`` with ``s % rate == offset``."""
    rate = _check_factor(rate)
    if not 0 <= offset < rate:
        raise ValueError(f"offset must lie in [0, {rate}), got {offset}")
    x = np.asarray(x)
    sl = [slice(None)] * x.ndim
    sl[axis] = slice(offset, None, rate)
    return x[tuple(sl)].copy()


@dataclass
class PyramidLevels:
    factors: List[int]
    base: np.ndarray
    residuals: List[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        f = list(self.factors)
        if not f or f[-1] != 1 or any(a <= b for a, b in zip(f, f[1:])):
            raise ValueError(f"factors must strictly decrease to 1, got {f}")
        if len(self.residuals) != len(f) - 1:
            raise ValueError("need one residual per adjacent pair of factors")


def _ratios(factors):
    out = []
    for a, b in zip(factors, factors[1:]):
        if a % b:
            raise ValueError(f"factor {a} is not a multiple of {b}")
        out.append(a // b)
    return out


def laplacian_decompose(x, factors: Sequence[int] = (4, 2, 1)) -> PyramidLevels:
    x = np.asarray(x, dtype=np.float64)
    factors = [int(f) for f in factors]
    if x.shape[-1] < 2 * factors[0] and factors[0] > 1:
        raise ValueError(f"width {x.shape[-1]} too small for factor {factors[0]}")
    levels = [downscale_spatial(x, f) for f in factors]
    residuals = []
    for k, r in enumerate(_ratios(factors)):
        fine = levels[k + 1]
        residuals.append(fine - upscale_spatial(levels[k], r, width=fine.shape[-1]))
    return PyramidLevels(factors, levels[0], residuals)


def laplacian_reconstruct(p: PyramidLevels) -> np.ndarray:
    cur = p.base
    for r, res in zip(_ratios(p.factors), p.residuals):
        cur = upscale_spatial(cur, r, width=res.shape[-1]) + res
    return cur
