"""Shear operator on EPIs and (..., S, U) feature tensors.

Row ``s`` of the output samples the input row at ``u + (s - c) * alpha_h``
with ``c = (S - 1) / 2`` the middle view, using linear interpolation along
``u``. Samples whose source position falls outside ``[0, U - 1]`` are zero.
A line of disparity ``d`` (it moves ``-d`` pixels per view) is made vertical
by ``alpha_h = -d``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .lightfield import Epi


@dataclass(frozen=True)
class ShearSpec:
    alpha_h: float
    centered: bool = True
    boundary: str = "zero"

    def __post_init__(self):
        if not np.isfinite(self.alpha_h):
            raise ValueError("shear amount must be finite")
        if not self.centered or self.boundary != "zero":
            raise ValueError("only centered, zero-filled shears are supported")


def view_center(S: int) -> float:
    return (S - 1) / 2.0


def row_shifts(S: int, alpha_h: float) -> np.ndarray:
    return (np.arange(S, dtype=np.float64) - view_center(S)) * float(alpha_h)


def _as_batches(x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim < 2:
        raise ValueError("shear needs at least an (S, U) array")
    S, U = x.shape[-2:]
    return np.ascontiguousarray(x.reshape(-1, S, U)), x.shape


def _check(alpha_h, U):
    ShearSpec(alpha_h)
    if abs(alpha_h) > U:
        raise ValueError(f"|alpha_h|={abs(alpha_h)} exceeds the spatial extent {U}")


def shear_tensor(x, alpha_h: float) -> np.ndarray:
    """Shear an array of shape ``(..., S, U)`` along its last axis."""
    xb, shape = _as_batches(x)
    _check(alpha_h, shape[-1])
    if alpha_h == 0:
        return xb.reshape(shape).copy()
    return kernels.shear_rows(xb, row_shifts(shape[-2], alpha_h)).reshape(shape)


def shear_tensor_adjoint(g, alpha_h: float) -> np.ndarray:
    """Transpose of :func:`shear_tensor`; routes gradients through the interpolation weights."""
    gb, shape = _as_batches(g)
    _check(alpha_h, shape[-1])
    if alpha_h == 0:
        return gb.reshape(shape).copy()
    return kernels.shear_rows_adjoint(gb, row_shifts(shape[-2], alpha_h)).reshape(shape)


def shear_epi(epi: Epi, alpha_h: float) -> Epi:
    return epi.with_samples(shear_tensor(epi.samples, alpha_h))


def unshear_for_upsampled(x, alpha_h: float, alpha_s: int) -> np.ndarray:
    """Undo a shear of ``alpha_h`` after the views were upsampled ``alpha_s`` times."""
    if alpha_s < 1:
        raise ValueError(f"alpha_s must be >= 1, got {alpha_s}")
    return shear_tensor(x, -alpha_h / alpha_s)


def interior_band(U: int, S: int, alpha_h: float) -> slice:
    """Columns never touched by zero fill for a shear of ``alpha_h`` on ``S`` rows."""
    m = int(np.ceil(abs(alpha_h) * view_center(S)))
    return slice(m, max(m, U - m))
