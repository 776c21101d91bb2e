"""4D light field container, EPI slicing and the two-step 4D reconstruction.

Samples are stored as a ``(views_t, views_s, height, width)`` array, i.e.
``(t, s, v, u)`` from outermost to innermost, so a horizontal EPI
``E_{v*, t*}(u, s)`` is the strided gather ``samples[t*, :, v*, :]``.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np


class ReconstructionError(RuntimeError):
    """An EPI reconstructor failed on a particular slice."""


@dataclass(frozen=True)
class DisparityRange:
    d_min: float
    d_max: float

    def __post_init__(self):
        if not (np.isfinite(self.d_min) and np.isfinite(self.d_max)):
            raise ValueError("disparity bounds must be finite")
        if self.d_min > self.d_max:
            raise ValueError(f"d_min={self.d_min} exceeds d_max={self.d_max}")

    @property
    def d_opt(self) -> float:
        """Optimal rendering disparity, the midpoint of the range."""
        return 0.5 * (self.d_min + self.d_max)

    @property
    def width(self) -> float:
        return self.d_max - self.d_min


@dataclass(frozen=True)
class Provenance:
    """Where an EPI came from.

    ``kind`` is one of ``horizontal`` (coords ``(v, t)``), ``vertical``
    (coords ``(u, s)``), ``synthetic`` or ``pseudo``.
    """

    kind: str
    coords: tuple = ()

    KINDS = ("horizontal", "vertical", "synthetic", "pseudo")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown provenance kind {self.kind!r}")

    @classmethod
    def horizontal(cls, v, t):
        return cls("horizontal", (int(v), int(t)))

    @classmethod
    def vertical(cls, u, s):
        return cls("vertical", (int(u), int(s)))


SYNTHETIC = Provenance("synthetic")
PSEUDO = Provenance("pseudo")


@dataclass
class Epi:
    """2D epipolar-plane image: rows are views (s), columns are pixels (u)."""

    samples: np.ndarray
    provenance: Provenance = field(default=SYNTHETIC)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 2:
            raise ValueError(f"EPI samples must be 2D, got shape {self.samples.shape}")
        if min(self.samples.shape) < 1:
            raise ValueError("EPI dimensions must be >= 1")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("EPI samples must be finite")

    @property
    def angular(self) -> int:
        return self.samples.shape[0]

    @property
    def spatial(self) -> int:
        return self.samples.shape[1]

    def with_samples(self, samples) -> "Epi":
        return Epi(samples, self.provenance)


@dataclass
class LightField4D:
    samples: np.ndarray
    disparity_hint: Optional[DisparityRange] = None

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 4:
            raise ValueError("light field samples must be 4D (t, s, v, u)")
        if min(self.samples.shape) < 1:
            raise ValueError("all light field dimensions must be >= 1")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("light field samples must be finite")

    @classmethod
    def empty(cls, width, height, views_s, views_t, disparity_hint=None):
        return cls(np.zeros((views_t, views_s, height, width)), disparity_hint)

    @property
    def views_t(self) -> int:
        return self.samples.shape[0]

    @property
    def views_s(self) -> int:
        return self.samples.shape[1]

    @property
    def height(self) -> int:
        return self.samples.shape[2]

    @property
    def width(self) -> int:
        return self.samples.shape[3]

    def view(self, s, t) -> np.ndarray:
        return self.samples[t, s]

    def copy(self) -> "LightField4D":
        return LightField4D(self.samples.copy(), self.disparity_hint)


def _check_index(name, value, bound):
    if not 0 <= value < bound:
        raise IndexError(f"{name}={value} out of range [0, {bound})")


def extract_epi_horizontal(lf: LightField4D, v_star: int, t_star: int) -> Epi:
    _check_index("v_star", v_star, lf.height)
    _check_index("t_star", t_star, lf.views_t)
    return Epi(lf.samples[t_star, :, v_star, :].copy(), Provenance.horizontal(v_star, t_star))


def extract_epi_vertical(lf: LightField4D, u_star: int, s_star: int) -> Epi:
    _check_index("u_star", u_star, lf.width)
    _check_index("s_star", s_star, lf.views_s)
    return Epi(lf.samples[:, s_star, :, u_star].copy(), Provenance.vertical(u_star, s_star))


def insert_epi(lf: LightField4D, epi: Epi) -> None:
    """Write ``epi`` back into the slice of ``lf`` named by its provenance."""
    kind, coords = epi.provenance.kind, epi.provenance.coords
    if kind == "horizontal":
        v, t = coords
        _check_index("v", v, lf.height)
        _check_index("t", t, lf.views_t)
        expected = (lf.views_s, lf.width)
        target = (slice(t, t + 1), slice(None), slice(v, v + 1), slice(None))
    elif kind == "vertical":
        u, s = coords
        _check_index("u", u, lf.width)
        _check_index("s", s, lf.views_s)
        expected = (lf.views_t, lf.height)
        target = (slice(None), slice(s, s + 1), slice(None), slice(u, u + 1))
    else:
        raise ValueError(f"cannot insert an EPI with provenance {kind!r}")
    if epi.samples.shape != expected:
        raise ValueError(f"EPI shape {epi.samples.shape} does not match slice shape {expected}")
    lf.samples[target] = epi.samples.reshape(lf.samples[target].shape)


def upsampled_count(n: int, alpha_s: int) -> int:
    """Number of views after angular upsampling by ``alpha_s``."""
    return alpha_s * n - (alpha_s - 1)


EpiFn = Callable[[Epi], Epi]


def _run_slices(jobs, fn, threads):
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, jobs))
    return [fn(j) for j in jobs]


def _apply(epi_fn, epi, expected_rows, where):
    try:
        out = epi_fn(epi)
    except Exception as exc:
        raise ReconstructionError(f"EPI reconstruction failed at {where}: {exc}") from exc
    if out.samples.shape != (expected_rows, epi.spatial):
        raise ReconstructionError(
            f"EPI reconstruction at {where} returned shape {out.samples.shape}, "
            f"expected {(expected_rows, epi.spatial)}"
        )
    return out.samples


def reconstruct_4d(sparse: LightField4D, epi_fn: EpiFn, alpha_s: int, threads: int = 1) -> LightField4D:
    """Angularly upsample a sparse light field with a 2D EPI reconstructor.

    Horizontal EPIs ``E_{v*,t*}(u, s)`` are reconstructed first to densify
    ``s``; vertical EPIs ``E_{u*,s*}(v, t)`` of that result are then
    reconstructed to densify ``t``. An axis holding a single view is left
    alone. Input views are copied into the output unmodified.
    """
    if int(alpha_s) != alpha_s or alpha_s < 1:
        raise ValueError(f"alpha_s must be a positive integer, got {alpha_s}")
    alpha_s = int(alpha_s)
    if max(sparse.views_s, sparse.views_t) < 2 and alpha_s > 1:
        raise ValueError("sparse light field needs at least 2 views along one angular axis")

    cur = sparse.samples
    T, S, V, U = cur.shape

    if S >= 2 and alpha_s > 1:
        S2 = upsampled_count(S, alpha_s)
        step1 = np.empty((T, S2, V, U))
        jobs = [(t, v) for t in range(T) for v in range(V)]

        def run_h(job):
            t, v = job
            epi = Epi(cur[t, :, v, :], Provenance.horizontal(v, t))
            return _apply(epi_fn, epi, S2, f"horizontal EPI v={v}, t={t}")

        for (t, v), rows in zip(jobs, _run_slices(jobs, run_h, threads)):
            step1[t, :, v, :] = rows
        step1[:, ::alpha_s] = cur
        cur = step1
        S = S2

    if T >= 2 and alpha_s > 1:
        T2 = upsampled_count(T, alpha_s)
        step2 = np.empty((T2, S, V, U))
        jobs = [(s, u) for s in range(S) for u in range(U)]
        src = cur

        def run_v(job):
            s, u = job
            epi = Epi(src[:, s, :, u], Provenance.vertical(u, s))
            return _apply(epi_fn, epi, T2, f"vertical EPI u={u}, s={s}")

        for (s, u), rows in zip(jobs, _run_slices(jobs, run_v, threads)):
            step2[:, s, :, u] = rows
        step2[::alpha_s] = src
        cur = step2

    return LightField4D(cur, sparse.disparity_hint)


def reconstruct_cascade(sparse: LightField4D, epi_fn: EpiFn, alpha_s: int, factor: int,
                        threads: int = 1) -> LightField4D:
    """Upsample each populated angular axis by an arbitrary integer ``factor``.

    ``reconstruct_4d`` is cascaded until the density reaches at least
    ``factor``; the result is then angularly resampled with cubic convolution
    down to ``(n - 1) * factor + 1`` views, e.g. x7 is done as two x3 passes
    followed by a resample from x9. Input views are copied through unmodified.
    """
    from .pyramid import resample_angular

    if factor < 1:
        raise ValueError("factor must be >= 1")
    lf = sparse
    reached = 1
    while reached < factor:
        lf = reconstruct_4d(lf, epi_fn, alpha_s, threads=threads)
        reached *= alpha_s
    if reached == factor:
        return lf
    out = lf.samples
    if sparse.views_s >= 2:
        out = resample_angular(out, upsampled_count(sparse.views_s, factor), axis=1)
    if sparse.views_t >= 2:
        out = resample_angular(out, upsampled_count(sparse.views_t, factor), axis=0)
    # input views sit on the output grid; the anti-aliased resampler blurs them, so put them back
    ft = factor if sparse.views_t >= 2 else 1
    fs = factor if sparse.views_s >= 2 else 1
    out[::ft, ::fs] = sparse.samples
    return LightField4D(out, sparse.disparity_hint)
