"""Synthetic scenes with exact ground truth at any view position.

A scene point traces the line ``u = u0 - d * (s - c)`` through an EPI, with
``c`` the middle view, a Gaussian footprint along ``u`` and an optional
band-limited multiplicative modulation along ``s`` standing in for
view-dependent (non-Lambertian) appearance. Points are composited in list
order, later points over earlier ones.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Sequence, Tuple

import numpy as np
from scipy.interpolate import CubicSpline

from .lightfield import PSEUDO, SYNTHETIC, Epi, LightField4D

N_MOD_COMPONENTS = 8


@dataclass(frozen=True)
class ScenePoint:
    u0: float
    d: float
    intensity: float = 0.8
    width: float = 1.2
    beta_over_Z: float = 0.0
    mod_depth: float = 0.0
    mod_seed: int = 0

    def __post_init__(self):
        if self.width <= 0:
            raise ValueError("footprint width must be positive")
        if not 0 < self.intensity <= 1:
            raise ValueError("intensity must lie in (0, 1]")
        if not 0 <= self.mod_depth < 1:
            raise ValueError("mod_depth must lie in [0, 1)")
        if self.beta_over_Z < 0:
            raise ValueError("beta_over_Z must be non-negative")
        if self.intensity * (1 + self.mod_depth) > 1 + 1e-12:
            raise ValueError("intensity * (1 + mod_depth) must not exceed 1")

    @property
    def lambertian(self) -> bool:
        return self.beta_over_Z == 0 or self.mod_depth == 0


def band_limited_signal(band: float, seed: int) -> Callable[[np.ndarray], np.ndarray]:
    """Zero-mean random sum of cosines with angular frequencies in ``(0, band]``.

    The amplitudes are normalised so the signal stays within ``[-1, 1]``.
    """
    if band <= 0:
        return lambda s: np.zeros_like(np.asarray(s, dtype=np.float64))
    rng = np.random.default_rng(seed)
    freqs = rng.uniform(0.0, band, N_MOD_COMPONENTS)
    freqs[0] = band  # pin the band edge so the stated width is reached
    phases = rng.uniform(0.0, 2 * np.pi, N_MOD_COMPONENTS)
    amps = rng.uniform(0.2, 1.0, N_MOD_COMPONENTS)
    amps /= amps.sum()

    def g(s):
        s = np.asarray(s, dtype=np.float64)
        return np.cos(s[..., None] * freqs + phases) @ amps

    return g


def _footprint(u, pos, width, U, periodic):
    diff = u[None, :] - pos[:, None]
    if periodic:
        diff = (diff + U / 2.0) % U - U / 2.0
    return np.exp(-0.5 * (diff / width) ** 2)


def sample_epi(points: Sequence[ScenePoint], rel_views, U: int, periodic: bool = False) -> np.ndarray:
    """Render rows at continuous view offsets ``rel_views`` from the middle view."""
    rel = np.asarray(rel_views, dtype=np.float64)
    u = np.arange(U, dtype=np.float64)
    out = np.zeros((rel.size, U))
    for p in points:
        alpha = _footprint(u, p.u0 - p.d * rel, p.width, U, periodic)
        value = p.intensity * (1.0 + p.mod_depth * band_limited_signal(p.beta_over_Z, p.mod_seed)(rel))
        out = out * (1.0 - alpha) + value[:, None] * alpha
    return np.clip(out, 0.0, 1.0)


def render_epi(points: Sequence[ScenePoint], S: int, U: int, periodic: bool = False) -> Epi:
    if S < 2 or U < 8:
        raise ValueError("render_epi needs S >= 2 and U >= 8")
    rel = np.arange(S) - (S - 1) / 2.0
    return Epi(sample_epi(points, rel, U, periodic), SYNTHETIC)


def render_dense_oracle(points: Sequence[ScenePoint], S_hr: int, U: int, alpha_s: int,
                        periodic: bool = False) -> Tuple[Epi, Epi]:
    """Ground-truth (sparse, dense) pair; disparities are per sparse-view step.

    The dense EPI samples the scene at ``alpha_s`` times the sparse view
    density and the sparse EPI is its every ``alpha_s``-th row.
    """
    if (S_hr - 1) % alpha_s:
        raise ValueError(f"S_hr={S_hr} is not alpha_s * S_lr - (alpha_s - 1) for alpha_s={alpha_s}")
    S_lr = (S_hr - 1) // alpha_s + 1
    rel = np.arange(S_hr) / alpha_s - (S_lr - 1) / 2.0
    hr = Epi(sample_epi(points, rel, U, periodic), SYNTHETIC)
    lr = Epi(hr.samples[::alpha_s].copy(), SYNTHETIC)
    return lr, hr


def render_lf_from_texture(texture_points: Sequence[Tuple[float, float, float]], d: float,
                           views_s: int, views_t: int, width: int, height: int,
                           footprint: float = 1.5) -> LightField4D:
    """Render a fronto-parallel textured plane at disparity ``d`` as a 4D light field.

    ``texture_points`` holds ``(u0, v0, intensity)`` Gaussian blobs at the
    middle view; each view shifts them by ``-d`` per view step along both
    axes.
    """
    u = np.arange(width, dtype=np.float64)
    v = np.arange(height, dtype=np.float64)
    cs, ct = (views_s - 1) / 2.0, (views_t - 1) / 2.0
    out = np.zeros((views_t, views_s, height, width))
    for t in range(views_t):
        for s in range(views_s):
            img = np.zeros((height, width))
            for u0, v0, inten in texture_points:
                pu = u0 - d * (s - cs)
                pv = v0 - d * (t - ct)
                a = np.exp(-0.5 * ((v[:, None] - pv) ** 2 + (u[None, :] - pu) ** 2) / footprint ** 2)
                img = img * (1 - a) + inten * a
            out[t, s] = img
    return LightField4D(np.clip(out, 0, 1))


def dense_light_field_pair(texture_points, d: float, sparse_views: int, alpha_s: int, width: int,
                           height: int, footprint: float = 1.5):
    """(sparse, dense) light fields of a textured plane; ``d`` is per sparse view."""
    dense_views = alpha_s * sparse_views - (alpha_s - 1)
    dense = render_lf_from_texture(texture_points, d / alpha_s, dense_views, dense_views,
                                   width, height, footprint)
    sparse = LightField4D(dense.samples[::alpha_s, ::alpha_s].copy())
    return sparse, dense


def fig2_scene(U: int = 128) -> List[ScenePoint]:
    """Illustrative analysis scene: A, B, C within one pixel of disparity, D larger, B non-Lambertian.

    The numbers are illustrative choices, not measured values.
    """
    return [
        ScenePoint(u0=0.22 * U, d=-0.4, intensity=0.7, width=1.2),
        ScenePoint(u0=0.42 * U, d=0.1, intensity=0.6, width=1.2, beta_over_Z=0.6, mod_depth=0.5, mod_seed=7),
        ScenePoint(u0=0.60 * U, d=0.5, intensity=0.8, width=1.2),
        ScenePoint(u0=0.80 * U, d=2.5, intensity=0.9, width=1.2),
    ]


def textured_segment(u_lo: float, u_hi: float, d: float, rng: np.random.Generator, spacing: float = 3.0,
                     width: float = 1.2, intensity=(0.2, 0.9), beta_over_Z: float = 0.0,
                     mod_depth: float = 0.0) -> List[ScenePoint]:
    """Random blobs covering ``[u_lo, u_hi)`` at the middle view, all at disparity ``d``."""
    n = max(1, int(round((u_hi - u_lo) / spacing)))
    u0 = np.sort(rng.uniform(u_lo, u_hi, n))
    lo, hi = intensity
    if mod_depth > 0:
        hi = min(hi, 1.0 / (1.0 + mod_depth))
        lo = min(lo, hi)
    inten = rng.uniform(lo, hi, n)
    seeds = rng.integers(0, 2 ** 31 - 1, n)
    return [ScenePoint(float(a), float(d), float(b), width, beta_over_Z, mod_depth, int(k))
            for a, b, k in zip(u0, inten, seeds)]


@dataclass
class PseudoEpiSpec:
    """Curved trajectories with flicker, mimicking EPIs from hand-held capture.

    ``knots`` are disparity values at equally spaced view positions; the
    disparity path between them is a cubic spline. ``lines`` are
    ``(u0, intensity)`` pairs positioned at the middle view.
    """

    knots: Sequence[float]
    lines: Sequence[Tuple[float, float]]
    flicker_band: float = 0.0
    flicker_depth: float = 0.0
    width: float = 1.2
    seed: int = 0

    def __post_init__(self):
        if len(self.knots) < 1 or not np.all(np.isfinite(self.knots)):
            raise ValueError("disparity knots must be finite and non-empty")
        if not 0 <= self.flicker_depth < 1:
            raise ValueError("flicker_depth must lie in [0, 1)")
        for _, inten in self.lines:
            if inten * (1 + self.flicker_depth) > 1 + 1e-12:
                raise ValueError("flicker would push a line above 1")

    def disparity_path(self, S: int) -> Callable[[np.ndarray], np.ndarray]:
        k = np.asarray(self.knots, dtype=np.float64)
        if k.size == 1:
            return lambda s: np.full_like(np.asarray(s, dtype=np.float64), k[0])
        return CubicSpline(np.linspace(0, S - 1, k.size), k)

    def offsets(self, S: int) -> np.ndarray:
        """Signed travel ``integral_c^s d(x) dx`` for each integer view ``s``."""
        s = np.arange(S, dtype=np.float64)
        c = (S - 1) / 2.0
        k = np.asarray(self.knots, dtype=np.float64)
        if k.size == 1:
            return k[0] * (s - c)
        prim = CubicSpline(np.linspace(0, S - 1, k.size), k).antiderivative()
        return prim(s) - prim(c)


def render_pseudo_epi(spec: PseudoEpiSpec, S: int, U: int) -> Epi:
    if S < 2 or U < 8:
        raise ValueError("render_pseudo_epi needs S >= 2 and U >= 8")
    travel = spec.offsets(S)
    rel = np.arange(S) - (S - 1) / 2.0
    flick = 1.0 + spec.flicker_depth * band_limited_signal(spec.flicker_band, spec.seed)(rel)
    u = np.arange(U, dtype=np.float64)
    out = np.zeros((S, U))
    for u0, inten in spec.lines:
        alpha = _footprint(u, u0 - travel, spec.width, U, False)
        out = out * (1.0 - alpha) + (inten * flick)[:, None] * alpha
    return Epi(np.clip(out, 0.0, 1.0), PSEUDO)


@dataclass
class TrainingSetConfig:
    count: int = 512
    d_range: Tuple[float, float] = (-3.0, 3.0)
    nonlambertian_fraction: float = 0.0
    beta_over_Z_max: float = 0.6
    phase: str = "regular"
    alpha_s: int = 3
    lr_views: int = 6
    width: int = 72
    spacing: float = 4.0
    line_width: float = 1.5
    seed: int = 0


@dataclass
class TrainingSet:
    inputs: np.ndarray
    labels: np.ndarray
    disparities: np.ndarray
    nonlambertian: np.ndarray
    config: TrainingSetConfig = field(default_factory=TrainingSetConfig)

    def __len__(self):
        return self.inputs.shape[0]


def _stratified(rng, count, lo, hi):
    # one draw per equal-width stratum, shuffled: every histogram bin is hit evenly
    strata = rng.permutation(count)
    return lo + (hi - lo) * (strata + rng.uniform(0, 1, count)) / count


def _training_patch(cfg: TrainingSetConfig, d: float, nonlam: bool, rng: np.random.Generator):
    S_hr = cfg.alpha_s * cfg.lr_views - (cfg.alpha_s - 1)
    reach = abs(d) * (cfg.lr_views - 1) / 2.0 + 3 * cfg.line_width
    if cfg.phase == "pseudo":
        knots = d + rng.uniform(-1.0, 1.0, 3)
        reach = np.max(np.abs(knots)) * (cfg.lr_views - 1) / 2.0 + 3 * cfg.line_width
        n = max(1, int(round((cfg.width + 2 * reach) / cfg.spacing)))
        depth = 0.3 if nonlam else 0.0
        top = min(0.9, 1.0 / (1.0 + depth))
        lines = [(float(a), float(b)) for a, b in
                 zip(rng.uniform(-reach, cfg.width + reach, n), rng.uniform(0.2, top, n))]
        spec = PseudoEpiSpec(knots=list(knots / cfg.alpha_s), lines=lines,
                             flicker_band=float(rng.uniform(0.05, cfg.beta_over_Z_max)) / cfg.alpha_s,
                             flicker_depth=depth, width=cfg.line_width, seed=int(rng.integers(2 ** 31 - 1)))
        hr = render_pseudo_epi(spec, S_hr, cfg.width).samples
        return hr[::cfg.alpha_s].copy(), hr
    if nonlam:
        pts = textured_segment(-reach, cfg.width + reach, d, rng, cfg.spacing, cfg.line_width,
                               beta_over_Z=float(rng.uniform(0.05, cfg.beta_over_Z_max)), mod_depth=0.3)
    else:
        pts = textured_segment(-reach, cfg.width + reach, d, rng, cfg.spacing, cfg.line_width)
    lr, hr = render_dense_oracle(pts, S_hr, cfg.width, cfg.alpha_s)
    return lr.samples, hr.samples


def make_training_set(cfg: TrainingSetConfig) -> TrainingSet:
    """Deterministic (sparse, dense) EPI patch pairs with stratified disparities."""
    if cfg.phase not in ("regular", "pseudo"):
        raise ValueError(f"unknown phase {cfg.phase!r}")
    S_hr = cfg.alpha_s * cfg.lr_views - (cfg.alpha_s - 1)
    master = np.random.default_rng(cfg.seed)
    n = int(cfg.count)
    inputs = np.zeros((n, cfg.lr_views, cfg.width))
    labels = np.zeros((n, S_hr, cfg.width))
    if n == 0:
        return TrainingSet(inputs, labels, np.zeros(0), np.zeros(0, dtype=bool), cfg)
    disp = _stratified(master, n, *cfg.d_range)
    nonlam = master.uniform(0, 1, n) < cfg.nonlambertian_fraction
    children = np.random.SeedSequence(cfg.seed).spawn(n)
    for i in range(n):
        lr, hr = _training_patch(cfg, float(disp[i]), bool(nonlam[i]), np.random.default_rng(children[i]))
        inputs[i], labels[i] = lr, hr
    return TrainingSet(inputs, labels, disp, nonlam, cfg)
