"""Classical anti-aliased EPI reconstruction with multiple shear candidates.

Each candidate shears the sparse EPI, splits it into a Laplacian pyramid,
prefilters the levels against the predicted reference alias, upsamples every
level along the view axis with cubic convolution, collapses the pyramid and
shears back. Candidates are fused patch by patch along ``u``, choosing the
one that best explains the input views and is smoothest along its own
sheared view axis.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .lightfield import Epi, upsampled_count
from .pyramid import (PyramidLevels, angular_upsample, downsample_angular_nearest, filter_spatial,
                      laplacian_decompose, laplacian_reconstruct)
from .shear import interior_band, shear_tensor, unshear_for_upsampled
from .spectral import (PrefilterSpec, SpectralSupport, UndefinedSlopeError, UnfilterableAliasError,
                       analyze_epi, design_prefilter, estimate_dominant_disparity, gaussian_kernel,
                       support_half_width)

FUSIONS = ("select_best_patch", "global_best")
SIGMA_CAP = 4.0
EDGE_PAD = 2


@dataclass
class ReconConfig:
    shears: Sequence[float] = (-9.0, -6.0, -3.0, 0.0, 3.0, 6.0, 9.0)
    alpha_s: int = 4
    gamma: float = 10.0
    factors: Sequence[int] = (4, 2, 1)
    fusion: str = "select_best_patch"
    patch: int = 16
    overlap: int = 8
    smooth_weight: float = 0.1
    prefilter: bool = True
    threads: int = 1

    def __post_init__(self):
        self.shears = tuple(float(a) for a in self.shears)
        if not self.shears:
            raise ValueError("at least one shear is required")
        if list(self.shears) != sorted(self.shears):
            raise ValueError("shears must be sorted")
        if int(self.alpha_s) != self.alpha_s or self.alpha_s < 2:
            raise ValueError(f"alpha_s must be an integer >= 2, got {self.alpha_s}")
        self.alpha_s = int(self.alpha_s)
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if self.fusion not in FUSIONS:
            raise ValueError(f"unknown fusion {self.fusion!r}; choose from {FUSIONS}")
        if self.patch < 2 or not 0 <= self.overlap < self.patch:
            raise ValueError("need patch >= 2 and 0 <= overlap < patch")
        self.factors = tuple(int(f) for f in self.factors)


@dataclass
class Candidate:
    alpha_h: float
    samples: np.ndarray
    framed: np.ndarray
    prefilter: Optional[PrefilterSpec] = None
    warnings: List[str] = field(default_factory=list)


def _residual_disparity(sheared: np.ndarray, cfg: ReconConfig, alpha_h: float) -> Optional[float]:
    """Disparity left after shearing, per sparse view; ``None`` skips the prefilter.

    With several shears each candidate only has to serve content within half
    the shear spacing of its own shear. A lone shear has to serve whatever
    dominates the EPI, which is measured.
    """
    if len(cfg.shears) > 1:
        return 0.5 * float(min(np.diff(cfg.shears)))
    S, U = sheared.shape
    if S < 4:
        return None
    m = int(np.ceil(abs(alpha_h) * (S - 1) / 2.0))
    core = sheared[:, m:U - m] if U - 2 * m >= 8 else sheared
    try:
        return estimate_dominant_disparity(core)
    except UndefinedSlopeError:
        return None


def _design(sheared, cfg, alpha_h, warnings) -> Optional[PrefilterSpec]:
    d_lr = _residual_disparity(sheared, cfg, alpha_h)
    if d_lr is None:
        return None
    # the report lives on the dense view grid, where disparities shrink by alpha_s
    report = analyze_epi(sheared, SpectralSupport(d_lr / cfg.alpha_s), cfg.alpha_s)
    if report.overlap_detected:
        warnings.append("spectral replicas overlap the base band")
    if report.clean:
        return None
    try:
        return design_prefilter(report, cfg.gamma, cfg.factors[0])
    except UnfilterableAliasError:
        warnings.append("reference alias at zero spatial frequency; prefilter width capped")
        return PrefilterSpec(SIGMA_CAP, cfg.gamma, gaussian_kernel(SIGMA_CAP, support_half_width(SIGMA_CAP)),
                             SIGMA_CAP, 0.0)


def _prefilter_levels(p: PyramidLevels, spec: PrefilterSpec) -> PyramidLevels:
    coarse = p.factors[0]
    base = filter_spatial(p.base, spec.taps)
    residuals = []
    for f, r in zip(p.factors[1:], p.residuals):
        s = spec.sigma * coarse / f
        residuals.append(filter_spatial(r, gaussian_kernel(s, support_half_width(s))))
    return PyramidLevels(p.factors, base, residuals)


def _upsample_levels(p: PyramidLevels, alpha_s: int) -> PyramidLevels:
    return PyramidLevels(p.factors, angular_upsample(p.base, alpha_s),
                         [angular_upsample(r, alpha_s) for r in p.residuals])


def reconstruct_candidate(epi: Epi, alpha_h: float, cfg: ReconConfig) -> Candidate:
    """One shear candidate before input views are restored."""
    x = epi.samples
    if x.shape[0] < 2:
        raise ValueError("reconstruction needs at least 2 views")
    warnings: List[str] = []
    sheared = shear_tensor(x, alpha_h)
    factors = cfg.factors
    while factors[0] > 1 and x.shape[1] < 2 * factors[0]:
        factors = factors[1:]
    pyr = laplacian_decompose(sheared, factors)
    spec = _design(sheared, cfg, alpha_h, warnings) if cfg.prefilter else None
    if spec is not None and spec.sigma > 0:
        pyr = _prefilter_levels(pyr, spec)
    dense = laplacian_reconstruct(_upsample_levels(pyr, cfg.alpha_s))
    out = unshear_for_upsampled(dense, alpha_h, cfg.alpha_s)
    return Candidate(float(alpha_h), out, dense, spec, warnings)


def restore_inputs(dense: np.ndarray, sparse: np.ndarray, alpha_s: int) -> np.ndarray:
    out = dense.copy()
    out[::alpha_s] = sparse
    return out


def reconstruct_single_shear(epi: Epi, alpha_h: float, cfg: ReconConfig) -> Epi:
    cand = reconstruct_candidate(epi, alpha_h, cfg)
    return epi.with_samples(restore_inputs(cand.samples, epi.samples, cfg.alpha_s))


def patch_starts(U: int, patch: int, overlap: int) -> List[int]:
    if U <= patch:
        return [0]
    stride = patch - overlap
    starts = list(range(0, U - patch + 1, stride))
    if starts[-1] != U - patch:
        starts.append(U - patch)
    return starts


def consistency_error(candidate, sparse, alpha_s: int, patch: int = 16, overlap: int = 8,
                      smooth_weight: float = 0.1, framed=None, valid=None) -> np.ndarray:
    """Per-patch error: mean L1 misfit at the input views plus a weighted smoothness term.

    The smoothness term is the mean absolute second difference along the
    view axis. When ``framed`` is given (the candidate in its own sheared
    frame, before shearing back) it is measured there: content the shear
    made vertical is smooth, while content left slanted ghosts between the
    interpolated views. ``valid`` is an optional column mask; a patch is
    scored on its valid columns when it has any, on all columns otherwise.
    """
    cand = candidate.samples if isinstance(candidate, Epi) else np.asarray(candidate, dtype=np.float64)
    sp = sparse.samples if isinstance(sparse, Epi) else np.asarray(sparse, dtype=np.float64)
    if cand.shape != (upsampled_count(sp.shape[0], alpha_s), sp.shape[1]):
        raise ValueError(f"candidate shape {cand.shape} inconsistent with {sp.shape} at alpha_s={alpha_s}")
    data = np.abs(downsample_angular_nearest(cand, alpha_s, 0) - sp).mean(axis=0)
    framed = cand if framed is None else np.asarray(framed, dtype=np.float64)
    if framed.shape != cand.shape:
        raise ValueError("framed candidate must match the candidate shape")
    if framed.shape[0] >= 3:
        smooth = np.abs(np.diff(framed, n=2, axis=0)).mean(axis=0)
    else:
        smooth = np.zeros(cand.shape[1])
    col = data + smooth_weight * smooth
    ok = np.ones(col.size, dtype=bool) if valid is None else np.asarray(valid, dtype=bool)
    if ok.shape != col.shape:
        raise ValueError("valid mask must have one entry per column")
    out = []
    for s in patch_starts(sp.shape[1], patch, overlap):
        c, m = col[s:s + patch], ok[s:s + patch]
        out.append(c[m].mean() if m.any() else c.mean())
    return np.array(out)


def valid_columns(U: int, S: int, alpha_h: float, pad: int) -> np.ndarray:
    """Columns of a candidate that zero fill from the shear cannot reach."""
    band = interior_band(U, S, alpha_h)
    mask = np.zeros(U, dtype=bool)
    mask[band.start + pad:band.stop - pad] = True
    return mask


def _blend_weights(U: int, patch: int, overlap: int) -> np.ndarray:
    starts = patch_starts(U, patch, overlap)
    w = np.zeros((len(starts), U))
    for i, s in enumerate(starts):
        n = min(patch, U - s)
        ramp = np.ones(n)
        if overlap > 0:
            r = (np.arange(overlap) + 0.5) / overlap
            if i > 0:
                ramp[:overlap] = np.minimum(ramp[:overlap], r)
            if i < len(starts) - 1:
                ramp[n - overlap:] = np.minimum(ramp[n - overlap:], r[::-1])
        w[i, s:s + n] = ramp
    return w / w.sum(axis=0, keepdims=True)


@dataclass
class FusionResult:
    epi: Epi
    shears: Tuple[float, ...]
    errors: np.ndarray
    selection: np.ndarray
    warnings: List[str]

    @property
    def selected_shears(self) -> np.ndarray:
        return np.asarray(self.shears)[self.selection]


def _tie_order(shears):
    # preference rank: smaller |alpha_h| first, then the smaller value
    return np.lexsort((np.asarray(shears), np.abs(shears)))


def reconstruct_multi_detailed(epi: Epi, cfg: ReconConfig) -> FusionResult:
    shears = cfg.shears
    if cfg.threads > 1 and len(shears) > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            cands = list(pool.map(lambda a: reconstruct_candidate(epi, a, cfg), shears))
    else:
        cands = [reconstruct_candidate(epi, a, cfg) for a in shears]
    # the zero fill of the largest shear bounds where every candidate is trustworthy
    mask = valid_columns(epi.spatial, epi.angular, max(abs(a) for a in shears), EDGE_PAD)
    errors = np.stack([consistency_error(c.samples, epi.samples, cfg.alpha_s, cfg.patch, cfg.overlap,
                                         cfg.smooth_weight, c.framed, mask) for c in cands])
    order = _tie_order(shears)
    if cfg.fusion == "global_best":
        # patches without a valid column only see zero fill; keep them out of the totals
        starts = patch_starts(epi.spatial, cfg.patch, cfg.overlap)
        scored = np.array([mask[s:s + cfg.patch].any() for s in starts])
        if not scored.any():
            scored[:] = True
        totals = errors[:, scored].sum(axis=1)
        best = order[np.argmin(totals[order])]
        selection = np.full(errors.shape[1], best)
    else:
        selection = order[np.argmin(errors[order], axis=0)]
    if np.all(selection == selection[0]):
        fused = cands[selection[0]].samples.copy()
    else:
        w = _blend_weights(epi.spatial, cfg.patch, cfg.overlap)
        fused = np.zeros_like(cands[0].samples)
        for i, k in enumerate(selection):
            fused += w[i] * cands[k].samples
    fused = restore_inputs(fused, epi.samples, cfg.alpha_s)
    warnings = sorted({f"alpha_h={c.alpha_h:g}: {m}" for c in cands for m in c.warnings})
    return FusionResult(epi.with_samples(fused), tuple(shears), errors, selection, warnings)


def reconstruct_multi(epi: Epi, cfg: ReconConfig) -> Epi:
    return reconstruct_multi_detailed(epi, cfg).epi
