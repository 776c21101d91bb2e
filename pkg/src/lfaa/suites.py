"""Fixed synthetic evaluation suites with dense ground truth.

The EPI suites hold textured planes at one disparity each; the piecewise
scenes split the width into regions of different disparity. All draws are
seeded so every run sees the same data.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from .lightfield import Epi, LightField4D
from .metrics import psnr
from .synth import dense_light_field_pair, render_dense_oracle, textured_segment

SUITE_VIEWS = 5
SUITE_WIDTH = 128
SUITE_FOOTPRINT = 2.0
SUITE_SPACING = 4.0
LAMBERTIAN_DISPARITIES = tuple(float(d) for d in range(-7, 8))


@dataclass
class EpiCase:
    name: str
    d: float
    sparse: Epi
    dense: Epi
    alpha_s: int
    margin: int


def _case(name, d, pts, S_lr, U, alpha_s):
    S_hr = alpha_s * S_lr - (alpha_s - 1)
    lr, hr = render_dense_oracle(pts, S_hr, U, alpha_s)
    # columns whose scene content may enter or leave the frame between views are not scored
    margin = int(np.ceil(abs(d) * (S_lr - 1) / 2.0)) + 8
    return EpiCase(name, float(d), lr, hr, alpha_s, margin)


def lambertian_suite(alpha_s: int = 4, disparities: Sequence[float] = LAMBERTIAN_DISPARITIES,
                     views: int = SUITE_VIEWS, width: int = SUITE_WIDTH, seed: int = 100) -> List[EpiCase]:
    cases = []
    for d in disparities:
        rng = np.random.default_rng(seed + int(round(d * 10)))
        reach = abs(d) * (views - 1) / 2 + 3 * SUITE_FOOTPRINT
        pts = textured_segment(-reach, width + reach, d, rng, SUITE_SPACING, SUITE_FOOTPRINT)
        cases.append(_case(f"lambertian_d{d:+g}", d, pts, views, width, alpha_s))
    return cases


def nonlambertian_suite(alpha_s: int = 4, beta_over_Z: Sequence[float] = (0.3, 0.6, 0.9),
                        disparities: Sequence[float] = (-6.0, -3.0, -1.0, 0.0, 2.0, 4.0, 7.0),
                        mod_depth: float = 0.5, views: int = SUITE_VIEWS, width: int = SUITE_WIDTH,
                        seed: int = 200) -> List[EpiCase]:
    """Planes with view-dependent modulation of band ``beta_over_Z`` radians per sparse view."""
    cases = []
    for b in beta_over_Z:
        for d in disparities:
            rng = np.random.default_rng(seed + int(round(d * 10)) + int(round(b * 1000)))
            reach = abs(d) * (views - 1) / 2 + 3 * SUITE_FOOTPRINT
            pts = textured_segment(-reach, width + reach, d, rng, SUITE_SPACING, SUITE_FOOTPRINT,
                                   beta_over_Z=b, mod_depth=mod_depth)
            cases.append(_case(f"nonlambertian_b{b:g}_d{d:+g}", d, pts, views, width, alpha_s))
    return cases


@dataclass
class PiecewiseScene:
    sparse: Epi
    dense: Epi
    disparities: Tuple[float, ...]
    edges: np.ndarray

    def region_patches(self, starts: Sequence[int], patch: int, views: int):
        """``(patch index, disparity)`` for patches whose footprint stays inside one region."""
        out = []
        for i, s in enumerate(starts):
            for k, d in enumerate(self.disparities):
                m = int(np.ceil(abs(d) * (views - 1) / 2.0))
                if s >= self.edges[k] + m and s + patch <= self.edges[k + 1] - m:
                    out.append((i, d))
        return out


def piecewise_scene(disparities: Sequence[float], alpha_s: int = 4, views: int = SUITE_VIEWS,
                    width: int = 192, seed: int = 0) -> PiecewiseScene:
    rng = np.random.default_rng(seed)
    edges = np.linspace(0, width, len(disparities) + 1)
    pts = []
    for k, d in enumerate(disparities):
        pts += textured_segment(edges[k], edges[k + 1], d, rng, SUITE_SPACING, SUITE_FOOTPRINT)
    lr, hr = render_dense_oracle(pts, alpha_s * views - (alpha_s - 1), width, alpha_s)
    return PiecewiseScene(lr, hr, tuple(float(d) for d in disparities), edges)


def synthesized_rows(n_dense: int, alpha_s: int) -> np.ndarray:
    keep = np.ones(n_dense, dtype=bool)
    keep[::alpha_s] = False
    return keep


def textured_light_field(d: float, sparse_views: int = 3, alpha_s: int = 3, size: int = 48,
                         seed: int = 0, density: float = 0.06,
                         footprint: float = SUITE_FOOTPRINT) -> Tuple[LightField4D, LightField4D]:
    """(sparse, dense) light fields of a blob-textured plane at disparity ``d`` per sparse view."""
    rng = np.random.default_rng(seed)
    reach = abs(d) * (sparse_views - 1) / 2 + 3 * footprint
    n = int(density * (size + 2 * reach) ** 2)
    pts = [(float(u), float(v), float(i)) for u, v, i in
           zip(rng.uniform(-reach, size + reach, n), rng.uniform(-reach, size + reach, n),
               rng.uniform(0.2, 0.9, n))]
    return dense_light_field_pair(pts, d, sparse_views, alpha_s, size, size, footprint)


def interior_psnr(pred: np.ndarray, truth: np.ndarray, alpha_s: int, margin: int) -> float:
    """PSNR over synthesized rows and columns at least ``margin`` from either edge."""
    rows = synthesized_rows(truth.shape[0], alpha_s)
    U = truth.shape[1]
    return psnr(pred[rows][:, margin:U - margin], truth[rows][:, margin:U - margin])
