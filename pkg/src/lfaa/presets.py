"""The fixed analysis scene used for spectrum plots and the sigma versus downscale table."""
from __future__ import annotations

from typing import List, Sequence, Tuple

import numpy as np

from .lightfield import Epi
from .spectral import AliasingReport, SpectralSupport, analyze_epi, sigma_alpha_curve
from .synth import ScenePoint, fig2_scene, render_epi

FIG2_WIDTH = 128
FIG2_DENSE_VIEWS = 33
FIG2_STEP = 4
# the reference alias comes from the far point D; B carries the view-dependent band
FIG2_SUPPORT = SpectralSupport(d=2.5, beta=0.6)
CURVE_GAMMAS = (5.0, 10.0, 15.0, 20.0, 25.0)
CURVE_ALPHAS = (1.0, 1.5, 2.0, 3.0, 4.0)


def fig2_points() -> List[ScenePoint]:
    return fig2_scene(FIG2_WIDTH)


def fig2_dense() -> Epi:
    return render_epi(fig2_points(), FIG2_DENSE_VIEWS, FIG2_WIDTH)


def fig2_sparse() -> Epi:
    dense = fig2_dense()
    return dense.with_samples(dense.samples[::FIG2_STEP].copy())


def fig2_report() -> AliasingReport:
    return analyze_epi(fig2_sparse(), FIG2_SUPPORT, FIG2_STEP)


def fig2_curve(gammas: Sequence[float] = CURVE_GAMMAS,
               alphas: Sequence[float] = CURVE_ALPHAS) -> List[Tuple[float, float, float]]:
    return sigma_alpha_curve(fig2_report(), gammas, alphas)


def is_strictly_decreasing(rows, gammas=CURVE_GAMMAS, alphas=CURVE_ALPHAS) -> bool:
    """True when sigma falls along both the gamma and the alpha_u axes of a curve table."""
    table = {(g, a): s for g, a, s in rows}
    grid = np.array([[table[(float(g), float(a))] for a in alphas] for g in gammas])
    return bool(np.all(np.diff(grid, axis=0) < 0) and np.all(np.diff(grid, axis=1) < 0))
