"""Image quality metrics: PSNR with a cap for identical images, and single-scale SSIM."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np
from scipy.ndimage import correlate1d

PSNR_CAP = 99.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5


def psnr(a, b, peak: float = 1.0) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0:
        return PSNR_CAP
    return min(PSNR_CAP, 10.0 * np.log10(peak * peak / mse))


def _gauss_window():
    x = np.arange(SSIM_WINDOW) - SSIM_WINDOW // 2
    w = np.exp(-0.5 * (x / SSIM_SIGMA) ** 2)
    return w / w.sum()


def _blur(x, w):
    # valid-region separable filtering: every window lies inside the image
    h = w.size // 2
    y = correlate1d(correlate1d(x, w, axis=0, mode="constant"), w, axis=1, mode="constant")
    return y[h:x.shape[0] - h, h:x.shape[1] - h]


def ssim(a, b, peak: float = 1.0) -> float:
    """Mean SSIM over all 11 x 11 Gaussian windows that fit inside the image."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    if a.ndim != 2 or min(a.shape) < SSIM_WINDOW:
        raise ValueError(f"SSIM needs 2D images of at least {SSIM_WINDOW}x{SSIM_WINDOW}")
    c1 = (0.01 * peak) ** 2
    c2 = (0.03 * peak) ** 2
    w = _gauss_window()
    mu_a, mu_b = _blur(a, w), _blur(b, w)
    saa = _blur(a * a, w) - mu_a ** 2
    sbb = _blur(b * b, w) - mu_b ** 2
    sab = _blur(a * b, w) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * sab + c2)
    den = (mu_a ** 2 + mu_b ** 2 + c1) * (saa + sbb + c2)
    return float(np.clip(np.mean(num / den), -1.0, 1.0))


@dataclass
class MetricReport:
    psnr: List[float]
    ssim: List[float]
    views_excluded: List[int] = field(default_factory=list)
    runtime_ms: float = 0.0

    @property
    def psnr_mean(self) -> float:
        return float(np.mean(self.psnr)) if self.psnr else float("nan")

    @property
    def ssim_mean(self) -> float:
        return float(np.mean(self.ssim)) if self.ssim else float("nan")


def score_views(pred: Sequence[np.ndarray], truth: Sequence[np.ndarray], excluded: Sequence[int] = (),
                with_ssim: bool = True) -> MetricReport:
    """Per-view metrics, skipping the view indices in ``excluded``."""
    if len(pred) != len(truth):
        raise ValueError("prediction and ground truth hold different numbers of views")
    skip = set(int(i) for i in excluded)
    ps, ss = [], []
    for i, (p, t) in enumerate(zip(pred, truth)):
        if i in skip:
            continue
        ps.append(psnr(p, t))
        if with_ssim:
            ss.append(ssim(p, t))
    return MetricReport(ps, ss, sorted(skip))
