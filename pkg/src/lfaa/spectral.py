"""EPI spectra, replica prediction, reference-alias location and prefilter design.

Frequencies are angular, in radians per pixel (``omega_u``) and per view
step (``omega_s``), each in ``[-pi, pi)``. Spectra follow NumPy's FFT sign
convention, under which a line ``u = u0 - d * s`` concentrates on
``omega_s = d * omega_u``; a non-Lambertian modulation of band ``b``
spreads it to ``omega_s - d * omega_u`` in ``[-b, b]``. Sparse view
sampling every ``step`` views adds replicas offset by ``2 pi k / step``.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Iterable, List, Sequence

import numpy as np

from .lightfield import Epi

NOISE_FLOOR = 0.01
CERTIFICATE_TOL = 1e-3
# amplitudes in reports are measured on 8-bit code values (samples * 255)
AMPLITUDE_SCALE = 255.0


class UnfilterableAliasError(ValueError):
    """The reference alias sits at zero spatial frequency; no spatial prefilter removes it."""


class UndefinedSlopeError(ValueError):
    """The EPI carries no spatial structure from which a slope can be measured."""


def _samples(epi) -> np.ndarray:
    return epi.samples if isinstance(epi, Epi) else np.asarray(epi, dtype=np.float64)


def epi_spectrum(epi) -> np.ndarray:
    """Centered 2D DFT with axes ``(omega_s, omega_u)``."""
    x = _samples(epi)
    if min(x.shape) < 2:
        raise ValueError("spectrum needs an EPI of at least 2 x 2")
    return np.fft.fftshift(np.fft.fft2(x))


def log_magnitude(spectrum: np.ndarray) -> np.ndarray:
    return np.log1p(np.abs(spectrum))


def frequency_axes(S: int, U: int):
    """Centered ``(omega_s, omega_u)`` bin frequencies matching :func:`epi_spectrum`."""
    ws = 2 * np.pi * np.fft.fftshift(np.fft.fftfreq(S))
    wu = 2 * np.pi * np.fft.fftshift(np.fft.fftfreq(U))
    return ws, wu


def wrap_angle(x):
    return (np.asarray(x) + np.pi) % (2 * np.pi) - np.pi


def zero_stuff(epi, step: int) -> np.ndarray:
    """Place the views of a sparse EPI on a grid ``step`` times denser, zeros elsewhere."""
    x = _samples(epi)
    out = np.zeros(((x.shape[0] - 1) * step + 1, x.shape[1]))
    out[::step] = x
    return out


@dataclass(frozen=True)
class SpectralSupport:
    d: float
    beta: float = 0.0
    Z: float = 1.0

    def __post_init__(self):
        if self.beta < 0:
            raise ValueError("beta must be non-negative")
        if self.Z <= 0:
            raise ValueError("Z must be positive")

    @property
    def beta_over_Z(self) -> float:
        return self.beta / self.Z

    @property
    def lambertian(self) -> bool:
        return self.beta == 0


@dataclass(frozen=True)
class Replica:
    k: int
    offset: float
    lo: float
    hi: float


def predict_replicas(support: SpectralSupport, angular_step: int) -> List[Replica]:
    """Replica bands ``omega_s - d omega_u = 2 pi k / step +- beta/Z`` inside the base band.

    Only replicas whose centre line crosses ``|omega_s| <= pi`` at
    ``omega_u = 0`` are listed (``0 < |k| <= step / 2``).
    """
    if angular_step < 1:
        raise ValueError("angular_step must be >= 1")
    b = support.beta_over_Z
    out = []
    for k in range(-(angular_step // 2), angular_step // 2 + 1):
        if k == 0:
            continue
        off = 2 * np.pi * k / angular_step
        out.append(Replica(k, off, off - b, off + b))
    return out


def overlap_limit(beta_over_Z: float) -> float:
    """Largest sparse view step before the widened spectrum meets its replicas."""
    if beta_over_Z <= 0:
        return np.inf
    return np.pi / beta_over_Z + 1


def overlap_detected(beta_over_Z: float, angular_step: float) -> bool:
    return beta_over_Z > 0 and angular_step > overlap_limit(beta_over_Z)


@dataclass(frozen=True)
class AliasingReport:
    omega_u_pa: float
    omega_s_pa: float
    amplitude: float
    replica_index: int
    overlap_detected: bool
    clean: bool = False

    def __post_init__(self):
        if self.amplitude < 0:
            raise ValueError("amplitude must be non-negative")
        if self.replica_index == 0:
            raise ValueError("the reference alias cannot lie on the base spectrum")


def locate_reference_alias(spectrum: np.ndarray, support: SpectralSupport, angular_step: int,
                           floor: float = NOISE_FLOOR) -> AliasingReport:
    """Lowest-|omega_u| point of a first replica that lands on the ``omega_s = 0`` axis.

    ``spectrum`` is the centered DFT of the sparse EPI placed on the dense
    view grid (see :func:`zero_stuff`). Bins count as alias energy when they
    sit on a ``k = +-1`` replica band and exceed ``floor`` times the largest
    non-DC magnitude. With no such bin the report is marked clean, with
    amplitude 0 and the predicted location.
    """
    if angular_step < 2:
        raise ValueError("replicas need an angular step of at least 2")
    S, U = spectrum.shape
    ws, wu = frequency_axes(S, U)
    mag = np.abs(spectrum)
    peak = mag.copy()
    peak[S // 2, U // 2] = 0.0
    thresh = floor * peak.max()

    d, b = support.d, support.beta_over_Z
    row = mag[S // 2]
    # omega_s offset of the support line through each bin of the omega_s = 0 row
    off = -d * wu
    kf = off * angular_step / (2 * np.pi)
    k = np.rint(kf).astype(int)
    kw = (k + angular_step // 2) % angular_step - angular_step // 2
    tol = 0.5 * (abs(d) * (2 * np.pi / U) + 2 * np.pi / S)
    on_band = np.abs(off - 2 * np.pi * k / angular_step) <= b + tol
    mask = on_band & (np.abs(kw) == 1) & (row > thresh)
    overlap = overlap_detected(b, angular_step)

    predicted = np.inf if d == 0 else max(0.0, (2 * np.pi / angular_step - b) / abs(d))
    if not mask.any():
        return AliasingReport(predicted, 0.0, 0.0, 1, overlap, clean=True)
    cand = np.flatnonzero(mask)
    order = np.lexsort((-row[cand], np.abs(wu[cand])))
    j = cand[order[0]]
    return AliasingReport(float(abs(wu[j])), 0.0, float(row[j]), int(kw[j]) or 1, overlap)


def analyze_epi(sparse, support: SpectralSupport, angular_step: int,
                scale: float = AMPLITUDE_SCALE) -> AliasingReport:
    """Aliasing report of a sparse EPI whose views are ``angular_step`` dense views apart.

    ``support.d`` is the disparity per dense view step.
    """
    spec = epi_spectrum(zero_stuff(sparse, angular_step)) * scale
    return locate_reference_alias(spec, support, angular_step)


def gaussian_kernel(sigma: float, half_width: int) -> np.ndarray:
    """Normalised taps ``exp(-u^2 / 2 sigma^2)`` on ``u = -half_width .. half_width``."""
    if sigma < 0 or half_width < 0:
        raise ValueError("sigma and half_width must be non-negative")
    u = np.arange(-half_width, half_width + 1, dtype=np.float64)
    if sigma == 0:
        return (u == 0).astype(np.float64)
    w = np.exp(-(u * u) / (2.0 * sigma * sigma))
    return w / w.sum()


def kernel_response(taps, omega) -> np.ndarray:
    """Real frequency response of a symmetric odd-length kernel."""
    taps = np.asarray(taps, dtype=np.float64)
    h = taps.size // 2
    u = np.arange(-h, h + 1)
    return np.cos(np.multiply.outer(np.asarray(omega, dtype=np.float64), u)) @ taps


def support_half_width(sigma: float) -> int:
    return int(np.ceil(4.0 * sigma))


@dataclass(frozen=True)
class PrefilterSpec:
    sigma: float
    gamma: float
    taps: np.ndarray
    sigma_closed_form: float = 0.0
    omega: float = 0.0

    def __post_init__(self):
        t = np.asarray(self.taps)
        if np.any(t < 0):
            raise ValueError("prefilter taps must be non-negative")
        if abs(t.sum() - 1.0) > 1e-12:
            raise ValueError("prefilter taps must sum to 1")
        if not np.allclose(t, t[::-1], rtol=0, atol=1e-15):
            raise ValueError("prefilter taps must be symmetric")


def prefilter_sigma(amplitude: float, gamma: float, omega_u: float, alpha_u: float = 1.0) -> float:
    """Smallest Gaussian width (in downscaled pixels) that brings ``amplitude`` down to ``gamma``.

    ``omega_u`` is the alias frequency before downscaling; downscaling by
    ``alpha_u`` multiplies it by ``alpha_u``. The Gaussian of width ``sigma``
    has the transfer function ``exp(-2 pi^2 sigma^2 f^2)`` at ``f`` cycles per
    pixel, so ``sigma = sqrt(ln(A / gamma) / (2 pi^2 f^2))`` with
    ``f = alpha_u * omega_u / (2 pi)``.
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    if amplitude < 0:
        raise ValueError("amplitude must be non-negative")
    if alpha_u < 1:
        raise ValueError("alpha_u must be >= 1")
    if amplitude <= gamma:
        return 0.0
    f = alpha_u * omega_u / (2 * np.pi)
    if f == 0:
        raise UnfilterableAliasError("reference alias at zero spatial frequency")
    return float(np.sqrt(np.log(amplitude / gamma) / (2 * np.pi ** 2 * f * f)))


def _taps(sigma):
    return gaussian_kernel(sigma, support_half_width(sigma))


def design_prefilter(report: AliasingReport, gamma: float, alpha_u: float = 1.0) -> PrefilterSpec:
    """Gaussian prefilter meeting ``amplitude * H(omega) <= gamma`` at the reference alias.

    The closed-form width assumes a continuous Gaussian. Sampled taps pass
    more energy near Nyquist, so when the sampled response misses the bound
    the width is widened by bisection until it holds. An alias that ends up
    beyond the Nyquist frequency of the downscaled grid is already removed by
    the downscaling and keeps the closed-form width.
    """
    sigma_c = prefilter_sigma(report.amplitude, gamma, report.omega_u_pa, alpha_u)
    omega = alpha_u * report.omega_u_pa
    if sigma_c == 0:
        return PrefilterSpec(0.0, gamma, np.ones(1), 0.0, omega)
    bound = gamma / report.amplitude
    if omega > np.pi:
        return PrefilterSpec(sigma_c, gamma, _taps(sigma_c), sigma_c, omega)

    def resp(s):
        return float(kernel_response(_taps(s), omega))

    if resp(sigma_c) <= bound:
        return PrefilterSpec(sigma_c, gamma, _taps(sigma_c), sigma_c, omega)
    lo, hi = sigma_c, 2 * sigma_c
    while resp(hi) > bound:
        lo, hi = hi, 2 * hi
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if resp(mid) > bound:
            lo = mid
        else:
            hi = mid
    return PrefilterSpec(hi, gamma, _taps(hi), sigma_c, omega)


def sigma_alpha_curve(report: AliasingReport, gammas: Sequence[float], alpha_us: Sequence[float]):
    """Closed-form prefilter widths as rows ``(gamma, alpha_u, sigma)``."""
    rows = []
    for g in gammas:
        for a in alpha_us:
            rows.append((float(g), float(a), prefilter_sigma(report.amplitude, g, report.omega_u_pa, a)))
    return rows


def curve_csv(rows: Iterable) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["gamma", "alpha_u", "sigma"])
    for g, a, s in rows:
        w.writerow([repr(float(g)), repr(float(a)), repr(float(s))])
    return buf.getvalue()


def report_csv(report: AliasingReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    fields = ["omega_u_pa", "omega_s_pa", "amplitude", "replica_index", "overlap_detected", "clean"]
    w.writerow(fields)
    w.writerow([repr(getattr(report, f)) if isinstance(getattr(report, f), float) else getattr(report, f)
                for f in fields])
    return buf.getvalue()


def slope_energy(epi, candidates) -> np.ndarray:
    """Non-DC spectral energy on the line ``omega_s = d omega_u`` for each candidate ``d``.

    Evaluated exactly off the bin grid: the row spectra are phase-aligned
    for slope ``d`` and summed over views, which samples the 2D spectrum
    along that line.
    """
    x = _samples(epi)
    S, U = x.shape
    X = np.fft.rfft(x, axis=1)[:, 1:]
    w = 2 * np.pi * np.arange(1, X.shape[1] + 1) / U
    rel = np.arange(S) - (S - 1) / 2.0
    d = np.asarray(candidates, dtype=np.float64)
    energy = np.empty(d.size)
    for i in range(0, d.size, 64):
        dd = d[i:i + 64]
        phase = np.exp(-1j * dd[:, None, None] * rel[None, :, None] * w[None, None, :])
        energy[i:i + 64] = (np.abs((phase * X[None]).sum(axis=1)) ** 2).sum(axis=1)
    return energy


def estimate_dominant_disparity(epi, d_max: float = 20.0, step: float = 0.1) -> float:
    """Slope with the most spectral line energy, refined by a parabola through the peak.

    Ties go to the smaller ``|d|``.
    """
    x = _samples(epi)
    if x.shape[0] < 4:
        raise ValueError("slope estimation needs at least 4 views")
    x = x - x.mean(axis=1, keepdims=True)
    if np.sum(x * x) < 1e-20:
        raise UndefinedSlopeError("EPI has no spatial structure")
    n = int(round(d_max / step))
    cand = np.arange(-n, n + 1) * step
    e = slope_energy(x, cand)
    top = e.max()
    if top <= 0:
        raise UndefinedSlopeError("EPI has no spatial structure")
    ties = np.flatnonzero(e >= top * (1 - 1e-9))
    i = int(ties[np.argmin(np.abs(cand[ties]))])
    if 0 < i < cand.size - 1:
        y0, y1, y2 = e[i - 1], e[i], e[i + 1]
        den = y0 - 2 * y1 + y2
        if den < 0:
            return float(cand[i] + step * 0.5 * (y0 - y2) / den)
    return float(cand[i])
