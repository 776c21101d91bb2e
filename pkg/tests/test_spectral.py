import csv
import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lfaa.lightfield import Epi
from lfaa.presets import CURVE_ALPHAS, CURVE_GAMMAS, fig2_curve, fig2_report, is_strictly_decreasing
from lfaa.spectral import (AliasingReport, PrefilterSpec, SpectralSupport, UndefinedSlopeError,
                           UnfilterableAliasError, analyze_epi, curve_csv, design_prefilter, epi_spectrum,
                           estimate_dominant_disparity, frequency_axes, gaussian_kernel, kernel_response,
                           overlap_detected, overlap_limit, predict_replicas, prefilter_sigma, report_csv,
                           sigma_alpha_curve, slope_energy, zero_stuff)
from lfaa.synth import ScenePoint, render_epi

from helpers import unit_sinusoid_gain

DATA = Path(__file__).parent / "data"

# frozen values from tests/data/generate_oracles.py
SIGMA_SPOT_ALPHA1 = 0.5710869536010715
SIGMA_SPOT_ALPHA2 = 0.28554347680053577
GAUSS_S1_HW3 = [0.004433048175243746, 0.054005582622414484, 0.24203622937611433, 0.3990502796524549,
                0.24203622937611433, 0.054005582622414484, 0.004433048175243746]
SLOPE_D5 = 5.0
ALIAS_D4_STEP4 = 0.39269908169872414
HALF_CYCLE = np.pi  # 0.5 cycles per pixel in radians


def periodic_line(d, S=16, U=64, u0=32.0):
    return render_epi([ScenePoint(u0, d, 0.8, 1.2)], S, U, periodic=True)


# spectrum


def test_constant_epi_all_energy_at_dc():
    spec = epi_spectrum(np.full((6, 16), 0.3))
    mag = np.abs(spec)
    assert mag[3, 8] == pytest.approx(0.3 * 96)
    mag[3, 8] = 0
    assert mag.max() < 1e-12


def test_sinusoid_gives_conjugate_peaks():
    S, U, ks, ku = 8, 32, 2, 5
    s, u = np.meshgrid(np.arange(S), np.arange(U), indexing="ij")
    mag = np.abs(epi_spectrum(np.cos(2 * np.pi * (ks * s / S + ku * u / U))))
    peaks = {tuple(p) for p in np.argwhere(mag > 1e-6 * mag.max())}
    assert peaks == {(S // 2 + ks, U // 2 + ku), (S // 2 - ks, U // 2 - ku)}


@given(st.integers(0, 10_000))
def test_parseval(seed):
    x = np.random.default_rng(seed).standard_normal((7, 24))
    energy = np.sum(np.abs(epi_spectrum(x)) ** 2) / x.size
    assert energy == pytest.approx(np.sum(x * x), rel=1e-9)


def test_spectrum_needs_2x2():
    with pytest.raises(ValueError):
        epi_spectrum(np.zeros((1, 8)))


@pytest.mark.parametrize("d", [-3.0, -1.0, 0.0, 2.0, 4.0, 7.0])
def test_line_energy_concentrates_on_support_line(d):
    # square and periodic on both axes, so integer slopes fall on DFT bins without leakage
    S = U = 32
    spec = epi_spectrum(render_epi([ScenePoint(16.0, d, 0.8, 1.2)], S, U, periodic=True))
    spec[S // 2, U // 2] = 0
    power = np.abs(spec) ** 2
    ws, wu = frequency_axes(S, U)
    W_s, W_u = np.meshgrid(ws, wu, indexing="ij")
    # distance along omega_s to the line omega_s = d omega_u, wrapped, within one bin
    gap = np.abs((W_s - d * W_u + np.pi) % (2 * np.pi) - np.pi)
    near = gap <= 2 * np.pi / S + 1e-12
    assert power[near].sum() / power.sum() >= 0.9


# replicas and aliasing


def test_no_replicas_at_step_one():
    assert predict_replicas(SpectralSupport(2.0), 1) == []


def test_step_two_replica_at_pi():
    reps = predict_replicas(SpectralSupport(2.0), 2)
    assert [r.k for r in reps] == [-1, 1]
    assert {abs(r.offset) for r in reps} == {np.pi}


def test_replica_band_edges():
    reps = {r.k: r for r in predict_replicas(SpectralSupport(1.0, beta=0.3), 4)}
    assert sorted(reps) == [-2, -1, 1, 2]
    for k, r in reps.items():
        assert r.lo == pytest.approx(2 * np.pi * k / 4 - 0.3)
        assert r.hi == pytest.approx(2 * np.pi * k / 4 + 0.3)


def test_replica_peaks_appear_in_zero_stuffed_spectrum():
    # a sparse line on a 4x denser view grid repeats along omega_s in steps of 2 pi / 4
    d, step = 1.0, 4
    dense = periodic_line(d, 33, 64)
    stuffed = zero_stuff(dense.samples[::step], step)
    S, U = stuffed.shape
    mag = np.abs(epi_spectrum(stuffed))
    ws, wu = frequency_axes(S, U)
    j = U // 2 + 4
    for r in predict_replicas(SpectralSupport(d), step):
        target = (d * wu[j] + r.offset + np.pi) % (2 * np.pi) - np.pi
        i = int(np.argmin(np.abs(ws - target)))
        assert mag[i, j] >= 0.5 * mag[:, j].max()


def test_reference_alias_d4_step4():
    sparse = periodic_line(4.0).samples[::4]
    rep = analyze_epi(Epi(sparse), SpectralSupport(4.0), 4)
    assert not rep.clean
    assert abs(rep.replica_index) == 1
    assert rep.omega_u_pa == pytest.approx(ALIAS_D4_STEP4, abs=1e-12)


def test_clean_when_no_alias():
    # a very wide footprint has no energy out at the replica
    points = [ScenePoint(32.0, 0.5, 0.8, 8.0)]
    sparse = render_epi(points, 17, 64, periodic=True).samples[::2]
    rep = analyze_epi(Epi(sparse), SpectralSupport(0.5), 2)
    assert rep.clean
    assert rep.amplitude == 0.0


def test_fig2_report():
    rep = fig2_report()
    assert rep.omega_u_pa == pytest.approx(0.34361, abs=1e-5)
    assert rep.amplitude == pytest.approx(1968.34, abs=0.01)
    assert rep.replica_index == 1
    assert not rep.overlap_detected
    assert report_csv(rep).splitlines()[0] == "omega_u_pa,omega_s_pa,amplitude,replica_index,overlap_detected,clean"


def test_report_rejects_base_band():
    with pytest.raises(ValueError):
        AliasingReport(0.3, 0.0, 1.0, 0, False)


@pytest.mark.parametrize("bz", [0.1, 0.3, 0.5, 1.0, 2.0])
@pytest.mark.parametrize("delta", [-1.0, -0.25, 0.25, 1.0, 5.0])
def test_overlap_limit_grid(bz, delta):
    step = np.pi / bz + 1 + delta
    assert overlap_detected(bz, step) == (delta > 0)


def test_lambertian_never_overlaps():
    assert overlap_limit(0.0) == np.inf
    assert not overlap_detected(0.0, 1e6)


# gaussian kernel and prefilter


def test_gaussian_oracle():
    np.testing.assert_allclose(gaussian_kernel(1.0, 3), GAUSS_S1_HW3, rtol=0, atol=1e-15)


def test_gaussian_sigma_zero_is_delta():
    np.testing.assert_array_equal(gaussian_kernel(0.0, 2), [0, 0, 1, 0, 0])


def test_gaussian_flat_limit():
    np.testing.assert_allclose(gaussian_kernel(1e6, 4), 1 / 9, atol=1e-12)


@pytest.mark.parametrize("sigma", [0.5, 0.8, 1.0, 2.3, 5.0, 12.0])
def test_gaussian_response_real_even_monotone(sigma):
    taps = gaussian_kernel(sigma, int(math.ceil(4 * sigma)))
    w = np.linspace(0, np.pi, 1024)
    h = kernel_response(taps, w)
    np.testing.assert_allclose(kernel_response(taps, -w), h)
    # truncation at 4 sigma leaves ripple of a few 1e-6 on the tail
    assert np.all(np.diff(h) <= 1e-5)
    u = np.arange(-(taps.size // 2), taps.size // 2 + 1)
    assert np.max(np.abs(np.sum(taps * np.sin(np.outer(w, u)), axis=1))) < 1e-12


def test_sigma_spot_checks():
    assert prefilter_sigma(25, 5, HALF_CYCLE, 1) == pytest.approx(SIGMA_SPOT_ALPHA1, rel=1e-12)
    assert prefilter_sigma(25, 5, HALF_CYCLE, 2) == pytest.approx(SIGMA_SPOT_ALPHA2, rel=1e-12)


def test_spot_check_attenuation_by_filtering():
    rep = AliasingReport(HALF_CYCLE / 2, 0.0, 25.0, 1, False)
    spec = design_prefilter(rep, 5.0, alpha_u=2.0)
    assert unit_sinusoid_gain(spec.taps, spec.omega) <= (5 / 25) * (1 + 1e-3)


def test_amplitude_below_gamma_gives_identity():
    assert prefilter_sigma(4, 5, 1.0) == 0.0
    spec = design_prefilter(AliasingReport(0.4, 0.0, 4.0, 1, False), 5.0)
    np.testing.assert_array_equal(spec.taps, [1.0])


def test_alias_at_dc_is_unfilterable():
    with pytest.raises(UnfilterableAliasError):
        prefilter_sigma(25, 5, 0.0)


@pytest.mark.parametrize("args", [(25, 0, 1.0), (-1, 5, 1.0), (25, 5, 1.0, 0.5)])
def test_prefilter_sigma_argument_errors(args):
    with pytest.raises(ValueError):
        prefilter_sigma(*args)


@given(st.floats(10, 5000), st.floats(1, 9), st.floats(0.05, 1.0), st.sampled_from([1.0, 1.5, 2.0, 3.0, 4.0]))
def test_certificate(amplitude, gamma_frac, omega_frac, alpha_u):
    gamma = gamma_frac * amplitude / 10
    omega = omega_frac * np.pi / alpha_u
    spec = design_prefilter(AliasingReport(omega, 0.0, amplitude, 1, False), gamma, alpha_u)
    assert unit_sinusoid_gain(spec.taps, spec.omega) <= gamma / amplitude * (1 + 1e-3)


@given(st.floats(10, 5000), st.floats(0.05, 3.0), st.sampled_from([1.5, 2.0, 3.0, 4.0]))
def test_sigma_scales_inverse_with_alpha(amplitude, omega, alpha_u):
    rep = AliasingReport(omega, 0.0, amplitude, 1, False)
    one = design_prefilter(rep, 5.0, 1.0).sigma_closed_form
    scaled = design_prefilter(rep, 5.0, alpha_u).sigma_closed_form
    assert scaled * alpha_u == pytest.approx(one, rel=1e-12)


def test_prefilter_spec_validates_taps():
    with pytest.raises(ValueError):
        PrefilterSpec(1.0, 5.0, np.array([0.2, 0.3, 0.5]))
    with pytest.raises(ValueError):
        PrefilterSpec(1.0, 5.0, np.array([0.5, 0.6, 0.5]))


# sigma vs downscale curve


def test_curve_matches_reference_csv():
    with open(DATA / "sigma_alpha_reference.csv") as fh:
        ref = [tuple(float(v) for v in row) for row in list(csv.reader(fh))[1:]]
    got = fig2_curve()
    assert len(got) == len(ref) == 25
    for (g, a, s), (rg, ra, rs) in zip(got, ref):
        assert (g, a) == (rg, ra)
        assert abs(s - rs) <= 1e-9


def test_curve_matches_closed_form():
    rep = fig2_report()
    for g, a, s in fig2_curve():
        f = a * rep.omega_u_pa / (2 * math.pi)
        assert s == pytest.approx(math.sqrt(math.log(rep.amplitude / g) / (2 * math.pi ** 2 * f * f)), rel=1e-12)


def test_curve_strictly_decreasing():
    assert is_strictly_decreasing(fig2_curve(), CURVE_GAMMAS, CURVE_ALPHAS)


def test_gamma_equal_amplitude_column_is_zero():
    rep = AliasingReport(0.5, 0.0, 25.0, 1, False)
    rows = sigma_alpha_curve(rep, [25.0], CURVE_ALPHAS)
    assert all(s == 0.0 for _, _, s in rows)


def test_curve_csv_round_trips_floats():
    rows = [(5.0, 1.5, 0.1 + 0.2)]
    text = curve_csv(rows)
    assert float(text.splitlines()[1].split(",")[2]) == 0.1 + 0.2


# slope estimation


def test_vertical_line_slope_zero():
    assert estimate_dominant_disparity(periodic_line(0.0)) == pytest.approx(0.0, abs=0.1)


def test_slope_d5_matches_sweep_oracle():
    assert estimate_dominant_disparity(periodic_line(5.0)) == pytest.approx(SLOPE_D5, abs=0.1)


def test_two_equal_lines_returns_one_of_them():
    epi = render_epi([ScenePoint(20.0, -2.0, 0.8, 1.2), ScenePoint(44.0, 6.0, 0.8, 1.2)], 16, 64, periodic=True)
    d = estimate_dominant_disparity(epi)
    assert min(abs(d + 2.0), abs(d - 6.0)) <= 0.1


def test_flat_epi_has_no_slope():
    with pytest.raises(UndefinedSlopeError):
        estimate_dominant_disparity(np.full((8, 32), 0.5))


def test_slope_needs_four_views():
    with pytest.raises(ValueError):
        estimate_dominant_disparity(np.zeros((3, 32)))


def test_slope_energy_peaks_at_true_slope():
    e = slope_energy(periodic_line(2.0), [-2.0, 0.0, 2.0, 4.0])
    assert int(np.argmax(e)) == 2
