import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lfaa.lightfield import Epi
from lfaa.metrics import psnr
from lfaa.presets import fig2_dense, fig2_points
from lfaa.spectral import epi_spectrum, estimate_dominant_disparity, frequency_axes
from lfaa.synth import (PseudoEpiSpec, ScenePoint, TrainingSetConfig, band_limited_signal, dense_light_field_pair,
                        make_training_set, render_dense_oracle, render_epi, render_pseudo_epi, sample_epi,
                        textured_segment)


def band_fraction(x, d, half_band):
    S, U = x.shape
    spec = epi_spectrum(x)
    spec[S // 2, U // 2] = 0
    power = np.abs(spec) ** 2
    ws, wu = frequency_axes(S, U)
    W_s, W_u = np.meshgrid(ws, wu, indexing="ij")
    gap = np.abs((W_s - d * W_u + np.pi) % (2 * np.pi) - np.pi)
    return power[gap <= half_band + 2 * np.pi / S + 1e-12].sum() / power.sum()


def test_zero_disparity_rows_identical():
    x = render_epi([ScenePoint(20.0, 0.0)], 7, 40).samples
    assert np.all(x == x[0])


def test_line_passes_through_disparity_positions():
    x = render_epi([ScenePoint(30.0, 2.0, 0.9, 1.0)], 5, 64).samples
    # view offsets -2..2 put the centre at 34, 32, 30, 28, 26
    np.testing.assert_array_equal(np.argmax(x, axis=1), [34, 32, 30, 28, 26])
    np.testing.assert_allclose(x.max(axis=1), 0.9)


def test_zero_mod_depth_is_lambertian():
    a = render_epi([ScenePoint(20.0, 1.5, 0.7, 1.2, beta_over_Z=0.5, mod_depth=0.0, mod_seed=3)], 9, 48)
    b = render_epi([ScenePoint(20.0, 1.5, 0.7, 1.2)], 9, 48)
    np.testing.assert_array_equal(a.samples, b.samples)


def test_later_points_render_on_top():
    x = render_epi([ScenePoint(16.0, 0.0, 0.3, 1.0), ScenePoint(16.0, 0.0, 0.8, 1.0)], 3, 32).samples
    assert x[0, 16] == pytest.approx(0.8)


def test_values_stay_in_unit_range():
    rng = np.random.default_rng(0)
    pts = textured_segment(0, 64, 1.0, rng, spacing=1.0, beta_over_Z=0.5, mod_depth=0.5)
    x = render_epi(pts, 9, 64).samples
    assert x.min() >= 0.0 and x.max() <= 1.0


def test_sampler_handles_fractional_views():
    pts = [ScenePoint(32.0, 2.0)]
    x = sample_epi(pts, [-0.5, 0.0, 0.5], 64)
    np.testing.assert_array_equal(np.argmax(x, axis=1), [33, 32, 31])
    np.testing.assert_array_equal(sample_epi(pts, [0.0], 64)[0], render_epi(pts, 3, 64).samples[1])


@given(st.integers(0, 2**31 - 1), st.floats(0.01, 3.0))
def test_band_limited_signal_bounds_and_determinism(seed, band):
    g = band_limited_signal(band, seed)
    s = np.linspace(-20, 20, 401)
    y = g(s)
    assert np.all(np.abs(y) <= 1 + 1e-12)
    np.testing.assert_array_equal(y, band_limited_signal(band, seed)(s))


def test_band_limited_signal_spectrum_inside_band():
    band = 0.6
    y = band_limited_signal(band, 4)(np.arange(4096.0))
    power = np.abs(np.fft.rfft(y * np.hanning(y.size))) ** 2
    w = 2 * np.pi * np.fft.rfftfreq(y.size)
    assert power[w <= band + 0.01].sum() / power.sum() >= 0.999


def test_zero_band_is_silent():
    np.testing.assert_array_equal(band_limited_signal(0.0, 1)(np.arange(5.0)), 0.0)


@pytest.mark.parametrize("kwargs", [dict(width=0), dict(intensity=0), dict(mod_depth=1.0), dict(beta_over_Z=-1),
                                    dict(intensity=0.9, mod_depth=0.5)])
def test_scene_point_validation(kwargs):
    with pytest.raises(ValueError):
        ScenePoint(0.0, 0.0, **kwargs)


@pytest.mark.parametrize("d", [-3.0, 0.0, 1.0, 2.0, 5.0])
def test_lambertian_spectral_fidelity(d):
    x = render_epi([ScenePoint(16.0, d, 0.8, 1.2)], 32, 32, periodic=True).samples
    assert band_fraction(x, d, 0.0) >= 0.9


@pytest.mark.parametrize("d", [-2.0, 0.0, 3.0])
@pytest.mark.parametrize("b", [0.3, 0.6, 0.9])
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_modulated_energy_inside_band(d, b, seed):
    pts = [ScenePoint(16.0, d, 0.6, 1.2, beta_over_Z=b, mod_depth=0.5, mod_seed=seed)]
    x = render_epi(pts, 32, 32, periodic=True).samples
    assert band_fraction(x, d, b) >= 0.9


def test_fig2_scene_shape_and_disparities():
    pts = fig2_points()
    assert len(pts) == 4
    near = [p for p in pts if abs(p.d) <= 1]
    assert len(near) == 3 and abs(pts[-1].d) > 1
    assert sum(not p.lambertian for p in pts) == 1
    assert fig2_dense().samples.shape == (33, 128)


def test_fig2_non_lambertian_point_widens_its_band():
    # energy just outside the line grows when the modulated point is present
    pts = fig2_points()
    flat = [ScenePoint(p.u0, p.d, p.intensity, p.width) for p in pts]
    mod, lam = (render_epi(q, 33, 128).samples for q in (pts, flat))
    d = pts[1].d
    outside = lambda x: 1 - band_fraction(x, d, 0.0)  # noqa: E731
    assert outside(mod) > outside(lam)


def test_dense_oracle_pair():
    pts = [ScenePoint(40.0, 1.5)]
    lr, hr = render_dense_oracle(pts, 16, 72, 3)
    assert lr.samples.shape == (6, 72) and hr.samples.shape == (16, 72)
    np.testing.assert_array_equal(lr.samples, hr.samples[::3])
    assert psnr(hr.samples, hr.samples) == 99.0
    lr1, hr1 = render_dense_oracle(pts, 6, 72, 1)
    np.testing.assert_array_equal(lr1.samples, hr1.samples)


def test_dense_oracle_rejects_bad_row_count():
    with pytest.raises(ValueError):
        render_dense_oracle([ScenePoint(10.0, 0.0)], 15, 32, 3)


def test_dense_oracle_disparity_is_per_sparse_view():
    lr, hr = render_dense_oracle([ScenePoint(64.0, 3.0)], 17, 128, 4)
    assert estimate_dominant_disparity(lr) == pytest.approx(3.0, abs=0.1)
    assert estimate_dominant_disparity(hr) == pytest.approx(0.75, abs=0.1)


def test_dense_light_field_pair():
    pts = [(12.0, 12.0, 0.8), (20.0, 8.0, 0.5)]
    sparse, dense = dense_light_field_pair(pts, 2.0, 3, 3, 32, 24)
    assert sparse.samples.shape == (3, 3, 24, 32)
    assert dense.samples.shape == (7, 7, 24, 32)
    np.testing.assert_array_equal(sparse.samples, dense.samples[::3, ::3])


def test_pseudo_constant_path_matches_lambertian():
    spec = PseudoEpiSpec(knots=[2.0], lines=[(30.0, 0.7)], width=1.2)
    a = render_pseudo_epi(spec, 9, 64)
    b = render_epi([ScenePoint(30.0, 2.0, 0.7, 1.2)], 9, 64)
    np.testing.assert_allclose(a.samples, b.samples, atol=1e-12)
    assert a.provenance.kind == "pseudo"


def test_pseudo_linear_ramp_slope_increases():
    S, U = 41, 256
    # irregular spacing, so no slope is confused with one a texture period away
    u0 = np.sort(np.random.default_rng(1).uniform(8, 248, 40))
    spec = PseudoEpiSpec(knots=[2.0, 6.0], lines=[(float(u), 0.8) for u in u0], width=1.2)
    x = render_pseudo_epi(spec, S, U).samples
    est = [estimate_dominant_disparity(Epi(x[s:s + 6, 40:216]), d_max=10) for s in range(0, S - 5, 5)]
    assert np.all(np.diff(est) > 0)
    assert est[0] == pytest.approx(2.0, abs=0.5) and est[-1] == pytest.approx(6.0, abs=0.5)


def test_pseudo_flicker_band():
    b = 0.4
    spec = PseudoEpiSpec(knots=[0.0], lines=[(16.0, 0.6)], flicker_band=b, flicker_depth=0.5, seed=5)
    x = render_pseudo_epi(spec, 32, 32).samples
    assert band_fraction(x, 0.0, b) >= 0.9
    assert band_fraction(x, 0.0, 0.0) < band_fraction(x, 0.0, b)


def test_pseudo_trajectory_leaving_frame_is_clipped():
    spec = PseudoEpiSpec(knots=[20.0], lines=[(32.0, 0.8)])
    x = render_pseudo_epi(spec, 9, 64).samples
    assert x[0].max() < 1e-6 and x[4].max() == pytest.approx(0.8)


@pytest.mark.parametrize("kwargs", [dict(knots=[]), dict(knots=[np.nan]), dict(flicker_depth=1.0),
                                    dict(lines=[(0.0, 0.9)], flicker_depth=0.5)])
def test_pseudo_spec_validation(kwargs):
    base = dict(knots=[1.0], lines=[(0.0, 0.5)])
    base.update(kwargs)
    with pytest.raises(ValueError):
        PseudoEpiSpec(**base)


def test_training_set_geometry_and_determinism():
    cfg = TrainingSetConfig(count=12, seed=4, nonlambertian_fraction=0.5)
    a, b = make_training_set(cfg), make_training_set(cfg)
    assert a.inputs.shape == (12, 6, 72) and a.labels.shape == (12, 16, 72)
    assert a.inputs.tobytes() == b.inputs.tobytes() and a.labels.tobytes() == b.labels.tobytes()
    np.testing.assert_array_equal(a.inputs, a.labels[:, ::3])
    assert not np.array_equal(a.inputs, make_training_set(TrainingSetConfig(count=12, seed=5)).inputs)


def test_training_set_pseudo_phase():
    ds = make_training_set(TrainingSetConfig(count=6, seed=2, phase="pseudo", nonlambertian_fraction=0.5))
    assert ds.labels.shape == (6, 16, 72)
    np.testing.assert_array_equal(ds.inputs, ds.labels[:, ::3])


def test_training_set_count_zero():
    ds = make_training_set(TrainingSetConfig(count=0))
    assert len(ds) == 0 and ds.inputs.shape == (0, 6, 72)


def test_training_set_unknown_phase():
    with pytest.raises(ValueError):
        make_training_set(TrainingSetConfig(count=1, phase="gan"))


@pytest.mark.slow
def test_training_disparity_histogram_uniform():
    ds = make_training_set(TrainingSetConfig(count=10_000, seed=3, d_range=(-3.0, 3.0)))
    counts, _ = np.histogram(ds.disparities, bins=12, range=(-3.0, 3.0))
    expected = 10_000 / 12
    assert np.all(np.abs(counts - expected) <= 0.05 * expected)
