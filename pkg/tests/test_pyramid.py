import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from lfaa.lightfield import Epi
from lfaa.metrics import psnr
from lfaa.pyramid import (PyramidLevels, angular_upsample, downsample_angular_nearest, downscale_spatial,
                          filter_spatial, keys_kernel, laplacian_decompose, laplacian_reconstruct,
                          resample_angular, upscale_spatial)
from lfaa.spectral import estimate_dominant_disparity
from lfaa.synth import ScenePoint, band_limited_signal, render_epi

# mpmath evaluation of the a = -0.5 cubic, see tests/data/generate_oracles.py
KEYS_ORACLE = {0: 1.0, 0.25: 0.8671875, 0.5: 0.5625, 0.75: 0.2265625, 1: 0.0, 1.25: -0.0703125,
               1.5: -0.0625, 1.75: -0.0234375, 2: 0.0}


def smooth_image(seed=0, rows=8, U=128):
    # low-frequency content, well inside the band a factor-4 reduction keeps
    u = np.arange(U, dtype=float)
    return np.stack([band_limited_signal(0.04, seed + r)(u) for r in range(rows)])


@pytest.mark.parametrize("x", sorted(KEYS_ORACLE))
def test_keys_kernel_matches_oracle(x):
    assert keys_kernel(x) == pytest.approx(KEYS_ORACLE[x], abs=1e-15)
    assert keys_kernel(-x) == pytest.approx(KEYS_ORACLE[x], abs=1e-15)


def test_keys_kernel_partition_of_unity():
    t = np.linspace(0, 1, 17)
    total = sum(keys_kernel(t - k) for k in range(-2, 4))
    np.testing.assert_allclose(total, 1.0, atol=1e-14)


@pytest.mark.parametrize("fn", [downscale_spatial, upscale_spatial])
def test_factor_one_is_identity(fn):
    x = np.random.default_rng(0).uniform(size=(4, 30))
    np.testing.assert_array_equal(fn(x, 1), x)


@pytest.mark.parametrize("factor", [2, 3, 4])
def test_constant_is_preserved(factor):
    x = np.full((3, 50), 0.37)
    down = downscale_spatial(x, factor)
    assert down.shape == (3, -(-50 // factor))
    np.testing.assert_allclose(down, 0.37, atol=1e-12)
    np.testing.assert_allclose(upscale_spatial(x, factor), 0.37, atol=1e-12)


@pytest.mark.parametrize("factor", [2, 4])
def test_smooth_dc_preserved(factor):
    x = smooth_image() + 0.5
    assert abs(downscale_spatial(x, factor).mean() - x.mean()) <= 1e-3 * abs(x.mean())


def test_angular_axis_untouched():
    x = np.random.default_rng(1).uniform(size=(2, 7, 40))
    assert downscale_spatial(x, 4).shape == (2, 7, 10)
    assert upscale_spatial(x, 2).shape == (2, 7, 80)
    assert upscale_spatial(x, 2, width=79).shape == (2, 7, 79)


@pytest.mark.parametrize("factor", [2, 4])
def test_up_of_down_recovers_smooth_image(factor):
    x = smooth_image(3)
    back = upscale_spatial(downscale_spatial(x, factor), factor, width=x.shape[-1])
    # the outer samples see edge replication, so score the interior
    assert psnr(back[:, 8:-8], x[:, 8:-8]) >= 40.0


@pytest.mark.parametrize("bad", [0, -2, 1.5])
def test_bad_factor_raises(bad):
    with pytest.raises(ValueError):
        downscale_spatial(np.zeros((2, 16)), bad)


@pytest.mark.parametrize("d", [-9.0, -6.0, -2.5, 0.0, 3.0, 6.0, 9.0])
@pytest.mark.parametrize("factor", [2, 4])
def test_downscale_divides_disparity(d, factor):
    S, U = 9, 512
    epi = render_epi([ScenePoint(U / 2, d, 0.8, 1.5 * factor)], S, U)
    down = downscale_spatial(epi.samples, factor)
    assert abs(estimate_dominant_disparity(Epi(down), d_max=20) - d / factor) <= 0.1


def test_d6_halves_to_3():
    epi = render_epi([ScenePoint(96.0, 6.0, 0.8, 2.0)], 9, 192)
    assert estimate_dominant_disparity(Epi(downscale_spatial(epi.samples, 2)), d_max=10) == pytest.approx(3.0, abs=0.1)


def test_filter_spatial_delta_and_constant():
    taps = np.array([0.25, 0.5, 0.25])
    x = np.zeros((1, 9))
    x[0, 4] = 1.0
    np.testing.assert_allclose(filter_spatial(x, taps)[0, 3:6], taps)
    np.testing.assert_allclose(filter_spatial(np.ones((2, 9)), taps), 1.0)
    np.testing.assert_array_equal(filter_spatial(x, [2.0]), 2 * x)


@pytest.mark.parametrize("alpha_s", [2, 3, 4])
def test_angular_upsample_keeps_input_rows(alpha_s):
    x = np.random.default_rng(2).uniform(size=(5, 12))
    up = angular_upsample(x, alpha_s)
    assert up.shape == (alpha_s * 5 - alpha_s + 1, 12)
    np.testing.assert_allclose(up[::alpha_s], x, atol=1e-14)


def test_angular_upsample_linear_ramp_exact():
    x = np.arange(6, dtype=float)[:, None] * np.ones((1, 4))
    up = angular_upsample(x, 3)
    # edge replication bends the first and last intervals
    np.testing.assert_allclose(up[3:13, 0], np.arange(3, 13) / 3.0, atol=1e-12)


def test_resample_angular_aligns_end_views():
    # 13 -> 7 views puts output view k on input view 2k; a ramp is kept away from the ends
    x = np.arange(13, dtype=float)[:, None] * np.ones((1, 5))
    out = resample_angular(x, 7)
    assert out.shape == (7, 5)
    np.testing.assert_allclose(out[2:5, 0], [4.0, 6.0, 8.0], atol=1e-12)
    np.testing.assert_allclose(resample_angular(np.full((13, 3), 0.4), 7), 0.4, atol=1e-12)
    y = np.random.default_rng(3).uniform(size=(13, 6))
    np.testing.assert_array_equal(resample_angular(y, 13), y)


def test_nearest_angular_rate_one_identity():
    x = np.random.default_rng(4).uniform(size=(6, 8))
    np.testing.assert_array_equal(downsample_angular_nearest(x, 1), x)


def test_nearest_angular_patch_geometry():
    x = np.arange(16)[:, None] * np.ones((1, 72))
    out = downsample_angular_nearest(x, 3)
    assert out.shape == (6, 72)
    np.testing.assert_array_equal(out[:, 0], [0, 3, 6, 9, 12, 15])
    np.testing.assert_array_equal(downsample_angular_nearest(x, 3, offset=1)[:, 0], [1, 4, 7, 10, 13])


def test_nearest_then_upsample_restores_row_indices():
    x = np.random.default_rng(5).uniform(size=(16, 10))
    up = angular_upsample(downsample_angular_nearest(x, 3), 3)
    assert up.shape[0] == 16
    np.testing.assert_allclose(up[::3], x[::3], atol=1e-14)


def test_nearest_angular_bad_offset():
    with pytest.raises(ValueError):
        downsample_angular_nearest(np.zeros((6, 4)), 3, offset=3)


def test_constant_image_has_zero_residuals():
    p = laplacian_decompose(np.full((4, 64), 0.6))
    assert p.factors == [4, 2, 1]
    assert p.base.shape == (4, 16)
    assert [r.shape for r in p.residuals] == [(4, 32), (4, 64)]
    for r in p.residuals:
        np.testing.assert_allclose(r, 0.0, atol=1e-12)


def test_single_level_pyramid():
    x = np.random.default_rng(6).uniform(size=(3, 20))
    p = laplacian_decompose(x, [1])
    np.testing.assert_array_equal(p.base, x)
    assert p.residuals == []
    np.testing.assert_array_equal(laplacian_reconstruct(p), x)


@given(arrays(np.float64, (5, 37), elements=st.floats(-1e3, 1e3, allow_nan=False)))
def test_perfect_reconstruction(x):
    back = laplacian_reconstruct(laplacian_decompose(x))
    assert np.max(np.abs(back - x)) <= 1e-6


def test_perfect_reconstruction_custom_factors():
    x = np.random.default_rng(7).standard_normal((2, 3, 96))
    p = laplacian_decompose(x, [8, 4, 2, 1])
    assert np.max(np.abs(laplacian_reconstruct(p) - x)) <= 1e-6


@pytest.mark.parametrize("factors", [[2, 4, 1], [4, 2], [4, 3, 1]])
def test_invalid_factor_lists(factors):
    with pytest.raises(ValueError):
        laplacian_decompose(np.zeros((2, 64)), factors)


def test_too_narrow_for_coarsest_factor():
    with pytest.raises(ValueError):
        laplacian_decompose(np.zeros((2, 6)), [4, 2, 1])


def test_levels_validate_residual_count():
    with pytest.raises(ValueError):
        PyramidLevels([2, 1], np.zeros((1, 4)), [])
