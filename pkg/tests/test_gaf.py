import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from grcnet.errors import DegenerateRange, DomainError, IndivisibleLength
from grcnet.gaf import (
    ScaledSeries,
    diag_reconstruct,
    encode_windows,
    gasf,
    min_max_scale,
    paa_downsample,
    penalized_inner,
    tiled_image,
    to_polar,
)
from oracles import gasf_trig

finite = st.floats(-1e4, 1e4, allow_nan=False, allow_infinity=False)


@pytest.mark.parametrize(
    "raw, expected", [([0, 5, 10], [-1, 0, 1]), ([2, 4], [-1, 1])]
)
def test_min_max_scale_examples(raw, expected):
    np.testing.assert_array_equal(min_max_scale(raw).values, expected)


def test_min_max_scale_constant_window():
    with pytest.raises(DegenerateRange):
        min_max_scale([7, 7, 7])


@settings(max_examples=200, deadline=None)
@given(arrays(np.float64, st.integers(2, 64), elements=finite))
def test_scaling_attains_both_ends(values):
    if values.max() == values.min():
        return
    s = min_max_scale(values).values
    assert np.all(np.abs(s) <= 1.0)
    assert abs(s[np.argmin(values)] + 1.0) <= 1e-12
    assert abs(s[np.argmax(values)] - 1.0) <= 1e-12


@pytest.mark.parametrize("s, theta", [(1.0, 0.0), (-1.0, math.pi), (0.0, math.pi / 2)])
def test_to_polar_angles(s, theta):
    polar = to_polar(ScaledSeries([s]))
    assert polar.angles[0] == pytest.approx(theta, abs=1e-15)


def test_to_polar_radii():
    polar = to_polar(ScaledSeries(np.linspace(-1, 1, 5)), n_regularizer=10)
    np.testing.assert_allclose(polar.radii, [0.1, 0.2, 0.3, 0.4, 0.5])
    assert np.all(np.diff(polar.radii) > 0)
    with pytest.raises(ValueError):
        to_polar(ScaledSeries(np.zeros(5)), n_regularizer=4)


@settings(max_examples=200, deadline=None)
@given(arrays(np.float64, st.integers(1, 32), elements=st.floats(-1 + 1e-8, 1 - 1e-8)))
def test_polar_mapping_inverts(values):
    polar = to_polar(ScaledSeries(values))
    assert np.all((polar.angles >= 0) & (polar.angles <= math.pi))
    np.testing.assert_allclose(np.cos(polar.angles), values, rtol=0, atol=1e-12)


@pytest.mark.parametrize("x, y, expected", [(0.6, 0.8, 0.0), (1, 1, 1.0), (0, 0, -1.0)])
def test_penalized_inner_examples(x, y, expected):
    assert penalized_inner(x, y) == pytest.approx(expected, abs=1e-15)


def test_penalized_inner_domain():
    with pytest.raises(DomainError):
        penalized_inner(1.1, 0.0)
    assert penalized_inner(1 + 1e-13, 1.0) == 1.0


@settings(max_examples=300, deadline=None)
@given(st.floats(-1, 1), st.floats(-1, 1))
def test_penalized_inner_is_cos_of_angle_sum(x, y):
    assert penalized_inner(x, y) == pytest.approx(math.cos(math.acos(x) + math.acos(y)), abs=1e-9)


def test_gasf_examples():
    np.testing.assert_allclose(gasf(ScaledSeries([1.0, 0.0])).data, [[1, 0], [0, -1]], atol=1e-15)
    np.testing.assert_allclose(gasf(ScaledSeries([-1.0])).data, [[1.0]])


def test_gasf_random_length8_matches_trig_oracle(rng):
    s = min_max_scale(rng.standard_normal(8))
    np.testing.assert_allclose(gasf(s).data, gasf_trig(s.values), rtol=0, atol=1e-9)


@settings(max_examples=200, deadline=None)
@given(arrays(np.float64, st.integers(1, 40), elements=st.floats(-1, 1)))
def test_gasf_invariants(values):
    g = gasf(ScaledSeries(values)).data
    assert np.array_equal(g, g.T)
    assert np.all((g >= -1) & (g <= 1))
    np.testing.assert_allclose(np.diag(g), 2 * values**2 - 1, rtol=0, atol=1e-9)
    np.testing.assert_allclose(diag_reconstruct(gasf(ScaledSeries(values))), np.abs(values), atol=1e-6)


def test_diag_reconstruct_examples():
    np.testing.assert_allclose(diag_reconstruct(gasf(ScaledSeries([1.0, 0.0]))), [1.0, 0.0])
    np.testing.assert_allclose(diag_reconstruct(gasf(ScaledSeries([1.0, -1.0, 1.0]))), [1, 1, 1])


@pytest.mark.parametrize(
    "series, target, expected",
    [([1, 1, 3, 3], 2, [1, 3]), ([2] * 6, 3, [2, 2, 2]), ([4, 8, 1], 3, [4, 8, 1])],
)
def test_paa_examples(series, target, expected):
    np.testing.assert_allclose(paa_downsample(series, target), expected)


def test_paa_indivisible():
    with pytest.raises(IndivisibleLength):
        paa_downsample(np.arange(10), 3)
    with pytest.raises(IndivisibleLength):
        paa_downsample(np.arange(4), 5)


@settings(max_examples=100, deadline=None)
@given(arrays(np.float64, st.sampled_from([8, 16, 32]), elements=finite), st.sampled_from([1, 2, 4, 8]))
def test_paa_block_means_preserve_total(values, target):
    out = paa_downsample(values, target)
    assert out.shape == (target,)
    assert out.sum() * (values.size // target) == pytest.approx(values.sum(), rel=1e-9, abs=1e-6)


def test_encode_windows_skips_constant_and_matches_scalar_path(rng):
    windows = rng.standard_normal((4, 32))
    windows[2] = 5.0
    images, keep = encode_windows(windows, 8)
    assert list(keep) == [0, 1, 3]
    for img, k in zip(images, keep):
        expected = gasf(min_max_scale(paa_downsample(windows[k], 8))).data
        np.testing.assert_allclose(img, expected, atol=1e-12)


def test_tiled_mode_rows_are_the_scaled_series(rng):
    windows = rng.standard_normal((2, 16))
    images, _ = encode_windows(windows, 8, mode="tiled")
    scaled = min_max_scale(paa_downsample(windows[1], 8))
    np.testing.assert_allclose(images[1], tiled_image(scaled))
    assert np.all(images[1] == images[1][0])
