import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from symforecast.series import (
    as_series,
    denormalize,
    difference,
    resample_linear,
    undifference,
    znormalize,
)

finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


def test_znormalize_hand_values():
    z, params = znormalize([1.0, 2.0, 3.0])
    np.testing.assert_allclose(z, [-1.224744871391589, 0.0, 1.224744871391589], atol=1e-12)
    assert params.mean == 2.0
    assert params.std == pytest.approx(np.sqrt(2.0 / 3.0), abs=1e-12)


def test_znormalize_constant_series():
    z, params = znormalize([5.0, 5.0, 5.0])
    assert np.array_equal(z, np.zeros(3))
    assert params.std == 1.0
    np.testing.assert_array_equal(denormalize(z, params), [5.0, 5.0, 5.0])


def test_znormalize_roundtrip_example():
    x = np.array([0.3, 1.7, -2.2])
    z, params = znormalize(x)
    np.testing.assert_allclose(denormalize(z, params), x, rtol=1e-12)


@given(arrays(np.float64, st.integers(1, 50), elements=finite))
def test_znormalize_roundtrip_property(x):
    z, params = znormalize(x)
    np.testing.assert_allclose(denormalize(z, params), x, rtol=1e-12, atol=1e-12 * np.max(np.abs(x), initial=1.0))


@given(arrays(np.float64, st.integers(2, 50), elements=st.floats(-100, 100)))
def test_znormalize_moments(x):
    z, _ = znormalize(x)
    assert abs(z.mean()) < 1e-9
    assert z.std() == pytest.approx(1.0, abs=1e-9) or np.all(z == 0)


def test_as_series_rejects_nonfinite():
    with pytest.raises(ValueError):
        as_series([1.0, np.nan])
    with pytest.raises(ValueError):
        as_series([[1.0, 2.0]])


def test_difference_examples():
    np.testing.assert_array_equal(difference([1, 3, 6]), [2, 3])
    np.testing.assert_array_equal(difference([4, 4, 4, 4]), [0, 0, 0])
    with pytest.raises(ValueError, match="too short"):
        difference([1.0])


@given(arrays(np.float64, st.integers(2, 40), elements=st.floats(-1e3, 1e3)))
def test_difference_telescopes(x):
    d = difference(x)
    assert d.size == x.size - 1
    np.testing.assert_allclose(undifference(d, x[0]), x, atol=1e-9)


def test_resample_examples():
    np.testing.assert_array_equal(resample_linear([0.0, 2.0], 3), [0.0, 1.0, 2.0])
    np.testing.assert_allclose(resample_linear([0.0, 1.0, 4.0], 5), [0.0, 0.5, 1.0, 2.5, 4.0])
    seg = np.array([3.0, -1.0, 2.0, 7.0])
    np.testing.assert_array_equal(resample_linear(seg, 4), seg)
    with pytest.raises(ValueError):
        resample_linear([0.0, 1.0], 1)


@given(arrays(np.float64, st.integers(2, 30), elements=st.floats(-1e3, 1e3)), st.integers(2, 60))
def test_resample_endpoints_and_monotonicity(seg, target):
    out = resample_linear(seg, target)
    assert out.size == target
    assert out[0] == seg[0] and out[-1] == seg[-1]
    mono = np.sort(seg)
    res = resample_linear(mono, target)
    assert np.all(np.diff(res) >= -1e-9)
