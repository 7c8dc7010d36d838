import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hdctune.core import (
    ParameterError,
    ShapeError,
    ShapeMeta,
    feature_vector,
    gaussian_draw,
    hypervector,
    make_rng,
    uniform_draw,
)


def test_same_stream_is_reproducible():
    a = make_rng(7, 0).random(1000)
    b = make_rng(7, 0).random(1000)
    assert np.array_equal(a, b)


def test_stream_labels_and_seeds_differ():
    base = make_rng(7, 0).random(1000)
    assert not np.array_equal(base, make_rng(7, 1).random(1000))
    assert not np.array_equal(base, make_rng(8, 0).random(1000))


def test_gaussian_moments():
    z = gaussian_draw(make_rng(3, 0), 1.0, size=10**6)
    assert abs(z.mean()) <= 0.01
    assert 0.99 <= z.std() <= 1.01
    small = gaussian_draw(make_rng(4, 0), 0.01, size=10**6)
    assert 0.0099 <= small.std() <= 0.0101


def test_gaussian_scale_property():
    a = gaussian_draw(make_rng(5, 0), 1.0, size=1001)
    b = gaussian_draw(make_rng(5, 0), 2.0, size=1001)
    assert np.array_equal(b, 2.0 * a)


def test_gaussian_matches_box_muller_oracle():
    u = make_rng(11, 0).random(6)
    expected = []
    for u1, u2 in u.reshape(3, 2):
        r = np.sqrt(-2.0 * np.log(1.0 - u1))
        expected += [r * np.cos(2 * np.pi * u2), r * np.sin(2 * np.pi * u2)]
    got = gaussian_draw(make_rng(11, 0), 1.0, size=6)
    assert np.allclose(got, expected, rtol=1e-12, atol=0)
    assert gaussian_draw(make_rng(11, 0), 1.0) == pytest.approx(expected[0], rel=1e-12)


def test_gaussian_rejects_bad_sigma():
    for sigma in (0.0, -1.0, float("nan")):
        with pytest.raises(ParameterError):
            gaussian_draw(make_rng(0), sigma)


def test_uniform_range_and_mean():
    x = uniform_draw(make_rng(9, 1), 0.0, 2 * np.pi, size=10**6)
    assert x.min() >= 0.0 and x.max() < 2 * np.pi
    se = (2 * np.pi / np.sqrt(12)) / np.sqrt(x.size)
    assert abs(x.mean() - np.pi) <= 3 * se


def test_uniform_empty_interval():
    with pytest.raises(ParameterError):
        uniform_draw(make_rng(0), 5.0, 5.0)


@given(lo=st.floats(-1e6, 1e6), width=st.floats(1e-6, 1e6), seed=st.integers(0, 2**64 - 1))
@settings(max_examples=50, deadline=None)
def test_uniform_stays_in_interval(lo, width, seed):
    hi = lo + width
    if not lo < hi:
        return
    x = uniform_draw(make_rng(seed, 3), lo, hi, size=64)
    assert np.all(x >= lo) and np.all(x < hi)


def test_seed_bounds():
    make_rng(2**64 - 1)
    with pytest.raises(ParameterError):
        make_rng(2**64)
    with pytest.raises(ParameterError):
        make_rng(-1)


def test_shape_meta_invariants():
    ShapeMeta(1, 1, 2)
    for bad in ((0, 1, 2), (1, 0, 2), (1, 1, 1)):
        with pytest.raises(ParameterError):
            ShapeMeta(*bad)


def test_vectors_reject_non_finite():
    with pytest.raises(ParameterError):
        feature_vector([1.0, np.nan])
    with pytest.raises(ParameterError):
        hypervector([np.inf, 0.0])
    with pytest.raises(ShapeError):
        feature_vector([1.0, 2.0], J=3)
    h = hypervector([1, 2, 3], D=3)
    assert h.dtype == np.float32 and not h.flags.writeable
