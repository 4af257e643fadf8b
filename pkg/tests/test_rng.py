import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rarevisit.rng import RandomStream, bernoulli_ratio, make_state, next_u64


@given(seed=st.integers(0, 2**64 - 1), stream=st.integers(0, 2**64 - 1))
@settings(max_examples=25, deadline=None)
def test_matches_numpy_philox(seed, stream):
    ref = np.random.Philox(key=np.array([seed, stream], dtype=np.uint64)).random_raw(20)
    ours = RandomStream(seed, stream).u64(20)
    assert np.array_equal(ref.astype(np.uint64), ours)


def test_streams_are_reproducible_and_distinct():
    a = RandomStream(5, 1).u64(8)
    assert np.array_equal(a, RandomStream(5, 1).u64(8))
    assert not np.array_equal(a, RandomStream(5, 2).u64(8))
    assert not np.array_equal(a, RandomStream(6, 1).u64(8))


def test_python_and_kernel_draws_share_counter():
    rs = RandomStream(3)
    first = rs.u64(1)[0]
    st = make_state(3)
    assert next_u64(st) == first
    assert next_u64(st) == rs.u64(1)[0]


def test_seed_range_checked():
    with pytest.raises(ValueError):
        make_state(-1)
    with pytest.raises(ValueError):
        make_state(2**64)


def test_uniforms_in_range():
    rs = RandomStream(1)
    u = rs.uniforms(10000)
    assert u.min() >= 0.0 and u.max() < 1.0
    assert abs(u.mean() - 0.5) < 3 * np.sqrt(1 / 12 / 10000)
    v = rs.open_uniform()
    assert 0.0 < v <= 1.0


def test_bits_are_fair():
    rs = RandomStream(2)
    bits = np.array([rs.bit() for _ in range(20000)])
    assert abs(bits.mean() - 0.5) <= 3 * 0.5 / np.sqrt(20000)


@pytest.mark.parametrize("n", [1, 2, 3, 6, 7, 1000])
def test_below_range_and_uniformity(n):
    rs = RandomStream(4, n)
    x = np.array([rs.below(n) for _ in range(6000)])
    assert x.min() >= 0 and x.max() < n
    if 2 <= n <= 7:
        from rarevisit.stats import chi_square_gof

        res = chi_square_gof(np.bincount(x, minlength=n), np.full(n, 1.0 / n), alpha=0.001)
        assert not res.reject


@pytest.mark.parametrize("num,den", [(1, 3), (2, 7), (5, 8), (49, 100)])
def test_bernoulli_ratio_frequency(num, den):
    st = make_state(9, den)
    n = 40000
    hits = sum(bernoulli_ratio(st, num, den) for _ in range(n))
    p = num / den
    assert abs(hits / n - p) <= 3.5 * np.sqrt(p * (1 - p) / n)


def test_bernoulli_ratio_edges():
    st = make_state(1)
    assert not bernoulli_ratio(st, 0, 5)
    assert bernoulli_ratio(st, 5, 5)


def test_dyadic_range():
    rs = RandomStream(8)
    vals = [rs.dyadic(4) for _ in range(200)]
    assert min(vals) >= 1 and max(vals) <= 16
