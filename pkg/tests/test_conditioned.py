import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rarevisit.conditioned import (
    HIT_TOP,
    RETURN_BEFORE_TOP,
    UP_FOREVER,
    ConditionedKernel,
    base_visit_counts,
    edge_upcrossings,
    interior_visit_counts,
    interior_visit_probability,
    late_return_indicators,
    late_return_probability,
    min_visit_counts,
    ruin_probability,
    sample_by_rejection,
    sample_conditioned,
    visit_min_probability,
    y_martingale_mean,
)
from rarevisit.rng import RandomStream
from rarevisit.stats import chi_square_homogeneity

KINDS = [UP_FOREVER, RETURN_BEFORE_TOP, HIT_TOP]


@given(st.sampled_from(KINDS), st.integers(-5, 5), st.integers(2, 40), st.data())
@settings(max_examples=80, deadline=None)
def test_kernel_rows_normalized(kind, base, width, data):
    k = ConditionedKernel(kind, base, base + width)
    x = data.draw(st.integers(base, base + width - (1 if kind == RETURN_BEFORE_TOP else 0)))
    if kind == RETURN_BEFORE_TOP and x == base + width:
        return
    if kind != RETURN_BEFORE_TOP and x == base + width:
        return
    down, up = k.transition(x)
    assert down + up == 1 and 0 <= down <= 1
    if x == base:
        assert up == 1
    # never move into a forbidden site
    if k.forbidden(x - 1):
        assert down == 0
    if k.forbidden(x + 1):
        assert up == 0


def test_kernel_values():
    assert ConditionedKernel(UP_FOREVER, 0).transition(3) == (Fraction(1, 3), Fraction(2, 3))
    assert ConditionedKernel(HIT_TOP, 0).transition(1) == (Fraction(1, 4), Fraction(3, 4))
    assert ConditionedKernel(RETURN_BEFORE_TOP, 0, 4).transition(3) == (Fraction(1), Fraction(0))
    with pytest.raises(ValueError):
        ConditionedKernel(RETURN_BEFORE_TOP, 0)
    with pytest.raises(ValueError):
        ConditionedKernel(UP_FOREVER, 0).transition(-1)


@pytest.mark.parametrize("kind", KINDS)
def test_paths_stay_in_allowed_sites(kind):
    k = ConditionedKernel(kind, 2, 12)
    for s in range(200):
        p = sample_conditioned(k, RandomStream(1, s))
        assert p[0] == 2 and set(np.unique(np.diff(p))) <= {-1, 1}
        assert not any(k.forbidden(int(x)) for x in p[1:-1])
        if kind == RETURN_BEFORE_TOP:
            assert p[-1] == 2 and p[1:-1].min() > 2
        else:
            assert p[-1] == 12 and p[:-1].max() < 12
        if kind == UP_FOREVER:
            assert p[1:].min() > 2


def _hist(paths, width):
    lengths = np.array([len(p) for p in paths])
    ups = np.array([edge_upcrossings(p, 0, width)[0] for p in paths])
    return lengths, ups


@pytest.mark.parametrize("kind", KINDS)
@pytest.mark.parametrize("width", [3, 6, 8])
def test_kernel_equals_rejection(kind, width):
    k = ConditionedKernel(kind, 0, width)
    n = 3000
    a = [sample_conditioned(k, RandomStream(5, s)) for s in range(n)]
    b = [sample_by_rejection(k, RandomStream(6, s)) for s in range(n)]
    la, ua = _hist(a, width)
    lb, ub = _hist(b, width)
    _same_law(np.minimum(la, 200), np.minimum(lb, 200))
    _same_law(ua, ub)


def _same_law(x, y):
    m = int(max(x.max(), y.max())) + 1
    cx, cy = np.bincount(x, minlength=m), np.bincount(y, minlength=m)
    if np.count_nonzero(cx + cy) == 1:
        assert np.array_equal(cx, cy)  # a point mass on both sides
        return
    assert not chi_square_homogeneity(cx, cy, alpha=0.001).reject


def test_reversal_law_width6():
    """Excursions below the top are reversible: the time to first reach the
    maximum has the law of the time from the last visit to the maximum to the end."""
    from rarevisit.stats import chi_square_gof

    k = ConditionedKernel(RETURN_BEFORE_TOP, 0, 6)
    first = []
    last = []
    maxes = []
    for s in range(4000):
        p = sample_conditioned(k, RandomStream(8, s))
        m = p.max()
        at = np.nonzero(p == m)[0]
        first.append(int(at[0]))
        last.append(len(p) - 1 - int(at[-1]))
        maxes.append(int(m))
    cap = 60
    ca = np.bincount(np.minimum(first, cap), minlength=cap + 1)
    cb = np.bincount(np.minimum(last, cap), minlength=cap + 1)
    assert not chi_square_homogeneity(ca, cb, alpha=0.001).reject
    # P(max >= h) = (1/h - 1/6) / (1 - 1/6) for an excursion kept below 6
    tail = np.array([(1 / h - 1 / 6) / (5 / 6) for h in range(1, 7)])
    counts = np.bincount(maxes, minlength=6)[1:]
    assert not chi_square_gof(counts, tail[:-1] - tail[1:], alpha=0.001).reject


def test_closed_forms():
    assert ruin_probability(0, 10, 3) == pytest.approx(0.3)
    with pytest.raises(ValueError):
        ruin_probability(0, 0, 0)
    assert visit_min_probability(math.inf, 3) == 0.25
    assert visit_min_probability(50, 2) == pytest.approx(0.5 * 50 / 51)
    assert visit_min_probability(10**9, 3) == pytest.approx(0.25, rel=1e-6)
    assert interior_visit_probability(1, 1, 2) == 0.0
    assert interior_visit_probability(3, 3, 1) == 1.0
    assert interior_visit_probability(2, 2, 2, variant=2) == pytest.approx(1 - 5 / 12)
    assert late_return_probability(100, 16) == 0.16
    # large r stays finite
    assert 0 < visit_min_probability(50, 500) < 1e-100


def test_y_identity():
    for i in range(2, 300):
        assert y_martingale_mean(i) == Fraction(1, i)
    assert y_martingale_mean(1) == Fraction(1, 2)


def test_batch_samplers_small():
    v = base_visit_counts(20000, seed=2)
    assert abs((v >= 2).mean() - 0.5) <= 3 * 0.5 / math.sqrt(20000)
    ind = late_return_indicators(20, 5, 20000, seed=3)
    assert abs(ind.mean() - 0.25) <= 3 * math.sqrt(0.25 * 0.75 / 20000)
    c = interior_visit_counts(3, 4, 20000, seed=4)
    p = interior_visit_probability(3, 4, 2)
    assert abs((c >= 2).mean() - p) <= 3 * math.sqrt(p * (1 - p) / 20000)
    counts, attempts = min_visit_counts(10, 5000, seed=5)
    p = visit_min_probability(10, 2)
    assert abs((counts >= 2).mean() - p) <= 3 * math.sqrt(p * (1 - p) / 5000)
    assert attempts >= 5000


def test_edge_upcrossings_single_excursion():
    p = np.array([0, 1, 2, 1, 2, 1, 0])
    assert edge_upcrossings(p, 0, 3).tolist() == [1, 2, 0]


def test_min_visits_small_width_separates_conventions():
    # at w = 3: ((1/2) w / (w + 1)) = 0.375 against (w - 1) / (2w) = 0.333
    counts, _ = min_visit_counts(3, 100_000, seed=12)
    est = (counts >= 2).mean()
    se = math.sqrt(0.375 * 0.625 / 100_000)
    assert abs(est - visit_min_probability(3, 2)) <= 3 * se
    assert abs(est - 2 / 6) > 10 * se
