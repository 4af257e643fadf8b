import itertools
from fractions import Fraction

import numpy as np
import pytest

from rarevisit.conditioned import interior_visit_probability, visit_min_probability
from rarevisit.localtime import LocalTimeField
from rarevisit.oracle import (
    ExactDistribution,
    absorbing_visit_distribution,
    dirichlet_residual,
    enumerate_f,
    enumerate_g1,
    enumerate_g1_mean,
    enumerate_tau_cdf,
    hitting_solve,
    hitting_vector,
    min_visit_tail,
    return_probability,
    table_csv,
    visit_tail,
)


def _brute(n):
    f_law = {}
    g_law = {}
    for steps in itertools.product((-1, 1), repeat=n):
        fld = LocalTimeField(0)
        x = 0
        for s in steps:
            x += s
            fld.record_visit(x)
        f_law[fld.min_local_time()] = f_law.get(fld.min_local_time(), 0) + 1
        g_law[fld.once_visited()] = g_law.get(fld.once_visited(), 0) + 1
    tot = 2**n
    return ({k: Fraction(v, tot) for k, v in f_law.items()}, {k: Fraction(v, tot) for k, v in g_law.items()})


@pytest.mark.parametrize("n", [1, 2, 5, 9, 12])
def test_enumeration_matches_field(n):
    f_law, g_law = _brute(n)
    assert enumerate_f(n).as_dict() == dict(sorted(f_law.items()))
    assert enumerate_g1(n).as_dict() == dict(sorted(g_law.items()))


def test_g1_mean_is_two():
    for n in range(1, 17):
        assert enumerate_g1_mean(n) == 2


def test_f3():
    assert enumerate_f(3).as_dict() == {1: Fraction(3, 4), 2: Fraction(1, 4)}


def test_threads_do_not_change_result():
    assert enumerate_g1(14, threads=1).as_dict() == enumerate_g1(14, threads=4).as_dict()


def test_tau_cdf():
    cdf = enumerate_tau_cdf(8, 2)
    assert cdf[3] == Fraction(1, 4) and cdf[0] == 0
    assert all(a <= b for a, b in zip(cdf, cdf[1:]))
    assert enumerate_tau_cdf(4, 1)[1] == 1


def test_enumeration_limits():
    with pytest.raises(ValueError):
        enumerate_f(0)
    with pytest.raises(ValueError):
        enumerate_f(25)


def test_dirichlet():
    assert hitting_solve(0, 10, 3) == pytest.approx(0.3, abs=1e-12)
    u = hitting_vector(-7, 20)
    assert dirichlet_residual(u) < 1e-12
    assert np.allclose(u, np.arange(28) / 27, atol=1e-12)
    with pytest.raises(ValueError):
        hitting_solve(0, 10, 11)
    with pytest.raises(ValueError):
        hitting_solve(3, 3, 3)
    assert hitting_vector(0, 1).tolist() == [0.0, 1.0]


@pytest.mark.parametrize("a,b,r", [(1, 1, 2), (3, 5, 4), (10, 20, 3), (30, 34, 7)])
def test_visit_tail_formula(a, b, r):
    exact = visit_tail(a + b, b, r)
    assert exact == (1 - Fraction(a + b, 2 * a * b)) ** (r - 1)
    assert abs(float(exact) - interior_visit_probability(a, b, r)) < 1e-12


def test_absorbing_distribution():
    d = absorbing_visit_distribution(10, 4, kmax=20)
    assert d.total() == 1
    p = return_probability(10, 4)
    assert d[1] == 1 - p and d[3] == p**2 * (1 - p)
    with pytest.raises(ValueError):
        absorbing_visit_distribution(65, 3)
    with pytest.raises(ValueError):
        return_probability(5, 5)


def test_min_visit_tail():
    assert min_visit_tail(1, 2) == Fraction(1, 4)
    for w in (3, 10, 50):
        assert float(min_visit_tail(w, 3)) == pytest.approx(visit_min_probability(w, 3))


def test_exact_distribution_validation_and_csv():
    with pytest.raises(ValueError):
        ExactDistribution({1: Fraction(1, 2)})
    d = ExactDistribution({1: Fraction(3, 4), 2: Fraction(1, 4)})
    assert d.mean() == Fraction(5, 4) and d.support == [1, 2]
    assert d.to_csv(3).splitlines() == ["n,k,value,numerator,denominator", "3,1,0.75,3,4", "3,2,0.25,1,4"]
    assert table_csv([(1, Fraction(1, 3))]).splitlines()[1].endswith(",1,3")
