import math

import numpy as np
import pytest

from rarevisit.gw import (
    coupled_edge_local_times,
    comparison_report,
    edge_local_times,
    first_below,
    gw_step,
    gw_step_sample,
    gw_trajectory,
    nb_pmf,
    offspring_sample,
    one_step_comparison,
    report_json,
    sample_offspring,
    supermartingale_trace,
    w_trace,
)
from rarevisit.rng import RandomStream
from rarevisit.stats import chi_square_gof, chi_square_homogeneity


def test_offspring_law():
    n = 10**6
    x = offspring_sample(n, RandomStream(1))
    for k, p in ((0, 0.5), (2, 0.125)):
        assert abs((x == k).mean() - p) <= 3 * math.sqrt(p * (1 - p) / n)
    assert abs(x.mean() - 1) <= 3 * math.sqrt(2 / n)
    v = x.var()
    # Var of the sample variance: (mu4 - sigma^4) / n with mu4 = 38 for this law
    assert abs(v - 2) <= 3 * math.sqrt((38 - 4) / n)


def test_offspring_methods_agree():
    a = offspring_sample(200_000, RandomStream(2), method="bits")
    b = offspring_sample(200_000, RandomStream(3), method="inverse")
    m = int(max(a.max(), b.max())) + 1
    assert not chi_square_homogeneity(np.bincount(a, minlength=m), np.bincount(b, minlength=m)).reject
    assert sample_offspring(RandomStream(4)) >= 0
    with pytest.raises(ValueError):
        sample_offspring(RandomStream(4), method="nope")


def test_gw_step_basics():
    rs = RandomStream(5)
    assert all(gw_step(0, rs) == 2 for _ in range(50))
    for v in (5, 50, 500):
        x = gw_step_sample(v, 100_000, RandomStream(6, v))
        assert x.min() >= 2
        assert abs(x.mean() - (v + 2)) <= 3 * math.sqrt(2 * v / 100_000)


def test_gw_step_matches_negative_binomial():
    x = gw_step_sample(7, 100_000, RandomStream(7))
    km = int(x.max())
    p = np.zeros(km + 2)
    p[2:] = nb_pmf(7, km - 1)
    assert not chi_square_gof(np.bincount(x, minlength=km + 2), p).reject


def test_large_drop_is_rare():
    # mean 202, sd 20: halving is a 5 sigma event
    x = gw_step_sample(200, 10**5, RandomStream(8))
    assert (x <= 100).mean() < 1e-4
    assert abs(x.mean() - 202) < 3 * 20 / np.sqrt(10**5)


def test_trajectory_and_tau():
    tr = gw_trajectory(4, 200, 4, RandomStream(9))
    assert tr.values[0] == 4 and np.all(tr.values[1:] >= 2)
    assert tr.tau == first_below(tr.values, 4)
    if tr.tau is not None:
        assert tr.values[tr.tau - 1] < 4 and np.all(tr.values[1 : tr.tau - 1] >= 4)
    assert gw_trajectory(3, None, 3, RandomStream(1)).values.shape == (81,)
    assert tr.to_csv().splitlines()[0] == "i,v_i"


def test_r1_tau_never_fires():
    for s in range(50):
        assert gw_trajectory(1, 100, 1, RandomStream(10, s)).tau is None


def test_w_trace_floor_after_tau():
    vals = np.array([4, 5, 2, 9, 12])
    w = w_trace(vals, 4)
    assert np.allclose(w[2:], 3**-0.1) and w[0] == pytest.approx(4**-0.1)


def test_supermartingale_small():
    tr = supermartingale_trace(3, 20_000, seed=11)
    assert tr.worst_z() <= 3
    assert tr.mean_increment.shape == (80,)
    assert 0 <= tr.p_tau_before(81) <= 1


def test_tau_monotone_in_r_on_shared_randomness():
    """Raising r cannot make tau fire later on the same trajectory."""
    for s in range(200):
        vals = gw_trajectory(6, 300, 6, RandomStream(12, s)).values
        taus = [first_below(vals, r) for r in (3, 4, 5, 6)]
        t = [10**9 if x is None else x for x in taus]
        assert t == sorted(t, reverse=True)


def test_edge_local_times():
    exc = np.array([0, 1, 0])
    assert edge_local_times([exc], 0, 1).tolist() == [1]
    paths = [np.array([0, 1, 2, 1, 0]), np.array([0, 1, 2, 3])]
    assert edge_local_times(paths, 0, 3).tolist() == [2, 2, 1]
    with pytest.raises(ValueError):
        edge_local_times([exc], 0, 2)
    with pytest.raises(ValueError):
        edge_local_times([np.array([0, -1, 0])], 0, 1)


def test_nb_pmf():
    p = nb_pmf(3, 200)
    assert p.sum() == pytest.approx(1.0)
    assert p[0] == pytest.approx(1 / 8)
    assert nb_pmf(0, 4).tolist() == [1.0, 0, 0, 0, 0]


def test_coupling_small():
    sample = coupled_edge_local_times(2, 400, 4000, seed=13)
    clean = sample.clean()
    assert np.all(clean[:, 0] >= 2)
    rep = comparison_report(sample, edges=(1, 2))
    assert rep["tests"]["1"]["decision"] == "accept"
    assert rep["d_within_bound"]
    assert '"d_bound"' in report_json(rep)
    res = one_step_comparison(clean[:, 0], clean[:, 1])
    assert res.dof >= 1
