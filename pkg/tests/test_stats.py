import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats as sps

from rarevisit.gw import offspring_sample
from rarevisit.rng import RandomStream
from rarevisit.stats import (
    _CHI2_TABLE,
    ResultRecord,
    RunningStats,
    chi_square_critical,
    chi_square_gof,
    chi_square_homogeneity,
    chi_square_sf,
    mc_estimate,
    merge_bins,
    proportion,
    record_from,
    summarize,
)
from rarevisit.walk import hit_upper_batch


def test_constant_experiment():
    res = mc_estimate(lambda rng: 3.5, 100, seed=1)
    assert res.estimate == 3.5 and res.stderr == 0
    assert res.ci_low == res.ci_high == 3.5
    with pytest.raises(ValueError):
        mc_estimate(lambda rng: 1.0, 1, seed=1)


def test_fair_coin():
    res = mc_estimate(lambda rng: float(rng.bit()), 10_000, seed=2)
    assert abs(res.estimate - 0.5) <= 0.015
    assert res.stderr == pytest.approx(0.005, rel=0.02)
    assert res.ci_low <= res.estimate <= res.ci_high


def test_thread_count_does_not_matter():
    def exp(rng):
        return rng.uniform() + rng.below(5)

    a = mc_estimate(exp, 3000, seed=3, threads=1)
    b = mc_estimate(exp, 3000, seed=3, threads=4)
    assert a == b


def test_running_stats_merge():
    x = np.random.default_rng(0).normal(size=1001)
    a = RunningStats()
    a.extend(x[:400])
    b = RunningStats()
    b.extend(x[400:])
    m = a.merge(b)
    assert m.n == 1001
    assert m.mean == pytest.approx(x.mean())
    assert m.variance == pytest.approx(x.var(ddof=1))
    assert m.stderr == pytest.approx(x.std(ddof=1) / math.sqrt(1001))


def test_summarize_large_offset_stable():
    x = 1e9 + np.random.default_rng(1).random(200_000)
    res = summarize(x)
    assert res.stderr == pytest.approx(x.std(ddof=1) / math.sqrt(x.size), rel=1e-6)


def test_chi_square_examples():
    assert chi_square_gof([10, 20, 30], [1, 2, 3]).statistic == 0
    res = chi_square_gof([10, 20], [0.5, 0.5])
    assert res.statistic == pytest.approx(10 / 3) and res.dof == 1
    with pytest.raises(ValueError):
        chi_square_gof([100, 1], [0.999, 0.001])
    with pytest.raises(ValueError):
        chi_square_gof([0, 0], [0.5, 0.5])


@given(st.lists(st.integers(5, 200), min_size=2, max_size=8), st.randoms())
@settings(max_examples=50, deadline=None)
def test_chi_square_permutation_invariant(obs, rnd):
    exp = [1.0 / len(obs)] * len(obs)
    if sum(obs) / len(obs) < 5:
        return
    perm = list(range(len(obs)))
    rnd.shuffle(perm)
    a = chi_square_gof(obs, exp)
    b = chi_square_gof([obs[i] for i in perm], exp)
    assert a.statistic == pytest.approx(b.statistic)


def test_merge_bins():
    o, e = merge_bins([5, 3, 1, 1], [6.0, 2.0, 2.0, 1.0])
    assert e.min() >= 5 and o.sum() == 10 and e.sum() == 11


@pytest.mark.parametrize("alpha", [0.05, 0.01, 0.001])
def test_table_matches_scipy(alpha):
    for dof in range(1, 65):
        assert _CHI2_TABLE[alpha][dof - 1] == pytest.approx(sps.chi2.isf(alpha, dof), abs=1e-3)
    for dof in (80, 200, 1000):
        assert chi_square_critical(dof, alpha) == pytest.approx(sps.chi2.isf(alpha, dof), rel=0.01)


def test_sf_rough():
    for dof, x in ((3, 7.8), (10, 23.2), (40, 60.0)):
        assert chi_square_sf(x, dof) == pytest.approx(sps.chi2.sf(x, dof), abs=0.01)


def test_homogeneity():
    a = np.array([100, 200, 300])
    assert not chi_square_homogeneity(a, a * 2).reject
    assert chi_square_homogeneity([300, 100, 100], [100, 100, 300]).reject


def test_ruin_ci_coverage():
    """99% CIs of the ruin frequency at (0, 10, 3) cover 0.3 in >= 99 of 100 runs."""
    cover = 0
    for rep in range(100):
        hits = hit_upper_batch(3, 0, 10, 100_000, seed=1000 + rep)
        res = proportion(int(hits.sum()), 100_000, level=0.99)
        cover += res.ci_low <= 0.3 <= res.ci_high
    assert cover >= 99


def test_ci_calibration():
    """99% CIs cover the truth in 99% +- 1% of 10^4 meta-repetitions."""
    n = 1000
    hits = hit_upper_batch(3, 0, 10, n * 10_000, seed=77)
    succ = hits.reshape(10_000, n).sum(axis=1)
    cover = 0
    for s in succ:
        res = proportion(int(s), n, level=0.99)
        cover += res.ci_low <= 0.3 <= res.ci_high
    assert 0.98 <= cover / 10_000 <= 1.0


def test_offspring_gof_calibration():
    """chi-square at 0.01 accepts the offspring sampler in >= 95 of 100 seeded runs."""
    probs = np.array([2.0 ** -(k + 1) for k in range(40)])
    probs[-1] += 2.0**-40
    accept = 0
    for rep in range(100):
        x = offspring_sample(10**6, RandomStream(500, rep))
        counts = np.bincount(np.minimum(x, 39), minlength=40)
        accept += not chi_square_gof(counts, probs, alpha=0.01).reject
    assert accept >= 95


def test_result_record_json():
    res = proportion(30, 100, seed=4)
    rec = record_from(res, "demo", {"trials": 100}, True, note=np.int64(3))
    d = json.loads(rec.to_json())
    assert set(d) == {"experiment", "params", "estimate", "stderr", "ci", "trials", "seed", "pass", "details"}
    assert d["pass"] is True and d["details"]["note"] == 3
    assert isinstance(ResultRecord("x", {}, None, None, None, 2, 0, False).to_json(), str)
