"""Monte Carlo estimates and chi-square tests shared by all experiments."""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from statistics import NormalDist
from typing import Callable

import numpy as np

from .rng import RandomStream

# upper-tail chi-square quantiles, dof = 1..64
_CHI2_TABLE = {
    0.05: [3.8415, 5.9915, 7.8147, 9.4877, 11.0705, 12.5916, 14.0671, 15.5073, 16.919, 18.307, 19.6751, 21.0261, 22.362, 23.6848, 24.9958, 26.2962, 27.5871, 28.8693, 30.1435, 31.4104, 32.6706, 33.9244, 35.1725, 36.415, 37.6525, 38.8851, 40.1133, 41.3371, 42.557, 43.773, 44.9853, 46.1943, 47.3999, 48.6024, 49.8018, 50.9985, 52.1923, 53.3835, 54.5722, 55.7585, 56.9424, 58.124, 59.3035, 60.4809, 61.6562, 62.8296, 64.0011, 65.1708, 66.3386, 67.5048, 68.6693, 69.8322, 70.9935, 72.1532, 73.3115, 74.4683, 75.6237, 76.7778, 77.9305, 79.0819, 80.2321, 81.381, 82.5287, 83.6753],
    0.01: [6.6349, 9.2103, 11.3449, 13.2767, 15.0863, 16.8119, 18.4753, 20.0902, 21.666, 23.2093, 24.725, 26.217, 27.6882, 29.1412, 30.5779, 31.9999, 33.4087, 34.8053, 36.1909, 37.5662, 38.9322, 40.2894, 41.6384, 42.9798, 44.3141, 45.6417, 46.9629, 48.2782, 49.5879, 50.8922, 52.1914, 53.4858, 54.7755, 56.0609, 57.3421, 58.6192, 59.8925, 61.1621, 62.4281, 63.6907, 64.9501, 66.2062, 67.4593, 68.7095, 69.9568, 71.2014, 72.4433, 73.6826, 74.9195, 76.1539, 77.386, 78.6158, 79.8433, 81.0688, 82.2921, 83.5134, 84.7328, 85.9502, 87.1657, 88.3794, 89.5913, 90.8015, 92.01, 93.2169],
    0.001: [10.8276, 13.8155, 16.2662, 18.4668, 20.515, 22.4577, 24.3219, 26.1245, 27.8772, 29.5883, 31.2641, 32.9095, 34.5282, 36.1233, 37.6973, 39.2524, 40.7902, 42.3124, 43.8202, 45.3147, 46.797, 48.2679, 49.7282, 51.1786, 52.6197, 54.052, 55.476, 56.8923, 58.3012, 59.7031, 61.0983, 62.4872, 63.8701, 65.2472, 66.6188, 67.9852, 69.3465, 70.7029, 72.0547, 73.402, 74.7449, 76.0838, 77.4186, 78.7495, 80.0767, 81.4003, 82.7204, 84.0371, 85.3506, 86.6608, 87.968, 89.2722, 90.5734, 91.8718, 93.1675, 94.4605, 95.751, 97.0388, 98.3242, 99.6072, 100.8879, 102.1662, 103.4424, 104.7163],
}

MIN_EXPECTED = 5.0


def chi_square_critical(dof: int, alpha: float = 0.01) -> float:
    """Upper-tail quantile: table for dof <= 64, Wilson-Hilferty beyond (or for other alphas)."""
    if dof < 1:
        raise ValueError("dof must be >= 1")
    if alpha in _CHI2_TABLE and dof <= 64:
        return _CHI2_TABLE[alpha][dof - 1]
    z = NormalDist().inv_cdf(1.0 - alpha)
    c = 2.0 / (9.0 * dof)
    return dof * (1.0 - c + z * math.sqrt(c)) ** 3


def chi_square_sf(stat: float, dof: int) -> float:
    """Approximate upper-tail probability (Wilson-Hilferty)."""
    if stat <= 0:
        return 1.0
    c = 2.0 / (9.0 * dof)
    z = ((stat / dof) ** (1.0 / 3.0) - (1.0 - c)) / math.sqrt(c)
    return 1.0 - NormalDist().cdf(z)


class RunningStats:
    """Streaming mean and variance (Welford), mergeable (Chan et al.)."""

    def __init__(self):
        self.n = 0
        self.mean = 0.0
        self._m2 = 0.0

    def push(self, x: float) -> None:
        self.n += 1
        d = x - self.mean
        self.mean += d / self.n
        self._m2 += d * (x - self.mean)

    def extend(self, xs) -> None:
        for x in xs:
            self.push(float(x))

    def merge(self, other: "RunningStats") -> "RunningStats":
        out = RunningStats()
        out.n = self.n + other.n
        if out.n == 0:
            return out
        d = other.mean - self.mean
        out.mean = self.mean + d * other.n / out.n
        out._m2 = self._m2 + other._m2 + d * d * self.n * other.n / out.n
        return out

    @property
    def variance(self) -> float:
        return self._m2 / (self.n - 1) if self.n > 1 else 0.0

    @property
    def stderr(self) -> float:
        return math.sqrt(self.variance / self.n) if self.n > 0 else math.nan


@dataclass(frozen=True)
class ExperimentResult:
    estimate: float
    stderr: float
    ci_low: float
    ci_high: float
    trials: int
    seed: int
    level: float = 0.99

    def z(self, truth: float) -> float:
        """Standardized distance from ``truth`` (inf if stderr is 0 and they differ)."""
        diff = self.estimate - truth
        if self.stderr == 0:
            return 0.0 if abs(diff) < 1e-15 else math.inf
        return diff / self.stderr

    def within(self, truth: float, k: float = 3.0) -> bool:
        return abs(self.z(truth)) <= k


def _interval(mean: float, se: float, level: float) -> tuple[float, float]:
    z = NormalDist().inv_cdf(0.5 + level / 2.0)
    return mean - z * se, mean + z * se


def summarize(samples, seed: int = 0, level: float = 0.99) -> ExperimentResult:
    """Mean, stderr = sd / sqrt(n) and a normal CI of a sample array."""
    x = np.asarray(samples, dtype=np.float64)
    n = x.shape[0]
    if n < 2:
        raise ValueError("need at least 2 samples")
    rs = RunningStats()
    # chunked merge keeps this fast and stable for 10^7+ samples
    for chunk in np.array_split(x, max(1, n // 65536)):
        part = RunningStats()
        part.n = chunk.shape[0]
        part.mean = float(chunk.mean())
        part._m2 = float(((chunk - part.mean) ** 2).sum())
        rs = rs.merge(part)
    se = rs.stderr
    lo, hi = _interval(rs.mean, se, level)
    return ExperimentResult(rs.mean, se, min(lo, rs.mean), max(hi, rs.mean), n, seed, level)


def mc_estimate(
    experiment: Callable[[RandomStream], float],
    trials: int,
    seed: int,
    level: float = 0.99,
    threads: int = 1,
    stream0: int = 0,
) -> ExperimentResult:
    """Run ``experiment`` on streams (seed, stream0 + t) for t < trials.

    Results land in a buffer indexed by trial, so the estimate does not depend
    on ``threads`` or on scheduling.
    """
    if trials < 2:
        raise ValueError("trials must be >= 2")
    out = np.empty(trials, dtype=np.float64)

    def run(t: int) -> None:
        out[t] = experiment(RandomStream(seed, stream0 + t))

    if threads <= 1:
        for t in range(trials):
            run(t)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(run, range(trials), chunksize=max(1, trials // (16 * threads))))
    return summarize(out, seed=seed, level=level)


@dataclass(frozen=True)
class ChiSquareResult:
    statistic: float
    dof: int
    critical: float
    alpha: float
    reject: bool
    p_value: float
    bins: int

    def to_dict(self) -> dict:
        return {**asdict(self), "decision": "reject" if self.reject else "accept"}


def merge_bins(observed, expected, min_expected: float = MIN_EXPECTED):
    """Merge adjacent bins until every expected count is >= ``min_expected``."""
    obs_out = []
    exp_out = []
    o_acc = 0.0
    e_acc = 0.0
    for o, e in zip(observed, expected):
        o_acc += o
        e_acc += e
        if e_acc >= min_expected:
            obs_out.append(o_acc)
            exp_out.append(e_acc)
            o_acc = e_acc = 0.0
    if e_acc > 0 or o_acc > 0:
        if exp_out:
            obs_out[-1] += o_acc
            exp_out[-1] += e_acc
        else:
            obs_out.append(o_acc)
            exp_out.append(e_acc)
    return np.array(obs_out), np.array(exp_out)


def chi_square_gof(observed, expected, alpha: float = 0.01, min_expected: float = MIN_EXPECTED) -> ChiSquareResult:
    """Pearson goodness of fit of ``observed`` counts against bin probabilities ``expected``.

    ``expected`` may also be expected counts; it is rescaled to the observed total.
    """
    obs = np.asarray(observed, dtype=np.float64)
    p = np.asarray(expected, dtype=np.float64)
    if obs.shape != p.shape:
        raise ValueError("observed and expected must have the same length")
    total = obs.sum()
    if total <= 0:
        raise ValueError("no observations")
    if np.any(p < 0) or p.sum() <= 0:
        raise ValueError("expected must be non-negative and not all zero")
    e = p / p.sum() * total
    o_m, e_m = merge_bins(obs, e, min_expected)
    if len(o_m) < 2:
        raise ValueError("fewer than 2 bins after merging")
    stat = float(((o_m - e_m) ** 2 / e_m).sum())
    dof = len(o_m) - 1
    crit = chi_square_critical(dof, alpha)
    return ChiSquareResult(stat, dof, crit, alpha, stat > crit, chi_square_sf(stat, dof), len(o_m))


def chi_square_homogeneity(counts_a, counts_b, alpha: float = 0.01) -> ChiSquareResult:
    """Two-sample test that two count vectors over the same bins share one law."""
    a = np.asarray(counts_a, dtype=np.float64)
    b = np.asarray(counts_b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError("count vectors differ in length")
    na, nb_ = a.sum(), b.sum()
    if na <= 0 or nb_ <= 0:
        raise ValueError("empty sample")
    pooled = a + b
    # merge on the smaller sample's expected counts
    scale = min(na, nb_) / (na + nb_)
    groups = []
    cur = []
    acc = 0.0
    for i, c in enumerate(pooled):
        cur.append(i)
        acc += c * scale
        if acc >= MIN_EXPECTED:
            groups.append(cur)
            cur = []
            acc = 0.0
    if cur:
        if groups:
            groups[-1].extend(cur)
        else:
            groups.append(cur)
    if len(groups) < 2:
        raise ValueError("fewer than 2 bins after merging")
    ga = np.array([a[g].sum() for g in groups])
    gb = np.array([b[g].sum() for g in groups])
    tot = ga + gb
    ea = tot * na / (na + nb_)
    eb = tot * nb_ / (na + nb_)
    stat = float(((ga - ea) ** 2 / ea).sum() + ((gb - eb) ** 2 / eb).sum())
    dof = len(groups) - 1
    crit = chi_square_critical(dof, alpha)
    return ChiSquareResult(stat, dof, crit, alpha, stat > crit, chi_square_sf(stat, dof), len(groups))


@dataclass
class ResultRecord:
    experiment: str
    params: dict
    estimate: float | None
    stderr: float | None
    ci: list | None
    trials: int
    seed: int
    passed: bool
    extra: dict = field(default_factory=dict)

    def to_json(self) -> str:
        d = {
            "experiment": self.experiment,
            "params": self.params,
            "estimate": self.estimate,
            "stderr": self.stderr,
            "ci": self.ci,
            "trials": self.trials,
            "seed": self.seed,
            "pass": self.passed,
        }
        if self.extra:
            d["details"] = self.extra
        return json.dumps(d, sort_keys=True, default=_jsonable, indent=2)


def _jsonable(x):
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, np.bool_):
        return bool(x)
    raise TypeError(f"not JSON serializable: {type(x).__name__}")


def record_from(result: ExperimentResult, experiment: str, params: dict, passed: bool, **extra) -> ResultRecord:
    return ResultRecord(
        experiment=experiment,
        params=params,
        estimate=result.estimate,
        stderr=result.stderr,
        ci=[result.ci_low, result.ci_high],
        trials=result.trials,
        seed=result.seed,
        passed=passed,
        extra=extra,
    )


def proportion(successes: int, trials: int, seed: int = 0, level: float = 0.99) -> ExperimentResult:
    """Bernoulli frequency with its binomial stderr."""
    if trials < 2:
        raise ValueError("trials must be >= 2")
    p = successes / trials
    se = math.sqrt(p * (1 - p) / (trials - 1))
    lo, hi = _interval(p, se, level)
    return ExperimentResult(p, se, min(lo, p), max(hi, p), trials, seed, level)


__all__ = [
    "ChiSquareResult",
    "ExperimentResult",
    "ResultRecord",
    "RunningStats",
    "chi_square_critical",
    "chi_square_gof",
    "chi_square_homogeneity",
    "chi_square_sf",
    "mc_estimate",
    "merge_bins",
    "proportion",
    "record_from",
    "summarize",
]
