"""Critical Galton-Watson process with Geometric(1/2) offspring and immigration 2,
and the edge-local-time picture it describes near a freshly hit minimum.

Offspring X has P(X = k) = 2^-(k+1).  A generation step is

    v' = X_1 + ... + X_v + 2.

A sum of v such variables is the number of 1-bits before the v-th 0-bit of
a fair bit stream, which ``_sum_geometrics`` reads a 64-bit word at a time.

Edge local times: after the minimum is hit and revisited r - 1 times, three
pieces of walk cross the edge (i-1, i) above it: one walk that never
returns (UP_FOREVER), r - 1 excursions back to the minimum, and the final
piece that runs to the top (HIT_TOP).  The total number of upcrossings v_i of
edge (i-1, i) then evolves as the branching process above.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass

import numba as nb
import numpy as np

from .conditioned import _up_move
from .rng import STATE_SIZE, RandomStream, _kernel, bernoulli_ratio, init_state, next_bit, next_open_double, next_u64
from .stats import ChiSquareResult, chi_square_gof

_M1 = np.uint64(0x5555555555555555)
_M2 = np.uint64(0x3333333333333333)
_M4 = np.uint64(0x0F0F0F0F0F0F0F0F)
_H01 = np.uint64(0x0101010101010101)


@nb.njit(inline="always")
def _popcount(x):
    x = x - ((x >> np.uint64(1)) & _M1)
    x = (x & _M2) + ((x >> np.uint64(2)) & _M2)
    x = (x + (x >> np.uint64(4))) & _M4
    return np.int64((x * _H01) >> np.uint64(56))


@_kernel
def offspring_bits(st):
    """Count of 1-bits before the first 0-bit."""
    k = 0
    while next_bit(st) == 1:
        k += 1
    return k


@_kernel
def offspring_inverse(st):
    """floor(-log2 U) for U uniform on (0, 1]."""
    u = next_open_double(st)
    return np.int64(math.floor(-math.log2(u)))


@_kernel
def _sum_geometrics(st, v):
    """Sum of v offspring draws; consumes exactly the bits ``offspring_bits`` would."""
    ones = 0
    need = v
    while need > 0:
        if st[12] == 0:
            st[11] = next_u64(st)
            st[12] = np.uint64(64)
        w = st[11]
        avail = np.int64(st[12])
        pc = _popcount(w)
        zeros = avail - pc
        if zeros < need:
            ones += pc
            need -= zeros
            st[11] = np.uint64(0)
            st[12] = np.uint64(0)
        else:
            while need > 0:
                if w & np.uint64(1):
                    ones += 1
                else:
                    need -= 1
                w = w >> np.uint64(1)
                avail -= 1
            st[11] = w
            st[12] = np.uint64(avail)
    return ones


def sample_offspring(rng: RandomStream, method: str = "bits") -> int:
    if method == "bits":
        return int(offspring_bits(rng.state))
    if method == "inverse":
        return int(offspring_inverse(rng.state))
    raise ValueError(f"unknown method {method!r}")


@nb.njit(cache=True)
def _offspring_batch(st, method, out):
    for i in range(out.shape[0]):
        out[i] = offspring_bits(st) if method == 0 else offspring_inverse(st)


def offspring_sample(n: int, rng: RandomStream, method: str = "bits") -> np.ndarray:
    if method not in ("bits", "inverse"):
        raise ValueError(f"unknown method {method!r}")
    out = np.empty(n, dtype=np.int64)
    _offspring_batch(rng.state, 0 if method == "bits" else 1, out)
    return out


def gw_step(v: int, rng: RandomStream) -> int:
    """v' = sum of v offspring + 2."""
    if v < 0:
        raise ValueError("v must be >= 0")
    return int(_sum_geometrics(rng.state, v)) + 2


@nb.njit(cache=True)
def _gw_step_batch(st, v, out):
    for i in range(out.shape[0]):
        out[i] = _sum_geometrics(st, v) + 2


def gw_step_sample(v: int, n: int, rng: RandomStream) -> np.ndarray:
    out = np.empty(n, dtype=np.int64)
    _gw_step_batch(rng.state, v, out)
    return out


# --- trajectories ---------------------------------------------------------------------


@dataclass(frozen=True)
class GWTrajectory:
    values: np.ndarray  # v_1..v_m
    r: int
    tau: int | None  # 1-based index of the first v_k < r

    def supermartingale_trace(self) -> np.ndarray:
        return w_trace(self.values, self.r)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["i", "v_i"])
        for i, v in enumerate(self.values, start=1):
            w.writerow([i, int(v)])
        return buf.getvalue()


def first_below(values, r: int) -> int | None:
    """1-based index of the first value < r (index 1 excluded), or None."""
    v = np.asarray(values)
    hits = np.nonzero(v[1:] < r)[0]
    return int(hits[0]) + 2 if hits.size else None


def w_trace(values, r: int) -> np.ndarray:
    """W_j = v_j^-0.1 while no v_k < r has occurred for k <= j, then (r-1)^-0.1."""
    v = np.asarray(values, dtype=np.float64)
    out = v ** -0.1
    tau = first_below(values, r)
    if tau is not None:
        out[tau - 1 :] = (r - 1) ** -0.1
    return out


@nb.njit(cache=True)
def _trajectory(st, v1, horizon, out):
    out[0] = v1
    for i in range(1, horizon):
        out[i] = _sum_geometrics(st, out[i - 1]) + 2


def gw_trajectory(v1: int, horizon: int | None, r: int, rng: RandomStream) -> GWTrajectory:
    """v_1 = v1, ..., v_horizon (default horizon r^4)."""
    if v1 < 0 or r < 1:
        raise ValueError("need v1 >= 0 and r >= 1")
    if horizon is None:
        horizon = r**4
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    out = np.empty(horizon, dtype=np.int64)
    _trajectory(rng.state, v1, horizon, out)
    return GWTrajectory(out, r, first_below(out, r))


@nb.njit(cache=True)
def _supermartingale_batch(v1, horizon, r, seed, stream0, trials, taus, mean, m2):
    st = np.empty(STATE_SIZE, dtype=np.uint64)
    floor_w = (r - 1) ** -0.1
    for t in range(trials):
        init_state(st, np.uint64(seed), np.uint64(stream0 + t))
        v = v1
        w = v1**-0.1
        tau = -1
        for j in range(1, horizon):
            v = _sum_geometrics(st, v) + 2
            if tau < 0 and v < r:
                tau = j + 1
            w_next = floor_w if tau > 0 else v**-0.1
            d = w_next - w
            # Welford per index j
            delta = d - mean[j - 1]
            mean[j - 1] += delta / (t + 1)
            m2[j - 1] += delta * (d - mean[j - 1])
            w = w_next
        taus[t] = tau


@dataclass(frozen=True)
class SupermartingaleTrace:
    r: int
    horizon: int
    trials: int
    mean_increment: np.ndarray  # E[W_{j+1} - W_j], j = 1..horizon-1
    stderr: np.ndarray
    taus: np.ndarray  # -1 when no v_k < r within the horizon

    def worst_z(self) -> float:
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.where(self.stderr > 0, self.mean_increment / self.stderr, 0.0)
        return float(z.max())

    def p_tau_before(self, k: int) -> float:
        return float(np.mean((self.taus > 0) & (self.taus < k)))


def supermartingale_trace(r: int, trials: int, seed: int, horizon: int | None = None, v1: int | None = None,
                          stream0: int = 0) -> SupermartingaleTrace:
    horizon = r**4 if horizon is None else horizon
    v1 = r if v1 is None else v1
    if r < 2:
        raise ValueError("the W-trace needs r >= 2")
    taus = np.empty(trials, dtype=np.int64)
    mean = np.zeros(horizon - 1)
    m2 = np.zeros(horizon - 1)
    _supermartingale_batch(v1, horizon, r, seed, stream0, trials, taus, mean, m2)
    se = np.sqrt(m2 / (trials - 1) / trials)
    return SupermartingaleTrace(r, horizon, trials, mean, se, taus)


# --- edge local times ---------------------------------------------------------------


def edge_local_times(paths, base: int, window: int) -> np.ndarray:
    """v_i = upcrossings of edge (base+i-1, base+i) summed over ``paths``, i = 1..window."""
    total = np.zeros(window, dtype=np.int64)
    reach = 0
    for p in paths:
        o = np.asarray(p, dtype=np.int64) - base
        if o.min() < 0:
            raise ValueError("path goes below base")
        reach = max(reach, int(o.max()))
        up = o[1:][np.diff(o) == 1]
        total += np.bincount(up, minlength=window + 1)[1 : window + 1]
    if window > reach:
        raise ValueError(f"window {window} exceeds the paths' extent {reach}")
    return total


@_kernel
def _window_walk(st, kind, start, window, W, L, counts):
    """Run one component from offset ``start``; record upcrossings of edges 1..window.

    kind 0: UP_FOREVER (h = o), 1: plain excursion back to 0, 2: HIT_TOP (h = o + 1).
    Above the window the walk is resolved exactly: from c = window + 1 it either
    comes back to c - 1 before reaching W, or reaches W.  Returns True when the
    D event occurs (excursion reaching W, or a transient piece returning to
    offset L after W).
    """
    c = window + 1
    o = start
    while True:
        if o == c:
            # gambler's ruin in (c-1, W), reweighted by h
            if kind == 0:
                back = bernoulli_ratio(st, (W - c) * (c - 1), (W - c + 1) * c)
            elif kind == 1:
                back = bernoulli_ratio(st, W - c, W - c + 1)
            else:
                back = bernoulli_ratio(st, (W - c) * c, (W - c + 1) * (c + 1))
            if back:
                o = c - 1
                continue
            if kind == 1:
                return True
            if kind == 0:
                return bernoulli_ratio(st, L, W)
            return bernoulli_ratio(st, L + 1, W + 1)
        if kind == 1:
            up = True if o == 0 else next_bit(st) == 1
        else:
            up = _up_move(st, 0 if kind == 0 else 2, o, 0)
        if up:
            o += 1
            if o <= window:
                counts[o] += 1
        else:
            o -= 1
            if kind == 1 and o == 0:
                return False


@nb.njit(cache=True)
def _coupling_batch(r, W, window, keep, seed, stream0, trials, out, dflag):
    st = np.empty(STATE_SIZE, dtype=np.uint64)
    counts = np.zeros(window + 2, dtype=np.int64)
    L = window
    for t in range(trials):
        init_state(st, np.uint64(seed), np.uint64(stream0 + t))
        counts[:] = 0
        d = _window_walk(st, 0, 0, window, W, L, counts)
        for _ in range(r - 1):
            if d:
                break
            d = _window_walk(st, 1, 0, window, W, L, counts)
        if not d:
            d = _window_walk(st, 2, 0, window, W, L, counts)
        dflag[t] = d
        for i in range(keep):
            out[t, i] = counts[i + 1]


@dataclass(frozen=True)
class CouplingSample:
    r: int
    width: int
    window: int
    counts: np.ndarray  # (trials, keep): v_1..v_keep, valid where d_event is False
    d_event: np.ndarray

    @property
    def trials(self) -> int:
        return int(self.counts.shape[0])

    def clean(self) -> np.ndarray:
        return self.counts[~self.d_event]

    def d_frequency(self) -> tuple[float, float]:
        p = float(self.d_event.mean())
        return p, math.sqrt(max(p * (1 - p), 1e-300) / self.trials)

    def d_bound(self) -> float:
        return (2 * self.window + self.r) / self.width


def coupled_edge_local_times(r: int, width: int, trials: int, seed: int, *, window: int | None = None,
                             keep: int = 16, stream0: int = 0) -> CouplingSample:
    """Edge upcrossing counts v_1..v_keep of the three walk pieces above a
    minimum visited r times, with top at offset ``width``."""
    window = r**4 if window is None else window
    if r < 1 or window < 1 or width <= window + 1:
        raise ValueError("need r >= 1, window >= 1 and width > window + 1")
    keep = min(keep, window)
    out = np.zeros((trials, keep), dtype=np.int64)
    dflag = np.zeros(trials, dtype=np.bool_)
    _coupling_batch(r, width, window, keep, seed, stream0, trials, out, dflag)
    return CouplingSample(r, width, window, out, dflag)


def nb_pmf(v: int, kmax: int) -> np.ndarray:
    """P(X_1 + ... + X_v = k), k = 0..kmax: C(k+v-1, k) 2^-(k+v)."""
    k = np.arange(kmax + 1, dtype=np.float64)
    if v == 0:
        out = np.zeros(kmax + 1)
        out[0] = 1.0
        return out
    lg = np.vectorize(math.lgamma)
    logp = lg(k + v) - lg(k + 1) - math.lgamma(v) - (k + v) * math.log(2.0)
    return np.exp(logp)


def one_step_comparison(parent, child, alpha: float = 0.01) -> ChiSquareResult:
    """Pooled chi-square of observed ``child`` values against the mixture of
    gw_step(parent) laws over the observed parents."""
    parent = np.asarray(parent, dtype=np.int64)
    child = np.asarray(child, dtype=np.int64)
    kmax = int(child.max()) + 1
    expected = np.zeros(kmax + 2)
    vals, mult = np.unique(parent, return_counts=True)
    for v, m in zip(vals, mult):
        p = nb_pmf(int(v), kmax - 2)
        expected[2:kmax + 1] += m * p
        expected[kmax + 1] += m * max(0.0, 1.0 - p.sum())
    observed = np.bincount(child, minlength=kmax + 2).astype(np.float64)
    return chi_square_gof(observed, expected, alpha=alpha)


def comparison_report(sample: CouplingSample, alpha: float = 0.01, edges=(1,)) -> dict:
    """Chi-square of v_{i+1} | v_i against gw_step for each i in ``edges``."""
    clean = sample.clean()
    p_d, se_d = sample.d_frequency()
    out = {
        "r": sample.r,
        "width": sample.width,
        "window": sample.window,
        "trials": sample.trials,
        "d_frequency": p_d,
        "d_stderr": se_d,
        "d_bound": sample.d_bound(),
        "d_within_bound": p_d <= sample.d_bound() + 3 * se_d,
        "tests": {},
    }
    for i in edges:
        if i >= clean.shape[1]:
            continue
        res = one_step_comparison(clean[:, i - 1], clean[:, i], alpha)
        out["tests"][str(i)] = res.to_dict()
    return out


def report_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True, default=float)


__all__ = [
    "CouplingSample",
    "GWTrajectory",
    "SupermartingaleTrace",
    "comparison_report",
    "coupled_edge_local_times",
    "edge_local_times",
    "first_below",
    "gw_step",
    "gw_step_sample",
    "gw_trajectory",
    "nb_pmf",
    "offspring_sample",
    "one_step_comparison",
    "report_json",
    "sample_offspring",
    "supermartingale_trace",
    "w_trace",
]
