"""Durations of (conditioned) simple-random-walk crossings, at any scale.

A walk conditioned through a harmonic function ``h`` (Doob transform) can be
advanced by *spheres*: from ``y`` take ``delta`` no larger than the distance to
either boundary, let the walk leave ``[y - delta, y + delta]``.  For the plain
walk the exit side is independent of the exit time; the transform only
reweights by ``h`` at the endpoints, so the conditioned exit side has law
``h(y +- delta) / (2 h(y))`` while the exit time keeps the unconditioned law.

Exit-time laws are exact (tabulated by dynamic programming) for
``delta <= EXACT_DELTA`` and use Brownian scaling ``delta**2 * tau_BM`` above.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from functools import lru_cache

import numba as nb
import numpy as np

from .rng import RandomStream

EXACT_DELTA = 32
_TAIL_EPS = 1e-17
_Q_BITS = 52


@nb.njit(cache=True)
def _exit_time_pmf(delta, eps):
    width = 2 * delta + 1
    p = np.zeros(width)
    q = np.zeros(width)
    p[delta] = 1.0
    out = np.zeros(64)
    alive = 1.0
    t = 0
    while alive > eps:
        t += 1
        q[:] = 0.0
        for i in range(1, width - 1):
            m = p[i]
            if m != 0.0:
                q[i - 1] += 0.5 * m
                q[i + 1] += 0.5 * m
        killed = q[0] + q[width - 1]
        q[0] = 0.0
        q[width - 1] = 0.0
        if t >= out.shape[0]:
            grown = np.zeros(2 * out.shape[0])
            grown[: out.shape[0]] = out
            out = grown
        out[t] = killed
        alive = q.sum()
        p, q = q, p
    return out[: t + 1]


@lru_cache(maxsize=None)
def lattice_exit_time_cdf(delta: int) -> np.ndarray:
    """CDF of the exit time of the walk from [-delta, delta] started at 0.

    Entry ``t`` is P(tau <= t); the (< 1e-17) tail mass is folded into the last entry.
    """
    if delta < 1:
        raise ValueError("delta must be >= 1")
    cdf = np.cumsum(_exit_time_pmf(delta, _TAIL_EPS))
    cdf /= cdf[-1]
    return cdf


@lru_cache(maxsize=1)
def _bm_exit_table():
    t = np.linspace(0.02, 60.0, 120001)
    k = np.arange(120)[:, None]
    terms = ((-1.0) ** k) / (2 * k + 1) * np.exp(-((2 * k + 1) ** 2) * (math.pi**2) * t / 8.0)
    survival = (4.0 / math.pi) * terms.sum(axis=0)
    cdf = np.clip(1.0 - survival, 0.0, 1.0)
    cdf = np.maximum.accumulate(cdf)
    return cdf, t


_U_LO = 1e-3
_U_HI = 1.0 - 1e-4
_GRID = 1 << 16


@lru_cache(maxsize=1)
def _bm_quantile_grid() -> list:
    cdf, t = _bm_exit_table()
    u = np.linspace(_U_LO, _U_HI, _GRID + 1)
    return np.interp(u, cdf, t).tolist()


def bm_exit_time_quantile(u: float) -> float:
    """Quantile of the exit time of Brownian motion from (-1, 1) started at 0."""
    if u > _U_HI:
        # leading eigenmode; the next term is smaller by exp(-pi^2 t) < 1e-30
        return (8.0 / math.pi**2) * math.log(4.0 / (math.pi * (1.0 - u)))
    if u < _U_LO:
        cdf, t = _bm_exit_table()
        return float(np.interp(u, cdf, t))
    grid = _bm_quantile_grid()
    pos = (u - _U_LO) * (_GRID / (_U_HI - _U_LO))
    i = min(int(pos), _GRID - 1)
    frac = pos - i
    return grid[i] + frac * (grid[i + 1] - grid[i])


@lru_cache(maxsize=None)
def _cdf_list(delta: int) -> list:
    return lattice_exit_time_cdf(delta).tolist()


def sample_exit_time(delta: int, rng: RandomStream) -> int:
    """Exit time of the walk from [y - delta, y + delta]."""
    if delta == 1:
        return 1
    u = rng.uniform()
    if delta <= EXACT_DELTA:
        return bisect_right(_cdf_list(delta), u)
    q = bm_exit_time_quantile(u)
    scaled = int(q * (1 << _Q_BITS))
    return (delta * delta * scaled) >> _Q_BITS


def conditioned_crossing_time(x: int, target: int, avoid: int, rng: RandomStream) -> int:
    """Duration of the walk from ``x`` conditioned to hit ``target`` before ``avoid``.

    ``x`` must lie between ``avoid`` (exclusive) and ``target`` (inclusive).
    Positions may be arbitrarily large Python ints.
    """
    if x == target:
        return 0
    if not (min(target, avoid) < x < max(target, avoid)) or avoid == x:
        raise ValueError(f"start {x} must lie strictly between avoid={avoid} and target={target}")
    sign = 1 if target > x else -1
    y = x
    elapsed = 0
    while y != target:
        d_t = abs(target - y)
        d_a = abs(y - avoid)
        delta = min(d_t, d_a)
        elapsed += sample_exit_time(delta, rng)
        # P(toward target) = h(y + sign*delta) / (2 h(y)) with h(z) = |z - avoid|
        k = rng.dyadic()
        if k * 2 * d_a <= (d_a + delta) << 53:
            y += sign * delta
        else:
            y -= sign * delta
    return elapsed
