"""Exact small-scale ground truth: path enumeration, Dirichlet solves and
absorbing-chain visit laws.

Enumeration walks all 2^n sign sequences depth first, updating one local-time
array and undoing on the way back, so memory stays O(n).  Results are counts
over 2^n paths and are turned into exact dyadic fractions.
"""

from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction

import numba as nb
import numpy as np
from scipy.linalg import solve_banded

MAX_ENUM_STEPS = 24
MAX_CHAIN_WIDTH = 64


@dataclass(frozen=True)
class ExactDistribution:
    """Finite law with exact rational masses."""

    probs: dict

    def __post_init__(self):
        if sum(self.probs.values(), Fraction(0)) != 1:
            raise ValueError("probabilities do not sum to 1")

    @classmethod
    def from_counts(cls, counts, n_paths: int) -> "ExactDistribution":
        return cls({int(k): Fraction(int(c), n_paths) for k, c in enumerate(counts) if c})

    @property
    def support(self) -> list:
        return sorted(self.probs)

    def __getitem__(self, k) -> Fraction:
        return self.probs.get(k, Fraction(0))

    def mean(self) -> Fraction:
        return sum((k * p for k, p in self.probs.items()), Fraction(0))

    def total(self) -> Fraction:
        return sum(self.probs.values(), Fraction(0))

    def as_dict(self) -> dict:
        return {k: self.probs[k] for k in self.support}

    def to_csv(self, n: int | str = "") -> str:
        return table_csv([(n, k, p) for k, p in self.as_dict().items()], header=("n", "k", "value", "numerator", "denominator"))


def table_csv(rows, header=("n", "value", "numerator", "denominator")) -> str:
    """Rows of (..., Fraction) -> CSV with the float and the exact numerator/denominator."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        *keys, q = row
        q = Fraction(q)
        w.writerow([*keys, repr(float(q)), q.numerator, q.denominator])
    return buf.getvalue()


# --- path enumeration ------------------------------------------------------------------


@nb.njit(cache=True, nogil=True)
def _enumerate(n, prefix, k, r, hist_f, hist_g1, hist_tau):
    """All continuations of the k-step ``prefix`` (bit i = step i, 1 = up) to n steps.

    Fills histograms of f(n), g_1(n) and of tau_r (index n + 1 collects tau_r > n).
    """
    off = n + 1
    counts = np.zeros(2 * n + 3, dtype=np.int64)
    pos = np.zeros(n + 1, dtype=np.int64)
    lo = np.zeros(n + 1, dtype=np.int64)
    hi = np.zeros(n + 1, dtype=np.int64)
    tau = np.zeros(n + 1, dtype=np.int64)
    choice = np.full(n + 1, -1, dtype=np.int64)
    pos[0] = off
    lo[0] = off
    hi[0] = off
    counts[off] = 1
    tau[0] = 0 if r <= 1 else n + 1
    d = 0
    while True:
        if d == n:
            fmin = n + 2
            g1 = 0
            for x in range(lo[d], hi[d] + 1):
                c = counts[x]
                if c < fmin:
                    fmin = c
                if c == 1:
                    g1 += 1
            hist_f[fmin] += 1
            hist_g1[g1] += 1
            hist_tau[tau[d]] += 1
            counts[pos[d]] -= 1
            d -= 1
            continue
        if d < k:
            # forced prefix step; a second visit means the prefix is done
            if choice[d] >= 0:
                if d == 0:
                    break
                counts[pos[d]] -= 1
                d -= 1
                continue
            c = (prefix >> d) & 1
        else:
            c = choice[d] + 1
            if c > 1:
                if d == 0:
                    break
                counts[pos[d]] -= 1
                d -= 1
                continue
        choice[d] = c
        nxt = pos[d] + 2 * c - 1
        pos[d + 1] = nxt
        counts[nxt] += 1
        lo[d + 1] = min(lo[d], nxt)
        hi[d + 1] = max(hi[d], nxt)
        tau[d + 1] = tau[d]
        if tau[d] > n:
            fmin = n + 2
            for x in range(lo[d + 1], hi[d + 1] + 1):
                if counts[x] < fmin:
                    fmin = counts[x]
            if fmin >= r:
                tau[d + 1] = d + 1
        d += 1
        choice[d] = -1


def _run_enumeration(n: int, r: int = 2, threads: int = 1):
    if not 1 <= n <= MAX_ENUM_STEPS:
        raise ValueError(f"n must be in [1, {MAX_ENUM_STEPS}]")
    k = min(n, 4)
    size = n + 3

    def task(prefix: int):
        hf = np.zeros(size, dtype=np.int64)
        hg = np.zeros(size, dtype=np.int64)
        ht = np.zeros(size, dtype=np.int64)
        _enumerate(n, prefix, k, r, hf, hg, ht)
        return hf, hg, ht

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(task, range(1 << k)))
    else:
        parts = [task(p) for p in range(1 << k)]
    # fixed summation order keeps the result independent of scheduling
    hf = sum(p[0] for p in parts)
    hg = sum(p[1] for p in parts)
    ht = sum(p[2] for p in parts)
    return hf, hg, ht


def enumerate_f(n: int, threads: int = 1) -> ExactDistribution:
    """Exact law of the minimal local time f(n) over all 2^n paths."""
    hf, _, _ = _run_enumeration(n, threads=threads)
    return ExactDistribution.from_counts(hf, 1 << n)


def enumerate_g1(n: int, threads: int = 1) -> ExactDistribution:
    """Exact law of g_1(n), the number of sites visited exactly once."""
    _, hg, _ = _run_enumeration(n, threads=threads)
    return ExactDistribution.from_counts(hg, 1 << n)


def enumerate_g1_mean(n: int, threads: int = 1) -> Fraction:
    return enumerate_g1(n, threads).mean()


def enumerate_tau_cdf(n: int, r: int, threads: int = 1) -> list:
    """[P(tau_r <= m) for m = 0..n] with tau_r = first time f = r."""
    if r < 1:
        raise ValueError("r must be >= 1")
    _, _, ht = _run_enumeration(n, r=r, threads=threads)
    total = 1 << n
    cdf = np.cumsum(ht[: n + 1])
    return [Fraction(int(c), total) for c in cdf]


# --- Dirichlet problem on an interval ------------------------------------------------


def hitting_vector(lower: int, upper: int) -> np.ndarray:
    """u(x) = P_x(hit upper before lower) for x = lower..upper, by a banded solve."""
    if upper - lower < 1:
        raise ValueError("need lower < upper")
    m = upper - lower - 1
    u = np.zeros(upper - lower + 1)
    u[-1] = 1.0
    if m == 0:
        return u
    # interior rows: -u(x-1)/2 + u(x) - u(x+1)/2 = 0, boundary values moved right
    ab = np.zeros((3, m))
    ab[0, 1:] = -0.5
    ab[1, :] = 1.0
    ab[2, :-1] = -0.5
    rhs = np.zeros(m)
    rhs[-1] = 0.5
    u[1:-1] = solve_banded((1, 1), ab, rhs)
    return u


def dirichlet_residual(u: np.ndarray) -> float:
    """max |u(x) - (u(x-1) + u(x+1)) / 2| over interior points."""
    if u.shape[0] < 3:
        return 0.0
    return float(np.max(np.abs(u[1:-1] - 0.5 * (u[:-2] + u[2:]))))


def hitting_solve(lower: int, upper: int, start: int) -> float:
    """P(walk from ``start`` hits ``upper`` before ``lower``) from the linear system."""
    if not lower < upper:
        raise ValueError("degenerate interval")
    if not lower <= start <= upper:
        raise ValueError("start outside [lower, upper]")
    return float(hitting_vector(lower, upper)[start - lower])


# --- absorbing chains in exact arithmetic ------------------------------------------------


def _exact_hit_probability(length: int, start: int) -> Fraction:
    """P_start(hit ``length`` before 0) by exact Thomas elimination on 1..length-1."""
    if start <= 0:
        return Fraction(0)
    if start >= length:
        return Fraction(1)
    m = length - 1
    half = Fraction(1, 2)
    # -u(x-1)/2 + u(x) - u(x+1)/2 = b(x)
    c_prime = [Fraction(0)] * m
    d_prime = [Fraction(0)] * m
    for i in range(m):
        b = half if i == m - 1 else Fraction(0)
        denom = 1 - (-half) * (c_prime[i - 1] if i else 0)
        c_prime[i] = -half / denom
        d_prime[i] = (b + half * (d_prime[i - 1] if i else 0)) / denom
    u = [Fraction(0)] * m
    u[-1] = d_prime[-1]
    for i in range(m - 2, -1, -1):
        u[i] = d_prime[i] - c_prime[i] * u[i + 1]
    return u[start - 1]


def return_probability(width: int, site: int) -> Fraction:
    """P(walk at ``site`` comes back to it before absorption at 0 or ``width``)."""
    if not 0 < site < width:
        raise ValueError("site must be interior")
    # step up to site+1: come back before width
    up = 1 - _exact_hit_probability(width - site, 1)
    # step down to site-1: come back before 0
    down = _exact_hit_probability(site, site - 1)
    return Fraction(1, 2) * up + Fraction(1, 2) * down


def absorbing_visit_distribution(width: int, site: int, kmax: int = 64) -> ExactDistribution:
    """Law of the number of visits to ``site`` (counting the start) before
    absorption at 0 or ``width``; mass at ``kmax`` stands for >= kmax.
    """
    if width > MAX_CHAIN_WIDTH:
        raise ValueError(f"width must be <= {MAX_CHAIN_WIDTH}")
    if kmax < 1:
        raise ValueError("kmax must be >= 1")
    p = return_probability(width, site)
    probs = {}
    for k in range(1, kmax):
        m = p ** (k - 1) * (1 - p)
        if m:
            probs[k] = m
    tail = p ** (kmax - 1)
    if tail:
        probs[kmax] = tail
    return ExactDistribution(probs)


def visit_tail(width: int, site: int, r: int) -> Fraction:
    """P(visits >= r) = p^(r-1)."""
    return return_probability(width, site) ** (r - 1)


def min_visit_tail(w: int, r: int) -> Fraction:
    """P(new minimum visited >= r times | walk reaches min + w + 1 before min - 1).

    Each visit the walk must step up and come back before the top; the
    conditioning cancels because the walk restarts from the minimum.
    """
    if w < 1 or r < 1:
        raise ValueError("need w, r >= 1")
    back = 1 - _exact_hit_probability(w + 1, 1)
    return (Fraction(1, 2) * back) ** (r - 1)


__all__ = [
    "ExactDistribution",
    "absorbing_visit_distribution",
    "dirichlet_residual",
    "enumerate_f",
    "enumerate_g1",
    "enumerate_g1_mean",
    "enumerate_tau_cdf",
    "hitting_solve",
    "hitting_vector",
    "min_visit_tail",
    "return_probability",
    "table_csv",
    "visit_tail",
]
