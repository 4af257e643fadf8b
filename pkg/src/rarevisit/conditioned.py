"""Closed-form hitting and visit probabilities, and samplers for the three
conditioned walks that appear around a crossing of width ``top - base``.

All three are Doob transforms of the simple walk, p(x, y) = h(y) / (2 h(x)),
written in offsets ``o = x - base``:

* UP_FOREVER        h(o) = o        never returns to base after leaving it
* RETURN_BEFORE_TOP h(o) = W - o    one excursion from base back to base, below top
* HIT_TOP           h(o) = o + 1    reaches top without touching base - 1

At the base every kernel forces the step up (the down neighbour has h = 0 or
is outside the excursion).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction

import numba as nb
import numpy as np

from .rng import STATE_SIZE, RandomStream, _kernel, bernoulli_ratio, init_state, next_bit


class Kind(enum.IntEnum):
    UP_FOREVER = 0
    RETURN_BEFORE_TOP = 1
    HIT_TOP = 2


UP_FOREVER = Kind.UP_FOREVER
RETURN_BEFORE_TOP = Kind.RETURN_BEFORE_TOP
HIT_TOP = Kind.HIT_TOP


# --- closed forms ------------------------------------------------------------------


def ruin_probability(lower: int, upper: int, start: int) -> float:
    """P(walk from ``start`` hits ``upper`` before ``lower``)."""
    if not (lower < upper and lower <= start <= upper):
        raise ValueError(f"need lower <= start <= upper and lower < upper, got {lower}, {upper}, {start}")
    return (start - lower) / (upper - lower)


def _geometric_tail(p: float, r: int) -> float:
    if r <= 1:
        return 1.0
    if p <= 0.0:
        return 0.0
    if r > 50:
        return math.exp((r - 1) * math.log(p))
    return p ** (r - 1)


def visit_min_probability(w: float, r: int) -> float:
    """P(the new minimum is visited >= r times before the walk reaches max + 1),
    for a crossing of width ``w`` = max - min.  ``w = inf`` gives 2^-(r-1)."""
    if w < 1 or r < 1:
        raise ValueError("need w >= 1 and r >= 1")
    p = 0.5 if math.isinf(w) else 0.5 * w / (w + 1)
    return _geometric_tail(p, r)


def interior_visit_probability(a: int, b: int, r: int, variant: int = 1) -> float:
    """P(a site at distance ``a`` below the top and ``b`` above the base is
    visited >= r times before absorption at either end).

    ``variant=2`` is the same count with the base moved one further down
    (b -> b + 1), as for the conditioned segment that may touch base itself.
    """
    if a < 1 or b < 1 or r < 1:
        raise ValueError("need a, b, r >= 1")
    if variant == 2:
        b += 1
    elif variant != 1:
        raise ValueError("variant must be 1 or 2")
    return _geometric_tail(1.0 - (a + b) / (2.0 * a * b), r)


def late_return_probability(W: int, L: int) -> float:
    """P(UP_FOREVER walk comes back to offset L after first reaching offset W)."""
    if not 1 <= L <= W:
        raise ValueError(f"need 1 <= L <= W, got L={L}, W={W}")
    return L / W


def y_martingale_mean(i: int) -> Fraction:
    """E[1 / o' | o = i] for the UP_FOREVER kernel, in exact arithmetic.

    Equals 1/i for i >= 2; at i = 1 the only move is up, giving 1/2.
    """
    if i < 1:
        raise ValueError("offset must be >= 1")
    k = ConditionedKernel(UP_FOREVER, 0)
    down, up = k.transition(i)
    out = up / (i + 1)
    if down:
        out += down / (i - 1)
    return out


# --- kernels ------------------------------------------------------------------------


@dataclass(frozen=True)
class ConditionedKernel:
    kind: Kind
    base: int
    top: int | None = None

    def __post_init__(self):
        if self.kind == RETURN_BEFORE_TOP and (self.top is None or self.top - self.base < 2):
            raise ValueError("RETURN_BEFORE_TOP needs top >= base + 2")
        if self.top is not None and self.top <= self.base:
            raise ValueError("top must exceed base")

    @property
    def width(self) -> int | None:
        return None if self.top is None else self.top - self.base

    def _h(self, o: int) -> int:
        if self.kind == UP_FOREVER:
            return max(o, 0)
        if self.kind == RETURN_BEFORE_TOP:
            return max(self.top - self.base - o, 0) if o >= 0 else 0
        return max(o + 1, 0)

    def transition(self, x: int) -> tuple[Fraction, Fraction]:
        """(P(down), P(up)) from site ``x`` as exact fractions."""
        o = x - self.base
        if o < 0 or (self.top is not None and x > self.top):
            raise ValueError(f"site {x} outside the kernel's range")
        if o == 0:
            return Fraction(0), Fraction(1)
        h = self._h(o)
        if h == 0:
            raise ValueError(f"site {x} is forbidden for {self.kind.name}")
        down = Fraction(self._h(o - 1), 2 * h)
        return down, 1 - down

    def up_probability(self, x: int) -> float:
        return float(self.transition(x)[1])

    def forbidden(self, x: int) -> bool:
        o = x - self.base
        if o < 0:
            return True
        if self.kind == RETURN_BEFORE_TOP:
            return x >= self.top
        return self.top is not None and x > self.top


@_kernel
def _up_move(st, kind, o, w):
    """One draw of the direction from offset o (True = up)."""
    if o == 0:
        return True
    if kind == 0:
        num = o + 1
        den = 2 * o
    elif kind == 1:
        num = w - o - 1
        den = 2 * (w - o)
    else:
        num = o + 2
        den = 2 * (o + 1)
    return bernoulli_ratio(st, num, den)


@nb.njit(cache=True)
def _push(buf, n, o):
    if n >= buf.shape[0]:
        grown = np.empty(2 * buf.shape[0], dtype=np.int64)
        grown[: buf.shape[0]] = buf
        buf = grown
    buf[n] = o
    return buf


@nb.njit(cache=True)
def _run_kernel(st, kind, w, max_steps):
    """Path in offsets from 0 until the terminal condition (empty if too long)."""
    buf = np.empty(1024, dtype=np.int64)
    buf[0] = 0
    o = 0
    n = 0
    while True:
        o += 1 if _up_move(st, kind, o, w) else -1
        n += 1
        if n > max_steps:
            return buf[:0]
        buf = _push(buf, n, o)
        if kind == 1:
            if o == 0:
                return buf[: n + 1]
        elif o == w:
            return buf[: n + 1]


@nb.njit(cache=True)
def _rejection_run(st, kind, w, max_steps):
    """Plain walk attempts until one satisfies the kernel's condition."""
    buf = np.empty(1024, dtype=np.int64)
    while True:
        o = 0
        n = 0
        buf[0] = 0
        if kind == 2:
            lo = -1
        else:
            # leave the base, then run the plain walk in (0, w)
            o = 1
            n = 1
            buf[1] = 1
            lo = 0
        while lo < o < w:
            o += 2 * next_bit(st) - 1
            n += 1
            if n > max_steps:
                return buf[:0]
            buf = _push(buf, n, o)
        if (kind == 1 and o == 0) or (kind != 1 and o == w):
            return buf[: n + 1]


def _check_width(kernel: ConditionedKernel) -> int:
    if kernel.top is None:
        raise ValueError("path sampling needs a finite top")
    return kernel.width


def sample_conditioned(kernel: ConditionedKernel, rng: RandomStream, max_steps: int = 1 << 28) -> np.ndarray:
    """One path of the conditioned walk from ``base``, as absolute positions.

    UP_FOREVER and HIT_TOP run until ``top``; RETURN_BEFORE_TOP runs one
    excursion until it is back at ``base``.
    """
    w = _check_width(kernel)
    out = _run_kernel(rng.state, int(kernel.kind), w, max_steps)
    if out.shape[0] == 0:
        raise RuntimeError(f"path longer than {max_steps} steps")
    return out + kernel.base


def sample_by_rejection(kernel: ConditionedKernel, rng: RandomStream, max_steps: int = 1 << 24) -> np.ndarray:
    """Same law as ``sample_conditioned`` via plain walks and rejection (width <= 32)."""
    w = _check_width(kernel)
    if w > 32:
        raise ValueError("rejection sampler is limited to width <= 32")
    out = _rejection_run(rng.state, int(kernel.kind), w, max_steps)
    if out.shape[0] == 0:
        raise RuntimeError(f"attempt longer than {max_steps} steps")
    return out + kernel.base


def edge_upcrossings(path: np.ndarray, base: int, width: int) -> np.ndarray:
    """Count of steps i-1 -> i for i = 1..width (offsets from ``base``)."""
    p = np.asarray(path, dtype=np.int64) - base
    up = p[1:][np.diff(p) == 1]
    return np.bincount(up, minlength=width + 1)[1 : width + 1]


# --- batch Monte Carlo kernels ---------------------------------------------------------


@_kernel
def _base_visits_hit_top(st, cap):
    """Visits to offset 0 by the HIT_TOP walk with no top.

    Beyond offset ``cap`` the walk returns to 0 with probability 1/(cap + 1)
    (h(0)/h(cap) times the plain walk's certain return), drawn exactly.
    """
    visits = 1
    o = 0
    while True:
        o += 1 if _up_move(st, 2, o, 0) else -1
        if o == 0:
            visits += 1
        elif o == cap:
            if bernoulli_ratio(st, 1, cap + 1):
                o = 0
                visits += 1
            else:
                return visits


@nb.njit(cache=True)
def _base_visits_batch(seed, stream0, trials, cap, out):
    st = np.empty(STATE_SIZE, dtype=np.uint64)
    for t in range(trials):
        init_state(st, np.uint64(seed), np.uint64(stream0 + t))
        out[t] = _base_visits_hit_top(st, cap)


def base_visit_counts(trials: int, seed: int, stream0: int = 0, cap: int = 32) -> np.ndarray:
    """Visits to the base of a walk conditioned never to hit base - 1 (no top)."""
    out = np.empty(trials, dtype=np.int64)
    _base_visits_batch(seed, stream0, trials, cap, out)
    return out


@_kernel
def _late_return(st, W, L):
    o = 0
    while o < W:
        o += 1 if _up_move(st, 0, o, 0) else -1
    cap = 2 * W
    while True:
        o += 1 if _up_move(st, 0, o, 0) else -1
        if o == L:
            return True
        if o == cap:
            # from cap, P(ever hit L) = L / cap
            return bernoulli_ratio(st, L, cap)


@nb.njit(cache=True)
def _late_return_batch(W, L, seed, stream0, trials, out):
    st = np.empty(STATE_SIZE, dtype=np.uint64)
    for t in range(trials):
        init_state(st, np.uint64(seed), np.uint64(stream0 + t))
        out[t] = _late_return(st, W, L)


def late_return_indicators(W: int, L: int, trials: int, seed: int, stream0: int = 0) -> np.ndarray:
    """Per trial: did the UP_FOREVER walk from the base revisit offset L after first reaching W."""
    if not 1 <= L < W:
        raise ValueError("need 1 <= L < W")
    out = np.empty(trials, dtype=np.bool_)
    _late_return_batch(W, L, seed, stream0, trials, out)
    return out


@nb.njit(cache=True)
def _interior_batch(a, b, seed, stream0, trials, out):
    st = np.empty(STATE_SIZE, dtype=np.uint64)
    for t in range(trials):
        init_state(st, np.uint64(seed), np.uint64(stream0 + t))
        x = 0
        v = 1
        while -b < x < a:
            x += 2 * next_bit(st) - 1
            if x == 0:
                v += 1
        out[t] = v


def interior_visit_counts(a: int, b: int, trials: int, seed: int, stream0: int = 0) -> np.ndarray:
    """Visits to a site before absorption at distance ``a`` above or ``b`` below."""
    if a < 1 or b < 1:
        raise ValueError("need a, b >= 1")
    out = np.empty(trials, dtype=np.int64)
    _interior_batch(a, b, seed, stream0, trials, out)
    return out


@nb.njit(cache=True)
def _min_visits_batch(w, seed, stream0, accepted, out):
    st = np.empty(STATE_SIZE, dtype=np.uint64)
    t = 0
    k = 0
    top = w + 1
    while k < accepted:
        init_state(st, np.uint64(seed), np.uint64(stream0 + t))
        t += 1
        x = 0
        v = 1
        while -1 < x < top:
            x += 2 * next_bit(st) - 1
            if x == 0:
                v += 1
        if x == top:
            out[k] = v
            k += 1
    return t


def min_visit_counts(w: int, accepted: int, seed: int, stream0: int = 0) -> tuple[np.ndarray, int]:
    """Visits to a freshly hit minimum during the rest of a strict segment.

    Plain walks start at the new minimum and run until they reach max + 1
    (``w + 1`` above, accepted) or dip below the minimum (rejected: it was not
    the segment's minimum).  Returns the counts of ``accepted`` segments and
    the number of attempts.
    """
    if w < 1:
        raise ValueError("need w >= 1")
    out = np.empty(accepted, dtype=np.int64)
    attempts = _min_visits_batch(w, seed, stream0, accepted, out)
    return out, int(attempts)


__all__ = [
    "ConditionedKernel",
    "HIT_TOP",
    "Kind",
    "RETURN_BEFORE_TOP",
    "UP_FOREVER",
    "base_visit_counts",
    "edge_upcrossings",
    "interior_visit_counts",
    "interior_visit_probability",
    "late_return_indicators",
    "late_return_probability",
    "min_visit_counts",
    "ruin_probability",
    "sample_by_rejection",
    "sample_conditioned",
    "visit_min_probability",
    "y_martingale_mean",
]
