"""Simple random walk on Z and Z^d: seeded paths, streaming steps, hitting times.

Every path is a pure function of ``(seed, stream)``.  One-dimensional steps
consume one bit each (bit 1 -> +1); d-dimensional steps consume one uniform
draw from ``{0, ..., 2d-1}`` (code ``2k`` is ``+e_k``, ``2k+1`` is ``-e_k``).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numba as nb
import numpy as np

from .rng import STATE_SIZE, RandomStream, _kernel, init_state, make_state, next_below, next_bit

MAX_RECORDED_STEPS = 2**31


class CapacityError(MemoryError):
    """Requested recording would not fit in memory."""


@dataclass(frozen=True)
class WalkPath:
    start: int | tuple
    steps: np.ndarray
    seed: int
    stream: int = 0
    dim: int = 1

    @property
    def length(self) -> int:
        return int(self.steps.shape[0])

    def positions(self) -> np.ndarray:
        """Positions S_0..S_n; shape (n+1,) in 1-d, (n+1, d) otherwise."""
        if self.dim == 1:
            out = np.empty(self.length + 1, dtype=np.int64)
            out[0] = self.start
            np.cumsum(self.steps, dtype=np.int64, out=out[1:])
            out[1:] += self.start
            return out
        inc = np.zeros((self.length + 1, self.dim), dtype=np.int64)
        idx = np.arange(1, self.length + 1)
        axis = self.steps // 2
        inc[idx, axis] = 1 - 2 * (self.steps % 2)
        inc[0] = np.asarray(self.start, dtype=np.int64)
        return np.cumsum(inc, axis=0)

    @property
    def end(self):
        p = self.positions()
        return int(p[-1]) if self.dim == 1 else tuple(int(c) for c in p[-1])


@dataclass(frozen=True)
class HittingOutcome:
    hit_point: int
    hit_time: int


@dataclass
class WalkState:
    """Streaming 1-d walker.  Equal ``(seed, stream, time)`` implies equal position."""

    seed: int
    stream: int = 0
    position: int = 0
    time: int = 0
    _st: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self._st is None:
            self._st = make_state(self.seed, self.stream)

    def step(self) -> int:
        inc = 2 * int(next_bit(self._st)) - 1
        self.position += inc
        self.time += 1
        return inc

    def advance(self, k: int) -> np.ndarray:
        """Take ``k`` steps; returns the increments."""
        out = np.empty(k, dtype=np.int8)
        _fill_steps(self._st, out)
        self.position += int(out.sum(dtype=np.int64))
        self.time += k
        return out


@nb.njit(cache=True)
def _fill_steps(st, out):
    for i in range(out.shape[0]):
        out[i] = 2 * next_bit(st) - 1


@nb.njit(cache=True)
def _fill_dd_steps(st, out, dim):
    for i in range(out.shape[0]):
        out[i] = next_below(st, 2 * dim)


def simulate_path(n_steps: int, seed: int, stream: int = 0, start: int = 0) -> WalkPath:
    if n_steps < 0:
        raise ValueError("n_steps must be >= 0")
    if n_steps > MAX_RECORDED_STEPS:
        raise CapacityError(f"refusing to record {n_steps} steps; use a streaming kernel")
    steps = np.empty(n_steps, dtype=np.int8)
    _fill_steps(make_state(seed, stream), steps)
    return WalkPath(start=start, steps=steps, seed=seed, stream=stream)


def simulate_dd(dim: int, n_steps: int, seed: int, stream: int = 0) -> WalkPath:
    if dim not in (2, 3):
        raise ValueError(f"unsupported dimension {dim}; expected 2 or 3")
    if n_steps < 0:
        raise ValueError("n_steps must be >= 0")
    if n_steps > MAX_RECORDED_STEPS:
        raise CapacityError(f"refusing to record {n_steps} steps")
    steps = np.empty(n_steps, dtype=np.int8)
    _fill_dd_steps(make_state(seed, stream), steps, dim)
    return WalkPath(start=(0,) * dim, steps=steps, seed=seed, stream=stream, dim=dim)


@_kernel
def _hit_two_sided(st, start, lower, upper):
    x = start
    t = 0
    while lower < x < upper:
        x += 2 * next_bit(st) - 1
        t += 1
    return x, t


def hit_two_sided(start: int, lower: int, upper: int, seed: int, stream: int = 0) -> HittingOutcome:
    """First exit of the walk from the open interval (lower, upper)."""
    if not lower < start < upper:
        raise ValueError(f"need lower < start < upper, got {lower}, {start}, {upper}")
    x, t = _hit_two_sided(make_state(seed, stream), start, lower, upper)
    return HittingOutcome(hit_point=int(x), hit_time=int(t))


@nb.njit(cache=True)
def _hit_upper_batch(start, lower, upper, trials, seed, stream0, out):
    st = np.empty(STATE_SIZE, dtype=np.uint64)
    for t in range(trials):
        init_state(st, np.uint64(seed), np.uint64(stream0 + t))
        x, _ = _hit_two_sided(st, start, lower, upper)
        out[t] = x == upper


def hit_upper_batch(start: int, lower: int, upper: int, trials: int, seed: int, stream0: int = 0) -> np.ndarray:
    """Indicator of exiting at ``upper`` for ``trials`` independent streams."""
    if not lower < start < upper:
        raise ValueError(f"need lower < start < upper, got {lower}, {start}, {upper}")
    out = np.empty(trials, dtype=np.bool_)
    _hit_upper_batch(start, lower, upper, trials, seed, stream0, out)
    return out


@_kernel
def _first_return(st, dim, horizon):
    # coordinates as scalars; unused axes stay at 0
    p0 = 0
    p1 = 0
    p2 = 0
    for t in range(1, horizon + 1):
        d = next_below(st, 2 * dim)
        inc = 1 - 2 * (d & 1)
        axis = d >> 1
        if axis == 0:
            p0 += inc
        elif axis == 1:
            p1 += inc
        else:
            p2 += inc
        if p0 == 0 and p1 == 0 and p2 == 0:
            return t
    return -1


@nb.njit(cache=True)
def _first_return_batch(dim, horizon, trials, seed, stream0, out):
    st = np.empty(STATE_SIZE, dtype=np.uint64)
    for t in range(trials):
        init_state(st, np.uint64(seed), np.uint64(stream0 + t))
        out[t] = _first_return(st, dim, horizon)


def first_return_times(dim: int, horizon: int, trials: int, seed: int, stream0: int = 0) -> np.ndarray:
    """Time of first return to the origin within ``horizon`` steps, or -1."""
    if dim not in (1, 2, 3):
        raise ValueError(f"unsupported dimension {dim}")
    out = np.empty(trials, dtype=np.int64)
    _first_return_batch(dim, horizon, trials, seed, stream0, out)
    return out


def escape_frequency(dim: int, horizon: int, trials: int, seed: int, stream0: int = 0) -> tuple[float, float]:
    """Fraction of walks never back at the origin within ``horizon`` steps, with its stderr."""
    esc = first_return_times(dim, horizon, trials, seed, stream0) < 0
    p = float(esc.mean())
    return p, float(np.sqrt(p * (1 - p) / trials))


__all__ = [
    "CapacityError",
    "HittingOutcome",
    "RandomStream",
    "WalkPath",
    "WalkState",
    "escape_frequency",
    "first_return_times",
    "hit_two_sided",
    "hit_upper_batch",
    "simulate_dd",
    "simulate_path",
]
