"""Occupation counts for lattice walks: xi(x, n), the range, f(n), g_1(n), Q_k(n).

The minimal local time is kept in O(1) per visit.  Each site's count only
grows, so when the last site holding the minimum count ``c`` is revisited the
new minimum is exactly ``c + 1``; a brand-new site resets it to 1.
"""

from __future__ import annotations

import csv
import io
from collections import Counter

import numba as nb
import numpy as np

from .rng import _kernel, make_state, next_below, next_bit


class RangeError(ValueError):
    """A 1-d visit landed more than one site outside the current range."""


class LocalTimeField:
    """Dense local-time field of a 1-d nearest-neighbour path.

    Counts live in a growable array indexed by ``x - offset``; the histogram
    maps a visit count to the number of sites holding it.
    """

    def __init__(self, start: int = 0):
        self._counts = np.zeros(16, dtype=np.int64)
        self._offset = start - 8
        self._hist = np.zeros(16, dtype=np.int64)
        self.range_min = start
        self.range_max = start
        self.total_time = 0
        self.min_localtime = 1
        self.last = start
        self._counts[start - self._offset] = 1
        self._hist[1] = 1

    @classmethod
    def from_positions(cls, positions) -> "LocalTimeField":
        positions = [int(p) for p in positions]
        field = cls(positions[0])
        for x in positions[1:]:
            field.record_visit(x)
        return field

    def _ensure_site(self, x: int) -> None:
        i = x - self._offset
        n = self._counts.shape[0]
        if 0 <= i < n:
            return
        grown = np.zeros(2 * n, dtype=np.int64)
        if i < 0:
            grown[n:] = self._counts
            self._offset -= n
        else:
            grown[:n] = self._counts
        self._counts = grown

    def record_visit(self, x: int) -> "LocalTimeField":
        if x < self.range_min - 1 or x > self.range_max + 1:
            raise RangeError(
                f"site {x} is not adjacent to the range [{self.range_min}, {self.range_max}]"
            )
        self._ensure_site(x)
        i = x - self._offset
        c = int(self._counts[i])
        self._counts[i] = c + 1
        if c + 1 >= self._hist.shape[0]:
            self._hist = np.concatenate([self._hist, np.zeros_like(self._hist)])
        self._hist[c + 1] += 1
        if c == 0:
            self.range_min = min(self.range_min, x)
            self.range_max = max(self.range_max, x)
            self.min_localtime = 1
        else:
            self._hist[c] -= 1
            if c == self.min_localtime and self._hist[c] == 0:
                self.min_localtime = c + 1
        self.total_time += 1
        self.last = x
        return self

    def local_time(self, x: int) -> int:
        i = x - self._offset
        if 0 <= i < self._counts.shape[0]:
            return int(self._counts[i])
        return 0

    def counts(self) -> dict[int, int]:
        return {x: self.local_time(x) for x in range(self.range_min, self.range_max + 1)}

    def min_local_time(self) -> int:
        return self.min_localtime

    def once_visited(self) -> int:
        return self.k_visited(1)

    def k_visited(self, k: int) -> int:
        return int(self._hist[k]) if 0 < k < self._hist.shape[0] else 0

    @property
    def range_size(self) -> int:
        return self.range_max - self.range_min + 1

    @property
    def max_abs(self) -> int:
        """L_n = max_{k <= n} |S_k|."""
        return max(-self.range_min, self.range_max)

    def histogram(self) -> dict[int, int]:
        return {v: int(c) for v, c in enumerate(self._hist) if c and v > 0}

    def check_invariants(self) -> None:
        lo = self.range_min - self._offset
        hi = self.range_max - self._offset
        window = self._counts[lo : hi + 1]
        assert int(self._counts.sum()) == self.total_time + 1, "sum of local times != n + 1"
        assert window.min() >= 1, "unvisited site inside the range"
        assert int(self._counts.sum()) == int(window.sum()), "visits outside the range"
        assert int(self._hist[1:].sum()) == self.range_size, "histogram does not cover the range"
        assert self.min_localtime == int(window.min()), "stale minimal local time"
        occupied = np.flatnonzero(self._hist[1:]) + 1
        assert self.min_localtime == int(occupied[0]), "min pointer off the lowest occupied bin"


class LocalTimeFieldND:
    """Hashed local-time field for walks on Z^d (range is not an interval)."""

    def __init__(self, start: tuple = (0, 0)):
        start = tuple(int(c) for c in start)
        self.dim = len(start)
        self._counts: dict[tuple, int] = {start: 1}
        self._hist: Counter = Counter({1: 1})
        self.total_time = 0
        self.min_localtime = 1

    def record_visit(self, x) -> "LocalTimeFieldND":
        x = tuple(int(c) for c in x)
        c = self._counts.get(x, 0)
        self._counts[x] = c + 1
        self._hist[c + 1] += 1
        if c == 0:
            self.min_localtime = 1
        else:
            self._hist[c] -= 1
            if self._hist[c] == 0:
                del self._hist[c]
                if c == self.min_localtime:
                    self.min_localtime = c + 1
        self.total_time += 1
        return self

    def local_time(self, x) -> int:
        return self._counts.get(tuple(int(c) for c in x), 0)

    def min_local_time(self) -> int:
        return self.min_localtime

    def once_visited(self) -> int:
        return self._hist.get(1, 0)

    def k_visited(self, k: int) -> int:
        return self._hist.get(k, 0)

    @property
    def range_size(self) -> int:
        return len(self._counts)

    def check_invariants(self) -> None:
        assert sum(self._counts.values()) == self.total_time + 1
        assert sum(self._hist.values()) == len(self._counts)
        assert self.min_localtime == min(self._counts.values())


# --- jitted streaming tracker -------------------------------------------------


@_kernel
def _track_chunk(st, positions, n0, n1, counts, off, hist, sv, checkpoints, r_max, stop_r, rows, taus):
    """Steps n0+1..n1 with no bounds growth; the caller guarantees room.

    ``sv`` holds [x, lo, hi, fmin, fmax, g1, ci, max count].  Returns the last
    step taken (less than n1 only when stop_r was reached).
    """
    use_path = positions.shape[0] > 0
    x = sv[0]
    lo = sv[1]
    hi = sv[2]
    fmin = sv[3]
    fmax = sv[4]
    g1 = sv[5]
    ci = sv[6]
    cmax = sv[7]
    ncp = checkpoints.shape[0]
    n = n0
    while n < n1:
        n += 1
        if use_path:
            x = positions[n]
        else:
            x += 2 * next_bit(st) - 1
        i = x + off
        c = counts[i]
        counts[i] = c + 1
        hist[c + 1] += 1
        if c + 1 > cmax:
            cmax = c + 1
        if c == 0:
            if x < lo:
                lo = x
            else:
                hi = x
            fmin = 1
            g1 += 1
        else:
            hist[c] -= 1
            if c == 1:
                g1 -= 1
            if c == fmin and hist[c] == 0:
                fmin = c + 1
                if fmin > fmax:
                    fmax = fmin
                    if fmin <= r_max:
                        taus[fmin - 1] = n
        if fmin == 1 and taus[0] < 0:
            taus[0] = n
        while ci < ncp and checkpoints[ci] == n:
            rows[ci, 0] = n
            rows[ci, 1] = fmin
            rows[ci, 2] = hi - lo + 1
            rows[ci, 3] = g1
            ci += 1
        if stop_r > 0 and fmin >= stop_r:
            break
    sv[0] = x
    sv[1] = lo
    sv[2] = hi
    sv[3] = fmin
    sv[4] = fmax
    sv[5] = g1
    sv[6] = ci
    sv[7] = cmax
    return n


@nb.njit(cache=True)
def _track(st, positions, n_steps, checkpoints, r_max, stop_r, rows, taus):
    """Run the 1-d walk with incremental f(n); fill checkpoint rows and tau_r.

    The walk comes from ``positions`` when it is non-empty, else from ``st``.
    Returns (steps taken, running max of f, final f).  Steps run in chunks
    short enough that neither table can overflow, so the hot loop has no
    growth checks.
    """
    cap = 1024
    counts = np.zeros(cap, dtype=np.int64)
    hcap = 64
    hist = np.zeros(hcap, dtype=np.int64)
    x = 0
    if positions.shape[0] > 0:
        x = positions[0]
    off = cap // 2 - x
    counts[x + off] = 1
    hist[1] = 1
    sv = np.array([x, x, x, 1, 1, 1, 0, 1], dtype=np.int64)
    ncp = checkpoints.shape[0]
    while sv[6] < ncp and checkpoints[sv[6]] == 0:
        ci = sv[6]
        rows[ci, 0] = 0
        rows[ci, 1] = 1
        rows[ci, 2] = 1
        rows[ci, 3] = 1
        sv[6] += 1
    n = 0
    while n < n_steps:
        i = sv[0] + off
        if min(i, cap - 1 - i) < 64:
            grown = np.zeros(2 * cap, dtype=np.int64)
            grown[cap // 2 : cap // 2 + cap] = counts
            off += cap // 2
            counts = grown
            cap *= 2
            i = sv[0] + off
        if hcap - 1 - sv[7] < 64:
            hgrown = np.zeros(2 * hcap, dtype=np.int64)
            hgrown[:hcap] = hist
            hist = hgrown
            hcap *= 2
        k = min(n_steps - n, min(i, cap - 1 - i), hcap - 1 - sv[7])
        m = _track_chunk(st, positions, n, n + k, counts, off, hist, sv, checkpoints, r_max, stop_r, rows, taus)
        if m < n + k or (stop_r > 0 and sv[3] >= stop_r):
            return m, sv[4], sv[3]
        n = m
    return n_steps, sv[4], sv[3]


class FTrace:
    """Result of a streaming f(n) run."""

    def __init__(self, rows, taus, steps, running_max, final_f, seed, stream):
        self.rows = rows
        self.taus = taus
        self.steps = steps
        self.running_max = running_max
        self.final_f = final_f
        self.seed = seed
        self.stream = stream

    def tau(self, r: int) -> int | None:
        """First n > 0 with f(n) = r, or None if not reached."""
        t = int(self.taus[r - 1]) if r <= len(self.taus) else -1
        return t if t >= 0 else None

    def to_csv(self, fh=None) -> str:
        buf = fh if fh is not None else io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "f", "range_size", "g1"])
        for row in self.rows:
            w.writerow([int(v) for v in row])
        return buf.getvalue() if fh is None else ""


def dyadic_checkpoints(n_steps: int) -> np.ndarray:
    pts = [0]
    k = 1
    while k <= n_steps:
        pts.append(k)
        k *= 2
    if pts[-1] != n_steps:
        pts.append(n_steps)
    return np.asarray(pts, dtype=np.int64)


def f_trace(
    n_steps: int,
    seed: int,
    stream: int = 0,
    checkpoints=None,
    r_max: int = 64,
    stop_r: int = 0,
    positions=None,
) -> FTrace:
    """Stream ``n_steps`` steps and report (n, f(n), range size, g_1(n)) at checkpoints.

    With ``positions`` the recorded path is replayed instead of drawing steps.
    """
    if checkpoints is None:
        checkpoints = dyadic_checkpoints(n_steps)
    checkpoints = np.asarray(checkpoints, dtype=np.int64)
    if np.any(np.diff(checkpoints) < 0):
        raise ValueError("checkpoints must be sorted")
    path = np.empty(0, dtype=np.int64) if positions is None else np.asarray(positions, dtype=np.int64)
    if positions is not None and path.shape[0] < n_steps + 1:
        raise ValueError("recorded path shorter than n_steps")
    rows = np.full((checkpoints.shape[0], 4), -1, dtype=np.int64)
    taus = np.full(r_max, -1, dtype=np.int64)
    steps, fmax, ffin = _track(make_state(seed, stream), path, n_steps, checkpoints, r_max, stop_r, rows, taus)
    rows = rows[rows[:, 0] >= 0]
    return FTrace(rows, taus, int(steps), int(fmax), int(ffin), seed, stream)


class BudgetExceeded(RuntimeError):
    """A stopping time was not reached within the caller's step budget."""


def tau_r(r: int, seed: int, stream: int = 0, budget: int = 10**8) -> int:
    """tau_r = inf{n > 0 : f(n) = r} on the walk of ``(seed, stream)``."""
    if r < 1:
        raise ValueError("r must be >= 1")
    tr = f_trace(budget, seed, stream, checkpoints=np.empty(0, np.int64), r_max=max(r, 1), stop_r=r)
    t = tr.tau(r)
    if t is None:
        raise BudgetExceeded(f"f(n) did not reach {r} within {budget} steps")
    return t


@nb.njit(cache=True)
def _dd_packed_positions(st, dim, n_steps, out):
    bias = np.int64(1) << np.int64(20)
    pos = np.zeros(dim, dtype=np.int64)
    for t in range(n_steps + 1):
        if t > 0:
            d = next_below(st, 2 * dim)
            pos[d // 2] += 1 - 2 * (d % 2)
        key = np.int64(0)
        for k in range(dim):
            key = (key << np.int64(21)) | (pos[k] + bias)
        out[t] = key


def dd_visit_histogram(dim: int, n_steps: int, seed: int, stream: int = 0) -> dict[int, int]:
    """Q_k(n) for all k: number of sites of Z^d visited exactly k times by time n.

    Coordinates are packed 21 bits each, so ``n_steps`` must stay below 2**20.
    """
    if dim not in (2, 3):
        raise ValueError(f"unsupported dimension {dim}")
    if n_steps >= 2**20:
        raise ValueError("n_steps must be < 2**20 for packed coordinates")
    keys = np.empty(n_steps + 1, dtype=np.int64)
    _dd_packed_positions(make_state(seed, stream), dim, n_steps, keys)
    _, per_site = np.unique(keys, return_counts=True)
    ks, qs = np.unique(per_site, return_counts=True)
    return {int(k): int(q) for k, q in zip(ks, qs)}
