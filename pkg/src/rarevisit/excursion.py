"""Stopping-time decomposition of a 1-d walk into alternating extreme crossings.

With T_0 = N_0 = 0 and, for j >= 0,

    T'_j    = first n > T_j   with S_n <= N_j     (weak)   or S_n = N_j - 1 (strict)
    M_j     = max S over [0, T'_j]
    T_{j+1} = first n > T'_j  with S_n >= M_j     (weak)   or S_n = M_j + 1 (strict)
    N_{j+1} = min S over [0, T_{j+1}]

The weak convention revisits the old extreme, the strict one requires a new
extreme; the two differ by one site in every crossing width.

Two routes produce records:

* ``decompose`` scans an actual path (recorded or streamed).  Exact, but
  T_j grows like exp(4j), so it is limited to small j.
* ``sample_skeleton`` samples (M_j, N_j) directly from the gambler's-ruin
  overshoot laws, in exact integer arithmetic, and optionally the times via
  ``passage.conditioned_crossing_time``.  It reaches j in the hundreds.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numba as nb
import numpy as np

from .localtime import BudgetExceeded, tau_r
from .passage import conditioned_crossing_time
from .rng import STATE_SIZE, RandomStream, _kernel, bernoulli_ratio, init_state, make_state, next_bit
from .walk import WalkPath

WEAK = "weak"
STRICT = "strict"


class StreamExhausted(BudgetExceeded):
    """The step source ended before the requested number of records."""


@dataclass(frozen=True)
class ExcursionRecord:
    j: int
    T: int | None
    T_prime: int | None
    M: int
    N: int
    N_next: int
    T_next: int | None

    @property
    def width(self) -> int:
        """M_j - N_j."""
        return self.M - self.N

    @property
    def width_prime(self) -> int:
        """M_j - N_{j+1}."""
        return self.M - self.N_next

    @property
    def degenerate(self) -> bool:
        return self.width <= 0

    @property
    def K(self) -> float:
        return math.log(self.width) if self.width > 0 else math.nan

    @property
    def K_prime(self) -> float:
        return math.log(self.width_prime) if self.width_prime > 0 else math.nan


@dataclass(frozen=True)
class EventFlags:
    r: int
    B_holds: bool
    A_holds: bool
    A1_holds: bool
    A2_holds: bool


# --- step-level decomposition ---------------------------------------------------


@nb.njit(cache=True)
def _decompose(st, positions, j_max, budget, strict, T, Tp, M, N):
    use_path = positions.shape[0] > 0
    n_avail = positions.shape[0] - 1 if use_path else budget
    x = 0
    gmax = 0
    gmin = 0
    j = 0
    down = True
    T[0] = 0
    N[0] = 0
    for n in range(1, n_avail + 1):
        if use_path:
            x = positions[n]
        else:
            x += 2 * next_bit(st) - 1
        if x > gmax:
            gmax = x
        elif x < gmin:
            gmin = x
        if down:
            if (x == N[j] - 1) if strict else (x <= N[j]):
                Tp[j] = n
                M[j] = gmax
                down = False
        else:
            if (x == M[j] + 1) if strict else (x >= M[j]):
                T[j + 1] = n
                N[j + 1] = gmin
                j += 1
                if j > j_max:
                    return j, n
                down = True
    return j, n_avail


def _as_positions(source) -> np.ndarray | None:
    if isinstance(source, WalkPath):
        if source.dim != 1:
            raise ValueError("decomposition needs a 1-d walk")
        return source.positions()
    if isinstance(source, RandomStream):
        return None
    return np.asarray(source, dtype=np.int64)


def decompose(source, j_max: int, *, convention: str = WEAK, budget: int = 10**9) -> list[ExcursionRecord]:
    """Records j = 0..j_max of the decomposition of a path or a live stream.

    ``source`` is a ``WalkPath``, an array of positions S_0 = 0, S_1, ..., or a
    ``RandomStream`` whose steps are consumed (at most ``budget`` of them).
    """
    if j_max < 0:
        raise ValueError("j_max must be >= 0")
    if convention not in (WEAK, STRICT):
        raise ValueError(f"unknown convention {convention!r}")
    positions = _as_positions(source)
    if positions is None:
        st = source.state
        positions = np.empty(0, dtype=np.int64)
    else:
        st = make_state(0, 0)
        if positions.shape[0] == 0 or positions[0] != 0:
            raise ValueError("path must start at 0")
        if positions.shape[0] == 1:
            raise StreamExhausted("empty path")
    T = np.zeros(j_max + 2, dtype=np.int64)
    Tp = np.zeros(j_max + 1, dtype=np.int64)
    M = np.zeros(j_max + 1, dtype=np.int64)
    N = np.zeros(j_max + 2, dtype=np.int64)
    j, n = _decompose(st, positions, j_max, budget, convention == STRICT, T, Tp, M, N)
    if j <= j_max:
        raise StreamExhausted(f"only {j} complete records after {n} steps (wanted {j_max + 1})")
    return [
        ExcursionRecord(j=i, T=int(T[i]), T_prime=int(Tp[i]), M=int(M[i]), N=int(N[i]),
                        N_next=int(N[i + 1]), T_next=int(T[i + 1]))
        for i in range(j_max + 1)
    ]


def segment(positions: np.ndarray, rec: ExcursionRecord) -> np.ndarray:
    """Positions over [T_j, T_{j+1}]."""
    return positions[rec.T : rec.T_next + 1]


def replay(positions: np.ndarray, records: list[ExcursionRecord]) -> np.ndarray:
    """Concatenate the segments [T_j, T_{j+1}] back into one path (shared endpoints once)."""
    parts = [positions[: records[0].T + 1]]
    for rec in records:
        parts.append(segment(positions, rec)[1:])
    return np.concatenate(parts)


# --- jump-chain skeleton --------------------------------------------------------


def ruin_overshoot(width: int, rng: RandomStream) -> int:
    """L >= 0 with P(L >= l) = width / (width + l): how far a crossing of
    ``width`` overshoots its starting extreme on the far side."""
    k = rng.dyadic()
    return (width * ((1 << 53) - k)) // k


def _down_leg(a: int, b: int, rng: RandomStream, with_times: bool):
    """First passage a -> b (b < a): returns (max reached, duration)."""
    e = a + ruin_overshoot(a - b, rng)
    if not with_times:
        return e, None
    t = conditioned_crossing_time(a, e, b, rng) + conditioned_crossing_time(e, b, e + 1, rng)
    return e, t


def _up_leg(a: int, b: int, rng: RandomStream, with_times: bool):
    """First passage a -> b (b > a): returns (min reached, duration)."""
    e = a - ruin_overshoot(b - a, rng)
    if not with_times:
        return e, None
    t = conditioned_crossing_time(a, e, b, rng) + conditioned_crossing_time(e, b, e - 1, rng)
    return e, t


def sample_skeleton(
    j_max: int,
    rng: RandomStream,
    *,
    convention: str = WEAK,
    with_times: bool = False,
) -> list[ExcursionRecord]:
    """Records j = 0..j_max sampled leg by leg from the exact extreme laws.

    Each leg is a first passage between known levels; the extreme it reaches on
    the other side has P(overshoot >= l) = w / (w + l).  Times, when requested,
    are exact for crossings handled at scale <= passage.EXACT_DELTA and use
    Brownian scaling above.
    """
    if convention not in (WEAK, STRICT):
        raise ValueError(f"unknown convention {convention!r}")
    recs = []
    t = 0 if with_times else None
    N_j = 0
    T_j = t
    if convention == WEAK:
        if rng.bit():
            m0 = 1 + ruin_overshoot(1, rng)  # P(M_0 >= m) = 1/m
            pos = 0
            if with_times:
                t += 1 + conditioned_crossing_time(1, m0, 0, rng) + conditioned_crossing_time(m0, 0, m0 + 1, rng)
        else:
            m0 = 0
            pos = -1
            if with_times:
                t += 1
        M_j = m0
    else:
        M_j, dt = _down_leg(0, -1, rng, with_times)
        pos = -1
        if with_times:
            t += dt
    for j in range(j_max + 1):
        T_prime = t
        target = M_j + 1 if convention == STRICT else M_j
        low, dt = _up_leg(pos, target, rng, with_times)
        N_next = min(N_j, low)
        if with_times:
            t += dt
        recs.append(ExcursionRecord(j=j, T=T_j, T_prime=T_prime, M=M_j, N=N_j, N_next=N_next, T_next=t))
        if j == j_max:
            break
        if convention == STRICT:
            M_next, dt = _down_leg(M_j + 1, N_next - 1, rng, with_times)
            pos = N_next - 1
        else:
            M_next, dt = _down_leg(M_j, N_next, rng, with_times)
            pos = N_next
        T_j = t
        if with_times:
            t += dt
        M_j, N_j = M_next, N_next
    return recs


def k_increments(records: list[ExcursionRecord]):
    """Pairs (K'_j - K_j, K_{j+1} - K'_j) and the indices j excluded as degenerate."""
    pairs = []
    excluded = []
    for rec, nxt in zip(records, records[1:]):
        if rec.degenerate:
            excluded.append(rec.j)
            continue
        pairs.append((rec.K_prime - rec.K, nxt.K - rec.K_prime))
    return pairs, excluded


# --- events on one segment ----------------------------------------------------------


def check_event_B(seg: np.ndarray, N_next: int, r: int) -> bool:
    """B: the segment minimum N_{j+1} is visited at least r times in [T_j, T_{j+1}]."""
    seg = np.asarray(seg)
    if int(seg.min()) != N_next:
        raise ValueError(f"N_next={N_next} is not the segment minimum {int(seg.min())}")
    return int(np.count_nonzero(seg == N_next)) >= r


def flags_from_local_times(lt: np.ndarray, base: int, top: int, r: int) -> EventFlags:
    """Event flags from segment local times ``lt[x - base]``, ``base`` the segment minimum."""
    r4 = r**4

    def covered(lo: int, hi: int) -> bool:
        if hi < lo:
            return True
        return bool(np.all(lt[lo - base : hi - base + 1] >= r))

    return EventFlags(
        r=r,
        B_holds=bool(lt[0] >= r),
        A_holds=covered(base + 1, top - r4),
        A1_holds=covered(base + r4, top - r4),
        A2_holds=covered(base + 1, base + r4 - 1),
    )


def check_event_A(seg: np.ndarray, r: int, top: int | None = None) -> EventFlags:
    """Coverage events on one segment.

    A : every x in [N+1, top - r^4] visited >= r times,
    A1: every x in [N + r^4, top - r^4],
    A2: every x in [N+1, N + r^4 - 1],
    where N is the segment minimum and ``top`` is M_j (the segment maximum
    under the weak convention, which is the default).  Empty ranges hold.
    """
    seg = np.asarray(seg, dtype=np.int64)
    base = int(seg.min())
    if top is None:
        top = int(seg.max())
    return flags_from_local_times(np.bincount(seg - base), base, top, r)


def events_for(positions: np.ndarray, rec: ExcursionRecord, r: int) -> EventFlags:
    return check_event_A(segment(positions, rec), r, top=rec.M)


@nb.njit(cache=True)
def _first_full_cover(st, r, j_min, budget, strict):
    r4 = r**4
    cap = 1024
    counts = np.zeros(cap, dtype=np.int64)
    off = cap // 2
    x = 0
    gmax = 0
    gmin = 0
    j = 0
    down = True
    Nj = 0
    Mj = 0
    counts[off] = 1
    for n in range(1, budget + 1):
        x += 2 * next_bit(st) - 1
        i = x + off
        if i < 0 or i >= cap:
            grown = np.zeros(2 * cap, dtype=np.int64)
            if i < 0:
                grown[cap:] = counts
                off += cap
            else:
                grown[:cap] = counts
            counts = grown
            cap *= 2
            i = x + off
        counts[i] += 1
        if x > gmax:
            gmax = x
        elif x < gmin:
            gmin = x
        if down:
            if (x == Nj - 1) if strict else (x <= Nj):
                Mj = gmax
                down = False
        else:
            if (x == Mj + 1) if strict else (x >= Mj):
                # segment [T_j, T_{j+1}] complete; N_{j+1} = gmin
                if j > j_min:
                    ok = True
                    for y in range(gmin + 1, Mj - r4 + 1):
                        if counts[y + off] < r:
                            ok = False
                            break
                    if ok:
                        return j, n
                Nj = gmin
                j += 1
                down = True
                for y in range(gmin, gmax + 1):
                    counts[y + off] = 0
                counts[i] = 1
    return -1, budget


def first_full_cover_excursion(
    r: int, j_min: int, seed: int, stream: int = 0, *, budget: int = 10**8, convention: str = WEAK
) -> int:
    """Least j > j_min whose segment [T_j, T_{j+1}] satisfies A_{j,r}."""
    if r < 1 or j_min < 0:
        raise ValueError("need r >= 1 and j_min >= 0")
    j, n = _first_full_cover(make_state(seed, stream), r, j_min, budget, convention == STRICT)
    if j < 0:
        raise BudgetExceeded(f"no fully covered excursion after j_min={j_min} within {budget} steps")
    return int(j)


def records_to_csv(records: list[ExcursionRecord], flags: list[EventFlags] | None = None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["j", "T", "T_prime", "M", "N", "K", "K_prime", "B_r", "A_r"])
    for i, rec in enumerate(records):
        f = flags[i] if flags else None
        w.writerow([
            rec.j, rec.T, rec.T_prime, rec.M, rec.N,
            "" if rec.degenerate else f"{rec.K:.12g}",
            "" if rec.width_prime <= 0 else f"{rec.K_prime:.12g}",
            "" if f is None else int(f.B_holds),
            "" if f is None else int(f.A_holds),
        ])
    return buf.getvalue()


# --- exact segment sampler --------------------------------------------------------


@_kernel
def _h_leg(st, x, target, zero, lt, base):
    """Walk from ``x`` to ``target`` under h(y) = |y - zero| (the walk conditioned
    to reach ``target`` before ``zero``), adding visits to ``lt[y - base]``."""
    while x != target:
        hx = x - zero if x > zero else zero - x
        hup = x + 1 - zero if x + 1 > zero else zero - x - 1
        if bernoulli_ratio(st, hup, 2 * hx):
            x += 1
        else:
            x -= 1
        lt[x - base] += 1
    return x


@dataclass(frozen=True)
class SegmentSample:
    """Local times of one strict segment [T_j, T_{j+1}] started from a fresh maximum.

    ``start`` = M_{j-1} + 1, ``floor`` = N_j - 1, ``top`` = M_j, ``base`` = N_{j+1}.
    """

    start: int
    floor: int
    top: int
    base: int
    local_times: np.ndarray  # visits to base + i, i = 0..top + 1 - base

    @property
    def width_prime(self) -> int:
        return self.top - self.base

    def flags(self, r: int) -> EventFlags:
        return flags_from_local_times(self.local_times, self.base, self.top, r)


def sample_segment(drop: int, rng: RandomStream, max_width: int | None = None) -> SegmentSample | None:
    """One strict segment whose down-crossing has to fall ``drop`` sites.

    The extremes are drawn first from the overshoot laws; given them, the four
    legs (up to M_j, down to N_j - 1, down to N_{j+1}, up to M_j + 1) are
    independent h-transformed walks, run step by step.  Returns None without
    walking when M_j - N_{j+1} exceeds ``max_width``.
    """
    if drop < 1:
        raise ValueError("drop must be >= 1")
    start, floor = 0, -drop
    top = start + ruin_overshoot(drop, rng)
    base = floor - ruin_overshoot(top + 1 - floor, rng)
    if max_width is not None and top - base > max_width:
        return None
    lt = np.zeros(top + 2 - base, dtype=np.int64)
    st = rng.state
    lt[start - base] += 1
    x = _h_leg(st, start, top, floor, lt, base)
    x = _h_leg(st, x, floor, top + 1, lt, base)
    x = _h_leg(st, x, base, top + 1, lt, base)
    _h_leg(st, x, top + 1, base - 1, lt, base)
    return SegmentSample(start, floor, top, base, lt)


# --- N_k frequency check ------------------------------------------------------------


@nb.njit(cache=True)
def _nk_batch(seed, stream0, trials, j_max, budget, widths, hits):
    """Weak decomposition per trial; at each T'_j (j >= 1) record M_j - N_j and
    whether the walk then reaches N_j - 1 before M_j.  The decision is always
    run to the end, so inclusion depends only on T'_j <= budget."""
    st = np.empty(STATE_SIZE, dtype=np.uint64)
    k = 0
    for t in range(trials):
        init_state(st, np.uint64(seed), np.uint64(stream0 + t))
        x = 2 * next_bit(st) - 1
        n = 1
        gmax = max(x, 0)
        gmin = min(x, 0)
        N = 0
        j = 0
        while j <= j_max:
            while x > N and n < budget:
                x += 2 * next_bit(st) - 1
                n += 1
                if x > gmax:
                    gmax = x
            if x > N:
                break
            M = gmax
            if j >= 1:
                while N - 1 < x < M:
                    x += 2 * next_bit(st) - 1
                    n += 1
                widths[k] = M - N
                hits[k] = x == N - 1
                k += 1
                if x < gmin:
                    gmin = x
            while x < M and n < budget:
                x += 2 * next_bit(st) - 1
                n += 1
                if x < gmin:
                    gmin = x
            if x < M:
                break
            N = gmin
            j += 1
    return k


def nk_decrease_indicators(trials: int, seed: int, j_max: int = 3, budget: int = 10**5, stream0: int = 0):
    """(widths M_j - N_j, indicators N_{j+1} < N_j) for j = 1..j_max over many walks."""
    if j_max < 1:
        raise ValueError("j_max must be >= 1")
    widths = np.empty(trials * j_max, dtype=np.int64)
    hits = np.empty(trials * j_max, dtype=np.bool_)
    k = _nk_batch(seed, stream0, trials, j_max, budget, widths, hits)
    return widths[:k], hits[:k]


__all__ = [
    "EventFlags",
    "ExcursionRecord",
    "SegmentSample",
    "StreamExhausted",
    "check_event_A",
    "check_event_B",
    "decompose",
    "events_for",
    "first_full_cover_excursion",
    "flags_from_local_times",
    "nk_decrease_indicators",
    "k_increments",
    "records_to_csv",
    "replay",
    "ruin_overshoot",
    "sample_skeleton",
    "sample_segment",
    "segment",
    "tau_r",
]
