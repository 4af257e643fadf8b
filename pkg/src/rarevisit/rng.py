"""Counter-based random streams (Philox4x64-10) usable from numba kernels.

A stream is keyed by ``(seed, stream)``; the n-th 256-bit block of a stream is
``philox(counter=n, key=(seed, stream))``.  Output is word-for-word identical to
``numpy.random.Philox(key=[seed, stream])``, so any kernel can be replayed from
Python and vice versa.  Trials index their own stream, which makes batched
Monte Carlo independent of how the trials are scheduled.

The generator state is a small ``uint64`` array so that it can be passed into
and mutated by jitted code:

    [key0, key1, ctr0..ctr3, buf0..buf3, buf_pos, bit_word, bits_left]
"""

from __future__ import annotations

import numba as nb
import numpy as np

STATE_SIZE = 13

_M0 = np.uint64(0xD2E7470EE14C6C93)
_M1 = np.uint64(0xCA5A826395121157)
_W0 = np.uint64(0x9E3779B97F4A7C15)
_W1 = np.uint64(0xBB67AE8584CAA73B)
_LO32 = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)
_S11 = np.uint64(11)
_ONE = np.uint64(1)
_ZERO = np.uint64(0)
_FOUR = np.uint64(4)
_SIXTY_FOUR = np.uint64(64)
_INV53 = 1.0 / 9007199254740992.0

MAX_SEED = 2**64 - 1


def _kernel(fn=None, *, inline="never"):
    """njit for state-only helpers: no allocation, so compile without refcounting.

    Passing the state array into an NRT-enabled callee that itself calls out
    costs an atomic incref/decref pair per call, which dominates a one-bit draw.
    """
    def wrap(f):
        try:
            return nb.njit(cache=True, _nrt=False, inline=inline)(f)
        except TypeError:  # pragma: no cover - flag missing in other numba versions
            return nb.njit(cache=True, inline=inline)(f)

    return wrap(fn) if fn is not None else wrap


@nb.njit(inline="always")
def _mulhi(a, b):
    a_lo = a & _LO32
    a_hi = a >> _S32
    b_lo = b & _LO32
    b_hi = b >> _S32
    lo_lo = a_lo * b_lo
    hi_lo = a_hi * b_lo
    lo_hi = a_lo * b_hi
    hi_hi = a_hi * b_hi
    cross = (lo_lo >> _S32) + (hi_lo & _LO32) + lo_hi
    return hi_hi + (hi_lo >> _S32) + (cross >> _S32)


@_kernel
def _refill(st):
    st[2] += _ONE
    if st[2] == _ZERO:
        st[3] += _ONE
        if st[3] == _ZERO:
            st[4] += _ONE
            if st[4] == _ZERO:
                st[5] += _ONE
    c0 = st[2]
    c1 = st[3]
    c2 = st[4]
    c3 = st[5]
    k0 = st[0]
    k1 = st[1]
    for rnd in range(10):
        if rnd > 0:
            k0 = k0 + _W0
            k1 = k1 + _W1
        hi0 = _mulhi(_M0, c0)
        lo0 = _M0 * c0
        hi1 = _mulhi(_M1, c2)
        lo1 = _M1 * c2
        c0 = hi1 ^ c1 ^ k0
        c1 = lo1
        c2 = hi0 ^ c3 ^ k1
        c3 = lo0
    st[6] = c0
    st[7] = c1
    st[8] = c2
    st[9] = c3
    st[10] = _ZERO


@_kernel
def next_u64(st):
    if st[10] >= _FOUR:
        _refill(st)
    pos = st[10]
    out = st[6 + pos]
    st[10] = pos + _ONE
    return out


@_kernel
def next_double(st):
    """Uniform on [0, 1) with 53 random bits."""
    return float(next_u64(st) >> _S11) * _INV53


@_kernel
def next_open_double(st):
    """Uniform on (0, 1]; safe for ``log`` and for ratios ``(1 - u) / u``."""
    return (float(next_u64(st) >> _S11) + 1.0) * _INV53


@_kernel
def next_bit(st):
    if st[12] == _ZERO:
        st[11] = next_u64(st)
        st[12] = _SIXTY_FOUR
    b = st[11] & _ONE
    st[11] = st[11] >> _ONE
    st[12] -= _ONE
    return np.int64(b)


@_kernel
def next_below(st, n):
    """Uniform integer in ``[0, n)``: high word of ``u * n``, with rejection of
    the few low words that would bias it (Lemire).  Rarely divides."""
    un = np.uint64(n)
    x = next_u64(st)
    lo = x * un
    if lo < un:
        t = (_ZERO - un) % un
        while lo < t:
            x = next_u64(st)
            lo = x * un
    return np.int64(_mulhi(x, un))


@_kernel
def bernoulli_ratio(st, num, den):
    """Exact Bernoulli(num / den): compare random bits with the binary
    expansion of num / den; two bits on average.  Needs 0 < den < 2**62."""
    if num <= 0:
        return False
    if num >= den:
        return True
    a = num
    while True:
        a *= 2
        digit = 0
        if a >= den:
            digit = 1
            a -= den
        b = next_bit(st)
        if b != digit:
            return b < digit
        if a == 0:
            # expansion terminated: remaining digits are 0, so U >= p
            return False


@_kernel
def init_state(st, seed, stream):
    st[0] = np.uint64(seed)
    st[1] = np.uint64(stream)
    for i in range(2, STATE_SIZE):
        st[i] = _ZERO
    st[10] = _FOUR


def make_state(seed: int, stream: int = 0) -> np.ndarray:
    if not (0 <= seed <= MAX_SEED and 0 <= stream <= MAX_SEED):
        raise ValueError("seed and stream must be in [0, 2**64)")
    st = np.zeros(STATE_SIZE, dtype=np.uint64)
    init_state(st, np.uint64(seed), np.uint64(stream))
    return st


@nb.njit(cache=True)
def _fill_u64(st, out):
    for i in range(out.shape[0]):
        out[i] = next_u64(st)


@nb.njit(cache=True)
def _fill_double(st, out):
    for i in range(out.shape[0]):
        out[i] = next_double(st)


class RandomStream:
    """Python handle on one ``(seed, stream)`` Philox stream.

    Draws made here and draws made by a jitted kernel holding ``.state``
    advance the same counter.
    """

    def __init__(self, seed: int, stream: int = 0):
        self.seed = int(seed)
        self.stream = int(stream)
        self.state = make_state(self.seed, self.stream)

    def __repr__(self) -> str:
        return f"RandomStream(seed={self.seed}, stream={self.stream})"

    def u64(self, size: int) -> np.ndarray:
        out = np.empty(size, dtype=np.uint64)
        _fill_u64(self.state, out)
        return out

    def uniform(self) -> float:
        return next_double(self.state)

    def open_uniform(self) -> float:
        return next_open_double(self.state)

    def uniforms(self, size: int) -> np.ndarray:
        out = np.empty(size, dtype=np.float64)
        _fill_double(self.state, out)
        return out

    def bit(self) -> int:
        return int(next_bit(self.state))

    def below(self, n: int) -> int:
        return int(next_below(self.state, n))

    def dyadic(self, bits: int = 53) -> int:
        """Uniform integer in ``[1, 2**bits]`` (exact-arithmetic uniforms)."""
        return int(next_u64(self.state) >> np.uint64(64 - bits)) + 1

    def spawn(self, stream: int) -> "RandomStream":
        return RandomStream(self.seed, stream)
