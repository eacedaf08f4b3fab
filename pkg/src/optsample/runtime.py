"""Random bit sources and the two DDG samplers.

A sampler reads one bit per ``next_bit`` call.  ``FixedBitsSource`` replays a
finite string; when it runs dry the samplers return ``NEED_MORE_BITS`` rather
than an outcome.  Batch sampling from a seeded splitmix64 stream runs in a
numba kernel unless ``OPTSAMPLE_DISABLE_NUMBA`` is set, in which case a plain
Python loop with identical output is used.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np

from .ddg import LinearEncoding, MalformedError, ProbabilityMatrix

DISABLE_NUMBA_ENV = "OPTSAMPLE_DISABLE_NUMBA"
ENUMERATION_LIMIT = 24

MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


class _NeedMoreBits:
    """The undetermined result of a sampler that ran out of input bits."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "NEED_MORE_BITS"

    def __reduce__(self):
        return (_NeedMoreBits, ())


NEED_MORE_BITS = _NeedMoreBits()


class BitsExhausted(Exception):
    """Raised by a finite source; samplers turn it into ``NEED_MORE_BITS``."""


class BitSource:
    """One fair bit per ``next_bit`` call; ``bits_consumed`` counts the calls that returned."""

    bits_consumed: int = 0

    def next_bit(self) -> int:
        raise NotImplementedError

    def next_bits(self, count: int) -> int:
        """``count`` bits as an integer, first bit most significant."""
        value = 0
        for _ in range(count):
            value = (value << 1) | self.next_bit()
        return value


def splitmix64_next(state: int) -> tuple[int, int]:
    """Advance the state; returns ``(new_state, output_word)``."""
    state = (state + _GOLDEN) & MASK64
    z = state
    z = ((z ^ (z >> 30)) * _MIX1) & MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & MASK64
    return state, z ^ (z >> 31)


class SplitMix64Source(BitSource):
    """splitmix64 words handed out one bit at a time, most significant bit first."""

    def __init__(self, seed: int = 0):
        self.state = seed & MASK64
        self.buffer = 0
        self.buffer_pos = 0  # bits of ``buffer`` not yet handed out
        self.bits_consumed = 0

    def next_word(self) -> int:
        self.state, word = splitmix64_next(self.state)
        return word

    def next_bit(self) -> int:
        if self.buffer_pos == 0:
            self.buffer = self.next_word()
            self.buffer_pos = 64
        self.buffer_pos -= 1
        self.bits_consumed += 1
        return (self.buffer >> self.buffer_pos) & 1


class FixedBitsSource(BitSource):
    def __init__(self, bits):
        if isinstance(bits, str):
            bits = [int(ch) for ch in bits]
        self.bits = tuple(int(b) for b in bits)
        if any(b not in (0, 1) for b in self.bits):
            raise ValueError("bits must be 0 or 1")
        self.position = 0
        self.bits_consumed = 0

    def next_bit(self) -> int:
        if self.position >= len(self.bits):
            raise BitsExhausted(self.position)
        b = self.bits[self.position]
        self.position += 1
        self.bits_consumed += 1
        return b


def sample_encoding(enc: LinearEncoding, src: BitSource):
    """Walk the encoding from cell 0; returns a 0-based outcome or ``NEED_MORE_BITS``."""
    cells = enc.enc
    if cells[0] < 0:
        return int(-cells[0] - 1)
    c = 0
    try:
        while True:
            c = int(cells[c + src.next_bit()])
            if cells[c] < 0:
                return int(-cells[c] - 1)
    except BitsExhausted:
        return NEED_MORE_BITS


def sample_matrix(P: ProbabilityMatrix, src: BitSource):
    """Sample directly from the probability matrix by scanning its columns."""
    bits, n, k, l = P.bits, P.n, P.k, P.l
    d = 0
    c = 0
    try:
        while True:
            d = 2 * d + (1 - src.next_bit())
            for r in range(n):
                d -= bits[r][c]
                if d == -1:
                    return r
            c = l if c == k - 1 else c + 1
    except BitsExhausted:
        return NEED_MORE_BITS


@dataclass(frozen=True)
class Enumeration:
    """Exact result of running a sampler on every bit string of one length."""

    masses: list[Fraction]
    undetermined: Fraction
    expected_bits: Fraction


def enumerate_outcomes(sampler: Callable[[BitSource], object], k: int, n: int | None = None) -> Enumeration:
    """Run ``sampler`` on all ``2**k`` strings of ``k`` bits.

    ``expected_bits`` is the mean of ``min(k, bits read)``.  ``n`` fixes the
    length of ``masses``; by default it is one more than the largest outcome seen.
    """
    if not 0 <= k <= ENUMERATION_LIMIT:
        raise ValueError(f"enumeration depth must be in [0, {ENUMERATION_LIMIT}], got {k}")
    counts: dict[int, int] = {}
    stuck = 0
    consumed = 0
    for w in range(1 << k):
        src = FixedBitsSource([(w >> (k - 1 - j)) & 1 for j in range(k)])
        out = sampler(src)
        consumed += src.bits_consumed
        if out is NEED_MORE_BITS:
            stuck += 1
        else:
            counts[out] = counts.get(out, 0) + 1
    size = n if n is not None else max(counts, default=-1) + 1
    if counts and max(counts) >= size:
        raise ValueError(f"sampler returned outcome {max(counts)} but n={size}")
    total = 1 << k
    masses = [Fraction(counts.get(i, 0), total) for i in range(size)]
    return Enumeration(masses, Fraction(stuck, total), Fraction(consumed, total))


# Batch sampling --------------------------------------------------------------


def numba_enabled() -> bool:
    return os.environ.get(DISABLE_NUMBA_ENV, "").strip().lower() in ("", "0", "false", "no")


def _batch_python(cells, count, state, buffer, remaining, out):
    consumed = 0
    for s in range(count):
        c = 0
        while cells[c] >= 0:
            if remaining == 0:
                state, buffer = splitmix64_next(state)
                remaining = 64
            remaining -= 1
            consumed += 1
            c = cells[c + ((buffer >> remaining) & 1)]
        out[s] = -cells[c] - 1
    return state, buffer, remaining, consumed


_numba_kernel = None


def _get_numba_kernel():
    global _numba_kernel
    if _numba_kernel is None:
        from numba import njit, uint64

        golden, mix1, mix2 = uint64(_GOLDEN), uint64(_MIX1), uint64(_MIX2)
        s27, s30, s31, one = uint64(27), uint64(30), uint64(31), uint64(1)

        @njit(cache=True, nogil=True)
        def kernel(cells, count, state, buffer, remaining, out):
            consumed = 0
            for s in range(count):
                c = 0
                while cells[c] >= 0:
                    if remaining == 0:
                        state = state + golden
                        z = state
                        z = (z ^ (z >> s30)) * mix1
                        z = (z ^ (z >> s27)) * mix2
                        buffer = z ^ (z >> s31)
                        remaining = 64
                    remaining -= 1
                    consumed += 1
                    bit = (buffer >> uint64(remaining)) & one
                    c = cells[c + np.int64(bit)]
                out[s] = -cells[c] - 1
            return state, buffer, remaining, consumed

        _numba_kernel = kernel
    return _numba_kernel


def _check_bounds(enc: LinearEncoding) -> None:
    # The kernels index without bounds checks, so vet every pointer once.
    cells = enc.enc
    size = cells.size
    targets = cells[cells >= 0]
    if targets.size and targets.max() >= size:
        raise MalformedError("encoding points past its last cell")
    starts = np.concatenate(([0], targets))
    branch = starts[cells[starts] >= 0]
    if branch.size and branch.max() + 1 >= size:
        raise MalformedError("a branch runs off the end of the encoding")


def sample_batch(enc: LinearEncoding, count: int, src: SplitMix64Source, backend: str | None = None) -> np.ndarray:
    """``count`` outcomes from ``enc``, advancing ``src`` exactly as repeated ``sample_encoding`` would.

    ``backend`` is ``'numba'`` or ``'python'``; by default numba unless the
    disable flag is set.
    """
    if count < 0:
        raise ValueError("count must be non-negative")
    if backend is None:
        backend = "numba" if numba_enabled() else "python"
    out = np.empty(count, dtype=np.int64)
    _check_bounds(enc)
    if backend == "numba":
        kernel = _get_numba_kernel()
        state, buffer, remaining, consumed = kernel(
            enc.enc, count, np.uint64(src.state), np.uint64(src.buffer), np.int64(src.buffer_pos), out
        )
    elif backend == "python":
        state, buffer, remaining, consumed = _batch_python(
            enc.enc.tolist(), count, src.state, src.buffer, src.buffer_pos, out
        )
    else:
        raise ValueError(f"unknown backend {backend!r}")
    src.state, src.buffer, src.buffer_pos = int(state), int(buffer), int(remaining)
    src.bits_consumed += int(consumed)
    return out
