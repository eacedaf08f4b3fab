"""Reference samplers: exact rejection and limited-precision inversion."""

from __future__ import annotations

import bisect
import itertools
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .divergence import Divergence, EvalContext, ExtReal, divergence_values
from .optimize import Assignment
from .runtime import NEED_MORE_BITS, BitsExhausted, BitSource

log = logging.getLogger(__name__)


def rejection_bits(Z: int) -> int:
    """Smallest ``k`` with ``2**k >= Z``."""
    if Z < 1:
        raise ValueError("Z must be positive")
    return (Z - 1).bit_length()


def rejection_sample(M: Assignment, src: BitSource):
    """Draw ``k``-bit integers until one falls below ``Z``; return its bucket."""
    k = rejection_bits(M.Z)
    edges = list(itertools.accumulate(M.M))
    try:
        while True:
            w = src.next_bits(k)
            if w < M.Z:
                return bisect.bisect_right(edges, w)
    except BitsExhausted:
        return NEED_MORE_BITS


def rejection_expected_bits(Z: int, k: int) -> Fraction:
    """Mean bits per sample, ``k * 2**k / Z``."""
    if not (k == 0 and Z == 1) and not (1 << k) // 2 < Z <= 1 << k:
        raise ValueError(f"need 2**(k-1) < Z <= 2**k, got Z={Z}, k={k}")
    return Fraction(k << k, Z)


def _cumulative(p: Sequence[Fraction]) -> list[Fraction]:
    probs = [Fraction(x) for x in p]
    if any(x < 0 for x in probs) or sum(probs) != 1:
        raise ValueError("p must be a probability vector summing to 1")
    return list(itertools.accumulate(probs))


def inversion_sample(p: Sequence[Fraction], k: int, src: BitSource, inclusive: bool = False):
    """Read a ``k``-bit ``W`` and return the first ``j`` with ``W / 2**k < c_j``.

    ``inclusive`` uses ``<=`` instead, as some standard libraries do.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    cum = _cumulative(p)
    try:
        w = src.next_bits(k)
    except BitsExhausted:
        return NEED_MORE_BITS
    u = Fraction(w, 1 << k)
    if inclusive:
        return bisect.bisect_left(cum, u)
    return bisect.bisect_right(cum, u)


def inversion_counts(p: Sequence[Fraction], k: int, inclusive: bool = False) -> list[int]:
    """How many of the ``2**k`` values of ``W`` map to each outcome."""
    if k < 1:
        raise ValueError("k must be >= 1")
    cum = _cumulative(p)
    scale = 1 << k
    if not inclusive:
        # #{W : W < 2^k c_j} = ceil(2^k c_j)
        edges = [math.ceil(scale * c) for c in cum]
        return [b - a for a, b in zip([0] + edges[:-1], edges)]
    counts = []
    for i, c in enumerate(cum):
        x = scale * c
        if i == 0:
            counts.append(math.floor(x) + (c != 1))
            continue
        prev = math.floor(scale * cum[i - 1])
        if x.denominator == 1 and c != 1:
            counts.append(max(0, math.ceil(x) - prev))
        else:
            counts.append(max(0, math.ceil(x) - prev - 1))
    return counts


def inversion_output_distribution(p: Sequence[Fraction], k: int, inclusive: bool = False) -> list[Fraction]:
    """Exact output distribution of ``inversion_sample`` at ``k`` bits."""
    counts = inversion_counts(p, k, inclusive)
    total = sum(counts)
    if total != 1 << k:
        log.warning("inversion counts sum to %d, not 2**%d; normalizing by the sum", total, k)
    return [Fraction(c, total) for c in counts]


@dataclass(frozen=True)
class BaselineReport:
    method: str
    k: int
    Z: int
    output_distribution: list[Fraction]
    expected_bits: Fraction
    error_vs_target: ExtReal


def rejection_report(p: Sequence[Fraction], div: Divergence, ctx: EvalContext | None = None) -> BaselineReport:
    """Exact rejection sampler for ``p`` at its common denominator."""
    probs = [Fraction(x) for x in p]
    Z = math.lcm(*(x.denominator for x in probs))
    M = [x.numerator * (Z // x.denominator) for x in probs]
    k = rejection_bits(Z)
    ctx = ctx or EvalContext.for_divergence(div)
    err = divergence_values(probs, M, Z, div, ctx)
    return BaselineReport("rejection", k, Z, probs, rejection_expected_bits(Z, k), err)


def inversion_report(p: Sequence[Fraction], k: int, div: Divergence, ctx: EvalContext | None = None,
                     inclusive: bool = False) -> BaselineReport:
    probs = [Fraction(x) for x in p]
    counts = inversion_counts(probs, k, inclusive)
    total = sum(counts)
    ctx = ctx or EvalContext.for_divergence(div)
    err = divergence_values(probs, counts, total, div, ctx)
    dist = [Fraction(c, total) for c in counts]
    return BaselineReport("inversion", k, total, dist, Fraction(k), err)
