"""Error-minimal Z-type approximations of a target distribution.

``optimize_z`` finds integer numerators ``M`` summing to ``Z`` that minimize
``sum_i p_i g(M_i / (Z p_i))``: round each entry to the better of its two
neighbours, repair with improving pairwise swaps, then spend the remaining
shortfall one unit at a time on the cheapest index.  ``closest_approx`` runs
it for every denominator available at ``k`` bits and keeps the best.
"""

from __future__ import annotations

import heapq
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import gmpy2

from .divergence import INF, Divergence, EvalContext, ExtReal, divergence_values, is_infinite, term
from .numsys import PrecisionSpec, z_kl

log = logging.getLogger(__name__)

BRUTE_FORCE_LIMIT = 10**6


@dataclass(frozen=True)
class Assignment:
    """Numerators ``M`` of the distribution ``(M_i / Z)``."""

    M: tuple[int, ...]
    Z: int

    def __post_init__(self):
        object.__setattr__(self, "M", tuple(int(m) for m in self.M))
        if self.Z < 1:
            raise ValueError("Z must be positive")
        if any(m < 0 or m > self.Z for m in self.M):
            raise ValueError(f"numerators must lie in [0, {self.Z}]")
        if sum(self.M) != self.Z:
            raise ValueError(f"numerators sum to {sum(self.M)}, expected {self.Z}")

    @property
    def n(self) -> int:
        return len(self.M)

    def probabilities(self) -> list[Fraction]:
        return [Fraction(m, self.Z) for m in self.M]


@dataclass
class OptimizeStats:
    """Bookkeeping filled in by ``optimize_z`` when passed in."""

    swap_iterations: int = 0
    shortfall: int = 0
    infinite: bool = False
    # (phase, index_up, index_down, cost) with phase "swap" or "fill"; index_down is None for single-unit moves
    moves: list = field(default_factory=list)


@dataclass(frozen=True)
class ApproxResult:
    assignment: Assignment
    spec: PrecisionSpec
    error: ExtReal
    divergence: Divergence
    mode: str = "exact"

    @property
    def probabilities(self) -> list[Fraction]:
        return self.assignment.probabilities()


def _check_target(p: Sequence[Fraction]) -> list[Fraction]:
    probs = [Fraction(x) for x in p]
    if not probs:
        raise ValueError("empty distribution")
    if any(x < 0 for x in probs):
        raise ValueError("probabilities must be non-negative")
    if sum(probs) != 1:
        raise ValueError(f"probabilities sum to {sum(probs)}, expected 1")
    return probs


def _diff(new: ExtReal, old: ExtReal, ctx: EvalContext) -> ExtReal:
    if is_infinite(old):
        return INF if is_infinite(new) and new == old else -old
    if is_infinite(new):
        return new
    with ctx.arith():
        return new - old


def step_cost(M: Sequence[int], i: int, delta: int, p: Sequence[Fraction], Z: int,
              div: Divergence, ctx: EvalContext) -> ExtReal:
    """Change in the objective from ``M[i] += delta``; ``inf`` if that leaves ``[0, Z]``."""
    new = M[i] + delta
    if new < 0 or new > Z:
        return INF
    p_i = Fraction(p[i])
    if p_i == 0:
        slope = div.slope_at_infinity(ctx)
        if is_infinite(slope):
            return slope if delta > 0 else -slope
        with ctx.arith():
            return slope * ctx.number(Fraction(delta, Z))
    return _diff(term(div, p_i, new, Z, ctx), term(div, p_i, M[i], Z, ctx), ctx)


class _CostHeap:
    """Min-heap of per-index move costs with lazy invalidation.

    Ties (including float near-ties) go to the lowest index.
    """

    def __init__(self, ctx: EvalContext):
        self.ctx = ctx
        self.heap: list = []
        self.version: dict[int, int] = {}

    def push(self, i: int, cost: ExtReal | None) -> None:
        """Queue a move; ``None`` (out of range) just withdraws the index."""
        v = self.version.get(i, 0) + 1
        self.version[i] = v
        if cost is not None:
            heapq.heappush(self.heap, (cost, i, v))

    def best(self, exclude: int | None = None):
        """Return ``(cost, index)`` of the cheapest valid entry, skipping ``exclude``."""
        heap = self.heap
        while heap and self.version.get(heap[0][1]) != heap[0][2]:
            heapq.heappop(heap)
        if not heap:
            return None
        if exclude is None or heap[0][1] != exclude:
            return self._tied_lowest(heap[0][0])
        return self._best_popping(exclude)

    def _tied_lowest(self, c0):
        # Entries within tolerance of the minimum form a subtree at the root of
        # the heap array, so walk it instead of popping.
        heap, version, less = self.heap, self.version, self.ctx.less
        pick_cost, pick = None, None
        stack = [0]
        push, pop = stack.append, stack.pop
        size = len(heap)
        while stack:
            j = pop()
            cost, i, v = heap[j]
            if cost != c0 and less(c0, cost):
                continue
            if (pick is None or i < pick) and version.get(i) == v:
                pick_cost, pick = cost, i
            j = 2 * j + 1
            if j < size:
                push(j)
                if j + 1 < size:
                    push(j + 1)
        return pick_cost, pick

    def _best_popping(self, exclude: int):
        popped = []
        group = []
        while self.heap:
            entry = heapq.heappop(self.heap)
            cost, i, v = entry
            if self.version.get(i) != v:
                continue
            popped.append(entry)
            if i == exclude:
                continue
            if group and self.ctx.less(group[0][0], cost):
                break
            group.append(entry)
        for entry in popped:
            heapq.heappush(self.heap, entry)
        if not group:
            return None
        cost, i, _ = min(group, key=lambda e: e[1])
        return cost, i


def _sum2(a: ExtReal, b: ExtReal, ctx: EvalContext) -> ExtReal:
    if is_infinite(a) or is_infinite(b):
        return a + b if not (is_infinite(a) and is_infinite(b) and a != b) else INF
    with ctx.arith():
        return a + b


def optimize_z(p: Sequence[Fraction], Z: int, div: Divergence, ctx: EvalContext | None = None,
               stats: OptimizeStats | None = None) -> Assignment:
    """Numerators summing to ``Z`` that minimize the divergence from ``p``.

    Outcomes with zero probability keep zero mass.  When the generator is
    infinite at 0 and there are more positive outcomes than units of mass, every
    assignment has infinite error; the returned one is still a minimizer and
    ``stats.infinite`` is set.
    """
    probs = _check_target(p)
    ctx = ctx or EvalContext.for_divergence(div)
    ctx.check(div)
    if Z < 1:
        raise ValueError("Z must be positive")
    stats = stats if stats is not None else OptimizeStats()
    support = [i for i, x in enumerate(probs) if x > 0]
    full = [0] * len(probs)
    if len(support) == 1:
        full[support[0]] = Z
        return Assignment(tuple(full), Z)
    q = [probs[i] for i in support]
    n = len(q)
    stats.infinite = n > Z and is_infinite(div.at_zero(ctx))
    if stats.infinite:
        log.warning("every %d-type assignment has infinite %s error for %d positive outcomes", Z, div, n)

    # Independent rounding to the better neighbour.
    M = []
    for x in q:
        fl = (Z * x.numerator) // x.denominator
        lo = term(div, x, fl, Z, ctx)
        hi = term(div, x, fl + 1, Z, ctx)
        M.append(fl + 1 if ctx.less(hi, lo) else fl)

    def cost(i: int, delta: int) -> ExtReal | None:
        if not 0 <= M[i] + delta <= Z:
            return None
        return step_cost(M, i, delta, q, Z, div, ctx)

    # Pairwise swaps while one strictly improves the objective.
    up, down = _CostHeap(ctx), _CostHeap(ctx)
    for i in range(n):
        up.push(i, cost(i, +1))
        down.push(i, cost(i, -1))
    while True:
        bu, bd = up.best(), down.best()
        if bu is None or bd is None:
            break
        if bu[1] != bd[1]:
            (cu, j), (cd, jd) = bu, bd
        else:
            alt_d = down.best(exclude=bu[1])
            alt_u = up.best(exclude=bd[1])
            candidates = []
            if alt_d is not None:
                candidates.append((bu[1], alt_d[1], bu[0], alt_d[0]))
            if alt_u is not None:
                candidates.append((alt_u[1], bd[1], alt_u[0], bd[0]))
            if not candidates:
                break
            pick = candidates[0]
            for cand in candidates[1:]:
                s_pick = _sum2(pick[2], pick[3], ctx)
                s_cand = _sum2(cand[2], cand[3], ctx)
                if ctx.less(s_cand, s_pick) or (not ctx.less(s_pick, s_cand) and cand[0] < pick[0]):
                    pick = cand
            j, jd, cu, cd = pick
        if is_infinite(cu) or is_infinite(cd):
            if not (is_infinite(_sum2(cu, cd, ctx)) and _sum2(cu, cd, ctx) < 0):
                break
        elif not ctx.negative([cu, cd]):
            break
        M[j] += 1
        M[jd] -= 1
        stats.swap_iterations += 1
        stats.moves.append(("swap", j, jd, _sum2(cu, cd, ctx)))
        for i in (j, jd):
            up.push(i, cost(i, +1))
            down.push(i, cost(i, -1))

    # Spend the shortfall on the cheapest single-unit moves.
    S = sum(M) - Z
    stats.shortfall = S
    if S != 0:
        delta = 1 if S < 0 else -1
        heap = _CostHeap(ctx)
        for i in range(n):
            heap.push(i, cost(i, delta))
        for _ in range(abs(S)):
            c, j = heap.best()
            M[j] += delta
            stats.moves.append(("fill", j if delta > 0 else None, None if delta > 0 else j, c))
            heap.push(j, cost(j, delta))

    for i, m in zip(support, M):
        full[i] = m
    return Assignment(tuple(full), Z)


def _fast(x):
    # gmpy2 rationals are exact like Fraction but much cheaper to add
    if isinstance(x, Fraction):
        return gmpy2.mpq(x.numerator, x.denominator)
    return x


def brute_force_optimum(p: Sequence[Fraction], Z: int, div: Divergence,
                        ctx: EvalContext | None = None) -> Assignment:
    """Exhaustive minimizer over every assignment of ``Z`` units to ``len(p)`` outcomes.

    Among tied assignments the one that gives extra mass to the lowest
    indices (first in reverse lexicographic order) wins.
    """
    probs = _check_target(p)
    ctx = ctx or EvalContext.for_divergence(div)
    ctx.check(div)
    n = len(probs)
    count = math.comb(Z + n - 1, n - 1)
    if count > BRUTE_FORCE_LIMIT:
        raise ValueError(f"brute force would enumerate {count} assignments (limit {BRUTE_FORCE_LIMIT})")
    table = [[_fast(term(div, x, m, Z, ctx)) for m in range(Z + 1)] for x in probs]
    current = [0] * n
    best: list = [None, None]

    def visit(i: int, remaining: int, acc) -> None:
        if i == n - 1:
            current[i] = remaining
            value = acc + table[i][remaining]
            # cheap pre-check before the tolerance-aware comparison
            if best[0] is None or (value < best[1] and ctx.less(value, best[1])):
                best[0], best[1] = tuple(current), value
            return
        row = table[i]
        for m in range(remaining, -1, -1):
            current[i] = m
            visit(i + 1, remaining - m, acc + row[m])

    with ctx.arith():
        visit(0, Z, _fast(ctx.number(Fraction(0))))
    return Assignment(best[0], Z)


def closest_approx(p: Sequence[Fraction], k: int, div: Divergence, ctx: EvalContext | None = None,
                   cls: str = "all") -> ApproxResult:
    """Closest distribution realizable by a ``k``-bit entropy-optimal sampler.

    ``cls='all'`` searches every prefix length ``l = 0..k``; ``cls='dyadic'``
    only ``l = k`` (samplers that never need more than ``k`` bits).  Among
    equal errors the largest ``l`` wins.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if cls not in ("all", "dyadic"):
        raise ValueError(f"class must be 'all' or 'dyadic', got {cls!r}")
    probs = _check_target(p)
    ctx = ctx or EvalContext.for_divergence(div)
    best = None
    ls = [k] if cls == "dyadic" else range(k, -1, -1)
    for l in ls:
        spec = PrecisionSpec(k, l)
        Z = z_kl(spec)
        assignment = optimize_z(probs, Z, div, ctx)
        err = divergence_values(probs, assignment.M, Z, div, ctx)
        if best is None or ctx.less(err, best.error):
            best = ApproxResult(assignment, spec, err, div, ctx.mode)
    return best
