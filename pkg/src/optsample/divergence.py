"""f-divergence generators and the approximation objective.

Values are "extended reals": a ``Fraction`` in exact mode, a ``gmpy2.mpfr``
in float mode, or ``math.inf``/``-math.inf`` for the limits.  Exact and
float values are never mixed within a single evaluation context.
"""

from __future__ import annotations

import math
from contextlib import nullcontext
from dataclasses import dataclass, field
from fractions import Fraction
from typing import TYPE_CHECKING, Sequence, Union

import gmpy2

if TYPE_CHECKING:
    from .optimize import Assignment

INF = math.inf

ExtReal = Union[Fraction, "gmpy2.mpfr", float]

KINDS = ("tv", "hellinger", "pearson-chi2", "triangular", "reverse-kl", "forward-kl", "alpha")
RATIONAL_KINDS = frozenset({"tv", "pearson-chi2", "triangular"})


class ModeError(ValueError):
    """Exact arithmetic was requested for a generator that is not rational."""


@dataclass(frozen=True)
class Divergence:
    """A generator ``g`` from the catalog; ``alpha`` is set only for ``kind='alpha'``."""

    kind: str
    alpha: Fraction | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown divergence {self.kind!r}; expected one of {', '.join(KINDS)}")
        if self.kind == "alpha":
            if self.alpha is None:
                raise ValueError("alpha divergence needs an alpha value")
            a = Fraction(self.alpha)
            if a * a == 1:
                raise ValueError("alpha divergence requires alpha**2 != 1")
            object.__setattr__(self, "alpha", a)
        elif self.alpha is not None:
            raise ValueError(f"{self.kind} takes no alpha parameter")

    @classmethod
    def parse(cls, text: str) -> "Divergence":
        """Parse CLI names such as ``tv`` or ``alpha:1/2``."""
        name, _, arg = text.strip().partition(":")
        if name == "alpha":
            if not arg:
                raise ValueError("alpha divergence is written alpha:<rational>")
            return cls("alpha", Fraction(arg))
        if arg:
            raise ValueError(f"{name} takes no parameter")
        return cls(name)

    def __str__(self):
        return f"alpha:{self.alpha}" if self.kind == "alpha" else self.kind

    @property
    def rational(self) -> bool:
        return self.kind in RATIONAL_KINDS

    @property
    def _alpha_exponent(self) -> Fraction:
        return (1 + self.alpha) / 2

    def at_zero(self, ctx: "EvalContext") -> ExtReal:
        """``lim_{t -> 0+} g(t)``."""
        kind = self.kind
        if kind == "tv":
            return ctx.number(Fraction(1, 2))
        if kind in ("hellinger", "pearson-chi2", "triangular"):
            return ctx.number(Fraction(1))
        if kind == "reverse-kl":
            return ctx.number(Fraction(0))
        if kind == "forward-kl":
            return INF
        if self._alpha_exponent > 0:
            return ctx.number(Fraction(4) / (1 - self.alpha**2))
        return INF

    def at_infinity(self) -> float:
        """``lim_{t -> oo} g(t)`` for the kinds where it diverges; finite limits raise."""
        if self.kind == "forward-kl":
            return -INF
        if self.kind == "alpha":
            e = self._alpha_exponent
            if e < 0:
                raise ValueError("g(oo) is finite for alpha < -1; evaluate the formula instead")
            return INF if e > 1 else -INF
        return INF

    def slope_at_infinity(self, ctx: "EvalContext") -> ExtReal:
        """``lim_{u -> oo} g(u) / u``, the per-unit cost of mass where the target is zero."""
        kind = self.kind
        if kind == "tv":
            return ctx.number(Fraction(1, 2))
        if kind in ("hellinger", "triangular"):
            return ctx.number(Fraction(1))
        if kind in ("pearson-chi2", "reverse-kl"):
            return INF
        if kind == "forward-kl":
            return ctx.number(Fraction(0))
        return INF if self._alpha_exponent > 1 else ctx.number(Fraction(0))


@dataclass(frozen=True)
class EvalContext:
    """Arithmetic mode for divergence values.

    In float mode values are MPFR floats with ``mantissa_bits`` of precision
    and two values closer than ``2**-(mantissa_bits - 16)`` (relative) are
    treated as tied.
    """

    mode: str = "exact"
    mantissa_bits: int = 256
    _tol: object = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.mode not in ("exact", "float"):
            raise ValueError(f"mode must be 'exact' or 'float', got {self.mode!r}")
        if self.mantissa_bits < 32:
            raise ValueError("mantissa_bits must be at least 32")
        tol = Fraction(0) if self.exact else gmpy2.mpfr(2) ** -(self.mantissa_bits - 16)
        object.__setattr__(self, "_tol", tol)

    @property
    def exact(self) -> bool:
        return self.mode == "exact"

    @classmethod
    def for_divergence(cls, div: Divergence, mode: str | None = None, mantissa_bits: int = 256) -> "EvalContext":
        """Exact when the generator allows it, unless ``mode`` says otherwise."""
        if mode is None:
            mode = "exact" if div.rational else "float"
        return cls(mode, mantissa_bits)

    def arith(self):
        if self.exact:
            return nullcontext()
        return gmpy2.context(precision=self.mantissa_bits)

    def number(self, x: Fraction) -> ExtReal:
        if self.exact:
            return x
        with self.arith():
            return gmpy2.mpfr(gmpy2.mpq(x.numerator, x.denominator))

    def check(self, div: Divergence) -> None:
        if self.exact and not div.rational:
            raise ModeError(f"exact mode is only available for rational generators, not {div}")

    def less(self, a: ExtReal, b: ExtReal) -> bool:
        """``a < b`` with float near-ties counted as equal."""
        if self.exact or _infinite(a) or _infinite(b):
            return a < b
        with self.arith():
            return b - a > self._tol * max(abs(a), abs(b))

    def negative(self, terms: Sequence[ExtReal]) -> bool:
        """Whether ``sum(terms) < 0`` beyond the rounding noise of the terms."""
        with self.arith():
            total = sum(terms[1:], terms[0])
            if self.exact or _infinite(total):
                return total < 0
            return -total > self._tol * sum(abs(t) for t in terms)


def _infinite(x) -> bool:
    if isinstance(x, Fraction):
        return False
    if isinstance(x, float):
        return math.isinf(x)
    return gmpy2.is_infinite(x)


_LN2 = {}


def _ln2(bits: int):
    if bits not in _LN2:
        with gmpy2.context(precision=bits):
            _LN2[bits] = gmpy2.log(gmpy2.mpfr(2))
    return _LN2[bits]


def _float_eval(div: Divergence, t: Fraction, ctx: EvalContext):
    # Work from u = t - 1, formed exactly, so values near t = 1 keep full precision.
    kind = div.kind
    with ctx.arith():
        u = gmpy2.mpfr(gmpy2.mpq(t.numerator - t.denominator, t.denominator))
        if kind == "tv":
            return abs(u) / 2
        if kind == "pearson-chi2":
            return u * u
        if kind == "triangular":
            return u * u / (u + 2)
        if kind == "hellinger":
            s = gmpy2.sqrt(u + 1) + 1
            return (u / s) ** 2
        log_t = gmpy2.log1p(u) / _ln2(ctx.mantissa_bits)
        if kind == "reverse-kl":
            return (u + 1) * log_t
        if kind == "forward-kl":
            return -log_t
        e = div._alpha_exponent
        em = gmpy2.mpfr(gmpy2.mpq(e.numerator, e.denominator))
        coeff = gmpy2.mpfr(gmpy2.mpq(4)) / gmpy2.mpfr(gmpy2.mpq(1 - div.alpha**2))
        return -coeff * gmpy2.expm1(em * gmpy2.log1p(u))


def _exact_eval(div: Divergence, t: Fraction) -> Fraction:
    u = t - 1
    if div.kind == "tv":
        return abs(u) / 2
    if div.kind == "pearson-chi2":
        return u * u
    return u * u / (t + 1)


def gen_eval(div: Divergence, t, ctx: EvalContext) -> ExtReal:
    """Evaluate the generator ``g(t)`` for ``t >= 0`` (``t`` may be ``math.inf``)."""
    ctx.check(div)
    if _infinite(t):
        if t < 0:
            raise ValueError("g is defined for t >= 0 only")
        if div.kind == "alpha" and div._alpha_exponent < 0:
            return ctx.number(Fraction(4) / (1 - div.alpha**2))
        return div.at_infinity()
    t = Fraction(t)
    if t < 0:
        raise ValueError("g is defined for t >= 0 only")
    if t == 0:
        return div.at_zero(ctx)
    if ctx.exact:
        return _exact_eval(div, t)
    return _float_eval(div, t, ctx)


def term(div: Divergence, p_i: Fraction, m: int, Z: int, ctx: EvalContext) -> ExtReal:
    """Contribution ``p_i * g(m / (Z p_i))`` of one outcome to the objective."""
    if p_i == 0:
        if m == 0:
            return ctx.number(Fraction(0))
        slope = div.slope_at_infinity(ctx)
        if _infinite(slope):
            return slope
        with ctx.arith():
            return slope * ctx.number(Fraction(m, Z))
    g = gen_eval(div, Fraction(m) / (Z * p_i), ctx)
    if _infinite(g):
        return g
    with ctx.arith():
        return ctx.number(p_i) * g


def divergence_values(p: Sequence[Fraction], M: Sequence[int], Z: int, div: Divergence, ctx: EvalContext) -> ExtReal:
    """``sum_i p_i g(M_i / (Z p_i))`` over bare numerators."""
    if len(p) != len(M):
        raise ValueError(f"dimension mismatch: {len(p)} probabilities, {len(M)} numerators")
    total = ctx.number(Fraction(0))
    with ctx.arith():
        for p_i, m in zip(p, M):
            total = total + term(div, Fraction(p_i), m, Z, ctx)
    return total


def divergence(p: Sequence[Fraction], assignment: "Assignment", div: Divergence, ctx: EvalContext) -> ExtReal:
    """Divergence of the ``Z``-type distribution ``assignment`` from the target ``p``."""
    return divergence_values(p, assignment.M, assignment.Z, div, ctx)


def total_variation(p: Sequence[Fraction], q: Sequence[Fraction]) -> Fraction:
    """``1/2 * sum |q_i - p_i|`` computed directly."""
    if len(p) != len(q):
        raise ValueError("dimension mismatch")
    return sum((abs(Fraction(a) - Fraction(b)) for a, b in zip(p, q)), Fraction(0)) / 2


def is_infinite(x: ExtReal) -> bool:
    return _infinite(x)
