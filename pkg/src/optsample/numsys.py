"""Fixed-precision number systems with a binary prefix and a repeating suffix.

A ``k``-bit number with prefix length ``l`` is ``(0.a_1...a_l s_{l+1}...s_k...)_2``
where the last ``k - l`` digits repeat forever.  The set of such numbers in
``[0, 1]`` is exactly the multiples of ``1 / Z`` with ``Z = 2**k - 2**l`` when
``l < k`` and ``Z = 2**k`` when ``l == k``.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

DEFAULT_ORDER_BUDGET = 10**6
ORDER_BUDGET_ENV = "OPTSAMPLE_ORDER_BUDGET"


class DegenerateDistributionError(ValueError):
    """Raised when a distribution puts all of its mass on one outcome."""


class OrderBudgetExceeded(ArithmeticError):
    """Trial division could not fully factor a modulus within the bound.

    ``factors`` holds the prime powers found so far and ``cofactor`` the part
    of the modulus that is left unfactored.
    """

    def __init__(self, modulus: int, bound: int, factors: dict[int, int], cofactor: int):
        self.modulus = modulus
        self.bound = bound
        self.factors = dict(factors)
        self.cofactor = cofactor
        super().__init__(
            f"order computation exceeded budget: trial division up to {bound} "
            f"left an unfactored cofactor with {cofactor.bit_length()} bits"
        )


@dataclass(frozen=True, order=True)
class PrecisionSpec:
    """Bit count ``k`` and prefix length ``l`` of the number system."""

    k: int
    l: int

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if not 0 <= self.l <= self.k:
            raise ValueError(f"l must satisfy 0 <= l <= k, got k={self.k}, l={self.l}")

    @property
    def Z(self) -> int:
        return z_kl(self)

    @property
    def dyadic(self) -> bool:
        return self.l == self.k


@dataclass(frozen=True)
class BinaryExpansion:
    """Finite encoding of ``(0.prefix suffix suffix ...)_2``, MSB first."""

    prefix: tuple[int, ...]
    suffix: tuple[int, ...]

    @property
    def k(self) -> int:
        return len(self.prefix) + len(self.suffix)

    @property
    def l(self) -> int:
        return len(self.prefix)

    @property
    def spec(self) -> PrecisionSpec:
        return PrecisionSpec(self.k, self.l)

    def __str__(self):
        pre = "".join(map(str, self.prefix))
        suf = "".join(map(str, self.suffix))
        return f"0.{pre}({suf})" if suf else f"0.{pre}"


def z_kl(spec: PrecisionSpec) -> int:
    """Common denominator of the number system ``spec``."""
    if spec.l < spec.k:
        return (1 << spec.k) - (1 << spec.l)
    return 1 << spec.k


def _to_bits(value: int, width: int) -> tuple[int, ...]:
    return tuple((value >> (width - 1 - j)) & 1 for j in range(width))


def _from_bits(bits: Sequence[int]) -> int:
    value = 0
    for b in bits:
        value = (value << 1) | b
    return value


def encode_numsys(M: int, spec: PrecisionSpec, allow_one: bool = False) -> BinaryExpansion:
    """Split the numerator ``M`` of ``M / Z_kl`` into prefix and suffix bits.

    ``allow_one`` permits ``M == Z`` for ``l < k``, encoded by the
    non-concise all-ones expansion of 1.
    """
    k, l = spec.k, spec.l
    Z = z_kl(spec)
    if M == Z and allow_one and l < k:
        return BinaryExpansion((1,) * l, (1,) * (k - l))
    if not 0 <= M < Z:
        raise ValueError(f"numerator {M} out of range for Z={Z} (k={k}, l={l})")
    if l == k:
        x, y = M, 0
    elif l == 0:
        x, y = 0, M
    else:
        period = (1 << (k - l)) - 1
        x, y = divmod(M, period)
    return BinaryExpansion(_to_bits(x, l), _to_bits(y, k - l))


def decode_numsys(exp: BinaryExpansion) -> Fraction:
    """Exact value of a prefix/suffix expansion."""
    k, l = exp.k, exp.l
    x = _from_bits(exp.prefix)
    y = _from_bits(exp.suffix)
    if l == k:
        return Fraction(x, 1 << k)
    if l == 0:
        return Fraction(y, (1 << k) - 1)
    return Fraction(((1 << (k - l)) - 1) * x + y, (1 << k) - (1 << l))


def default_order_budget() -> int:
    raw = os.environ.get(ORDER_BUDGET_ENV)
    if raw is None:
        return DEFAULT_ORDER_BUDGET
    budget = int(raw)
    if budget < 2:
        raise ValueError(f"{ORDER_BUDGET_ENV} must be >= 2")
    return budget


def _trial_factor(m: int, bound: int) -> tuple[dict[int, int], int]:
    """Factor ``m`` by trial division with divisors up to ``bound``.

    Returns the prime powers found and the remaining cofactor, which is 1
    when the factorization is complete.
    """
    factors: dict[int, int] = {}
    for p in (2, 3):
        while m % p == 0:
            factors[p] = factors.get(p, 0) + 1
            m //= p
    d = 5
    step = 2
    while d * d <= m:
        if d > bound:
            return factors, m
        while m % d == 0:
            factors[d] = factors.get(d, 0) + 1
            m //= d
        d += step
        step = 6 - step
    if m > 1:
        factors[m] = factors.get(m, 0) + 1
    return factors, 1


def _order_mod_prime_power(base: int, p: int, e: int, bound: int) -> int:
    if p == 2:
        order = 1
    else:
        order = p - 1
        qs, rest = _trial_factor(p - 1, bound)
        if rest != 1:
            raise OrderBudgetExceeded(p - 1, bound, qs, rest)
        for q in qs:
            while order % q == 0 and pow(base, order // q, p) == 1:
                order //= q
    # Lift from p to p**e: the order picks up one factor of p per failed check.
    pe = p**e
    x = pow(base, order, pe)
    while x != 1:
        x = pow(x, p, pe)
        order *= p
    return order


def multiplicative_order(base: int, modulus: int, budget: int | None = None) -> int:
    """Smallest ``e >= 1`` with ``base**e == 1 (mod modulus)``."""
    if modulus < 2:
        raise ValueError("modulus must be >= 2")
    if math.gcd(base, modulus) != 1:
        raise ValueError(f"{base} is not invertible modulo {modulus}")
    bound = default_order_budget() if budget is None else budget
    factors, rest = _trial_factor(modulus, bound)
    if rest != 1:
        raise OrderBudgetExceeded(modulus, bound, factors, rest)
    order = 1
    for p, e in sorted(factors.items()):
        order = math.lcm(order, _order_mod_prime_power(base % (p**e), p, e, bound))
    return order


def minimal_exact_precision(p: Iterable[Fraction], budget: int | None = None) -> PrecisionSpec:
    """Smallest ``(k, l)`` whose number system contains every probability in ``p``.

    Zero entries carry no denominator constraint and are ignored.
    """
    probs = [Fraction(x) for x in p]
    positive = [x for x in probs if x != 0]
    if any(x < 0 for x in probs):
        raise ValueError("probabilities must be non-negative")
    if sum(probs) != 1:
        raise ValueError("probabilities must sum to 1")
    if len(positive) < 2:
        raise DegenerateDistributionError("distribution has a single outcome with probability 1")
    d = math.lcm(*(x.denominator for x in positive))
    t = (d & -d).bit_length() - 1
    odd = d >> t
    if odd == 1:
        k = max(t, 1)
        return PrecisionSpec(k, k)
    return PrecisionSpec(t + multiplicative_order(2, odd, budget), t)
