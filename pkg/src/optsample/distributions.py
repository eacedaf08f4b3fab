"""Exact rational weight vectors for common families, and parsing helpers."""

from __future__ import annotations

import json
import math
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence


def binomial(n: int, p: Fraction) -> list[Fraction]:
    """PMF of Binomial(n, p) over ``0..n`` as exact fractions."""
    p = Fraction(p)
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0, 1]")
    q = 1 - p
    return [math.comb(n, i) * p**i * q ** (n - i) for i in range(n + 1)]


def hypergeometric(N: int, K: int, draws: int) -> list[Fraction]:
    """PMF of the number of successes in ``draws`` draws without replacement."""
    if not (0 <= K <= N and 0 <= draws <= N):
        raise ValueError("need 0 <= K <= N and 0 <= draws <= N")
    total = math.comb(N, draws)
    lo, hi = max(0, draws - (N - K)), min(K, draws)
    return [Fraction(math.comb(K, i) * math.comb(N - K, draws - i), total) for i in range(lo, hi + 1)]


def parse_weight(text) -> Fraction:
    if isinstance(text, bool):
        raise ValueError("weights must be integers or 'a/b' strings")
    if isinstance(text, int):
        return Fraction(text)
    if isinstance(text, str):
        value = Fraction(text.strip())
        return value
    raise ValueError(f"unsupported weight {text!r}; use an integer or an 'a/b' string")


def normalize(weights: Iterable) -> list[Fraction]:
    """Exact probabilities proportional to non-negative ``weights``."""
    w = [parse_weight(x) for x in weights]
    if not w:
        raise ValueError("no weights given")
    if any(x < 0 for x in w):
        raise ValueError("weights must be non-negative")
    total = sum(w)
    if total == 0:
        raise ValueError("weights sum to zero")
    return [x / total for x in w]


def load_distribution(path: str | Path) -> list[Fraction]:
    """Read ``{"weights": [...]}`` and normalize by the exact sum."""
    data = json.loads(Path(path).read_text())
    if not isinstance(data, dict) or "weights" not in data:
        raise ValueError(f"{path}: expected an object with a 'weights' list")
    return normalize(data["weights"])


def dump_distribution(p: Sequence[Fraction]) -> str:
    return json.dumps({"weights": [str(Fraction(x)) for x in p]})
