"""JSON forms of results; fractions are always written as strings."""

from __future__ import annotations

import json
from fractions import Fraction
from pathlib import Path

import gmpy2

from .ddg import LinearEncoding
from .divergence import Divergence, is_infinite
from .numsys import PrecisionSpec
from .optimize import ApproxResult, Assignment

DECIMAL_DIGITS = 60


def format_value(x) -> str:
    """Exact values as ``a/b``; MPFR values in scientific notation; infinities as ``inf``."""
    if isinstance(x, Fraction):
        return str(x)
    if is_infinite(x):
        return "inf" if x > 0 else "-inf"
    if isinstance(x, float):
        return repr(x)
    if x == 0:
        return "0e+00"
    mant, exp, _ = x.digits(10, DECIMAL_DIGITS + 1)
    sign = "-" if mant.startswith("-") else ""
    mant = mant.lstrip("-")
    return f"{sign}{mant[0]}.{mant[1:]}e{exp - 1:+03d}"


def parse_value(text: str):
    if text in ("inf", "-inf"):
        return float(text)
    if "e" in text or "E" in text:
        return gmpy2.mpfr(text, 256)
    return Fraction(text)


def short_value(x) -> str:
    if isinstance(x, Fraction):
        return f"{float(x):.6g}"
    if is_infinite(x):
        return "inf" if x > 0 else "-inf"
    return f"{float(x):.6g}"


def approx_to_dict(result: ApproxResult, config: dict | None = None) -> dict:
    out = {
        "k": result.spec.k,
        "l": result.spec.l,
        "Z": str(result.assignment.Z),
        "M": [str(m) for m in result.assignment.M],
        "divergence": str(result.divergence),
        "error": format_value(result.error),
        "mode": result.mode,
    }
    if config is not None:
        out["config"] = config
    return out


def approx_from_dict(data: dict) -> ApproxResult:
    try:
        spec = PrecisionSpec(int(data["k"]), int(data["l"]))
        assignment = Assignment(tuple(int(m) for m in data["M"]), int(data["Z"]))
        div = Divergence.parse(data["divergence"])
        error = parse_value(data["error"])
    except KeyError as exc:
        raise ValueError(f"approximation JSON lacks field {exc}") from None
    if assignment.Z != spec.Z:
        raise ValueError(f"Z={assignment.Z} does not match k={spec.k}, l={spec.l}")
    return ApproxResult(assignment, spec, error, div, data.get("mode", "exact"))


def load_encoding(path: str | Path) -> LinearEncoding:
    """Read an encoding in JSON or the binary ``DDG1`` form."""
    blob = Path(path).read_bytes()
    if blob[:4] == b"DDG1":
        return LinearEncoding.from_bytes(blob)
    return LinearEncoding.from_json(blob.decode())


def dumps(obj) -> str:
    return json.dumps(obj, indent=None, sort_keys=False)
