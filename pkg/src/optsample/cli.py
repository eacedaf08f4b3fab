"""Command-line interface: ``optsample <command> [options]``.

Exit status is 0 on success, 1 for usage errors and 2 for domain errors, which
are also reported as a JSON object on stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import baselines, ddg, distributions, serialize
from .divergence import Divergence, EvalContext, divergence_values
from .numsys import OrderBudgetExceeded, minimal_exact_precision
from .optimize import closest_approx
from .runtime import SplitMix64Source, sample_batch


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


def _divergence(args) -> Divergence:
    name = args.divergence
    if args.alpha is not None:
        if name not in ("alpha", None):
            raise UsageError("--alpha only applies to --divergence alpha")
        return Divergence("alpha", Fraction(args.alpha))
    return Divergence.parse(name)


def _context(args, div: Divergence) -> EvalContext:
    return EvalContext.for_divergence(div, args.mode, args.mantissa_bits)


def _config(args) -> dict:
    skip = {"func"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip and v is not None}


def _emit(text: str | bytes, out: str | None) -> None:
    if out is None:
        if isinstance(text, bytes):
            sys.stdout.buffer.write(text)
        else:
            sys.stdout.write(text if text.endswith("\n") else text + "\n")
        return
    path = Path(out)
    if isinstance(text, bytes):
        path.write_bytes(text)
    else:
        path.write_text(text if text.endswith("\n") else text + "\n")


def _require(args, *names):
    for name in names:
        if getattr(args, name) is None:
            raise UsageError(f"--{name.replace('_', '-')} is required for {args.command}")


def _approx(args):
    _require(args, "dist", "bits")
    p = distributions.load_distribution(args.dist)
    div = _divergence(args)
    ctx = _context(args, div)
    return p, closest_approx(p, args.bits, div, ctx, args.cls)


def cmd_approx(args) -> int:
    _, result = _approx(args)
    data = serialize.approx_to_dict(result, _config(args))
    if args.out is None:
        _emit(json.dumps(data), None)
    else:
        _emit(json.dumps(data), args.out)
        print(f"k={result.spec.k} l={result.spec.l} Z={result.assignment.Z} "
              f"error={serialize.short_value(result.error)}")
    return 0


def cmd_build(args) -> int:
    if args.approx is not None:
        result = serialize.approx_from_dict(json.loads(Path(args.approx).read_text()))
    else:
        _, result = _approx(args)
    enc = ddg.build_encoding(result.assignment, result.spec)
    if args.format == "binary":
        if args.out is None:
            raise UsageError("--format binary needs --out")
        _emit(enc.to_bytes(), args.out)
    else:
        _emit(enc.to_json(), args.out)
    return 0


def cmd_sample(args) -> int:
    _require(args, "encoding")
    enc = serialize.load_encoding(args.encoding)
    seed = 0 if args.seed is None else args.seed
    src = SplitMix64Source(seed)
    out = sample_batch(enc, args.num, src)
    if args.format == "counts":
        counts = np.bincount(out, minlength=enc.n)
        data = {"counts": [int(c) for c in counts], "samples": args.num,
                "bits_consumed": src.bits_consumed, "seed": seed}
        _emit(json.dumps(data), args.out)
    else:
        _emit("\n".join(map(str, out.tolist())), args.out)
    return 0


def cmd_analyze(args) -> int:
    _require(args, "encoding")
    enc = serialize.load_encoding(args.encoding)
    report = ddg.analyze(enc)
    data = report.to_dict()
    if args.dist is not None:
        p = distributions.load_distribution(args.dist)
        if len(p) != enc.n:
            raise ValueError(f"target has {len(p)} outcomes, encoding has {enc.n}")
        div = _divergence(args)
        ctx = _context(args, div)
        q = report.output_distribution
        Z = math.lcm(*(x.denominator for x in q))
        M = [x.numerator * (Z // x.denominator) for x in q]
        data["divergence"] = str(div)
        data["error"] = serialize.format_value(divergence_values(p, M, Z, div, ctx))
    data["config"] = _config(args)
    _emit(json.dumps(data), args.out)
    return 0


def cmd_exact_precision(args) -> int:
    _require(args, "dist")
    p = distributions.load_distribution(args.dist)
    spec = minimal_exact_precision(p)
    _emit(json.dumps({"k": spec.k, "l": spec.l, "Z": str(spec.Z)}), args.out)
    return 0


def _csv(rows: list[list], header: list[str]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def cmd_compare(args) -> int:
    _require(args, "dist", "bits")
    p = distributions.load_distribution(args.dist)
    div = _divergence(args)
    ctx = _context(args, div)
    k = args.bits
    rows = []
    for cls in ("all", "dyadic"):
        res = closest_approx(p, k, div, ctx, cls)
        bits = ddg.expected_bits(ddg.build_encoding(res.assignment, res.spec))
        rows.append([f"optimal-{cls}", k, res.spec.l, res.assignment.Z, div,
                     serialize.format_value(res.error), str(bits)])
    inv = baselines.inversion_report(p, k, div, ctx, inclusive=args.inclusive)
    rows.append(["inversion", k, k, inv.Z, div, serialize.format_value(inv.error_vs_target), str(inv.expected_bits)])
    rej = baselines.rejection_report(p, div, ctx)
    rows.append(["rejection", rej.k, rej.k, rej.Z, div, serialize.format_value(rej.error_vs_target),
                 str(rej.expected_bits)])
    header = ["method", "k", "l", "Z", "divergence", "error", "expected_bits"]
    _emit(_csv(rows, header), args.out)
    return 0


def cmd_sweep(args) -> int:
    _require(args, "dist")
    names = args.divergences.split(",") if args.divergences else [args.divergence]
    rows = []
    for path in [args.dist] + args.extra_dist:
        p = distributions.load_distribution(path)
        entropy = float(ddg.shannon_entropy(p))
        for name in names:
            div = Divergence.parse(name)
            ctx = EvalContext.for_divergence(div, args.mode, args.mantissa_bits)
            for k in range(args.k_min, args.k_max + 1):
                res = closest_approx(p, k, div, ctx, args.cls)
                bits = ddg.expected_bits(ddg.build_encoding(res.assignment, res.spec))
                rows.append([path, f"{entropy:.6f}", div, k, res.spec.l, res.assignment.Z,
                             serialize.format_value(res.error), f"{float(bits):.6f}"])
    header = ["target", "entropy", "divergence", "k", "l", "Z", "error", "expected_bits"]
    _emit(_csv(rows, header), args.out)
    return 0


def cmd_gen(args) -> int:
    if args.family == "binomial":
        _require(args, "n", "p")
        p = distributions.binomial(args.n, Fraction(args.p))
    else:
        _require(args, "population", "successes", "draws")
        p = distributions.hypergeometric(args.population, args.successes, args.draws)
    _emit(distributions.dump_distribution(p), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="optsample", description="Optimal limited-precision entropy-optimal samplers.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, divergence=True):
        p.add_argument("--dist", help="distribution JSON {\"weights\": [...]}")
        p.add_argument("--out", help="output file (default stdout)")
        if divergence:
            p.add_argument("--bits", type=int, help="precision k")
            p.add_argument("--divergence", default="tv", help="tv, hellinger, pearson-chi2, triangular, "
                           "reverse-kl, forward-kl or alpha:<rational>")
            p.add_argument("--alpha", help="alpha parameter (with --divergence alpha)")
            p.add_argument("--mode", choices=("exact", "float"))
            p.add_argument("--mantissa-bits", type=int, default=256)
            p.add_argument("--class", dest="cls", choices=("all", "dyadic"), default="all")

    p = sub.add_parser("approx", help="closest approximation at k bits")
    common(p)
    p.set_defaults(func=cmd_approx)

    p = sub.add_parser("build", help="build a sampler encoding")
    common(p)
    p.add_argument("--approx", help="approximation JSON from 'approx' (instead of --dist)")
    p.add_argument("--format", choices=("json", "binary"), default="json")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("sample", help="draw samples from an encoding")
    p.add_argument("--encoding", help="encoding file (JSON or DDG1 binary)")
    p.add_argument("--seed", type=int)
    p.add_argument("--num", type=int, default=10)
    p.add_argument("--format", choices=("stream", "counts"), default="stream")
    p.add_argument("--out")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("analyze", help="exact output distribution and bit cost of an encoding")
    common(p)
    p.add_argument("--encoding")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("exact-precision", help="smallest (k, l) that represents the target exactly")
    common(p, divergence=False)
    p.set_defaults(func=cmd_exact_precision)

    p = sub.add_parser("compare", help="optimal sampler against inversion and rejection (CSV)")
    common(p)
    p.add_argument("--inclusive", action="store_true", help="inversion with <= instead of <")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("sweep", help="optimal error over a range of k (CSV)")
    common(p)
    p.add_argument("--extra-dist", action="append", default=[], help="further target files")
    p.add_argument("--divergences", help="comma-separated list (overrides --divergence)")
    p.add_argument("--k-min", type=int, default=1)
    p.add_argument("--k-max", type=int, default=16)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("gen", help="write an exact weight file for a standard family")
    p.add_argument("family", choices=("binomial", "hypergeometric"))
    p.add_argument("--n", type=int)
    p.add_argument("--p")
    p.add_argument("--population", type=int)
    p.add_argument("--successes", type=int)
    p.add_argument("--draws", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_gen)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        sys.stderr.write(f"optsample: error: {exc}\n")
        return 1
    except (ValueError, ArithmeticError, OSError, json.JSONDecodeError) as exc:
        payload = {"error": type(exc).__name__, "message": str(exc)}
        if isinstance(exc, OrderBudgetExceeded):
            payload["bound"] = exc.bound
        sys.stderr.write(json.dumps(payload) + "\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
