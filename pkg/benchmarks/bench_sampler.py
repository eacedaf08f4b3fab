"""Throughput of the batch sampler: numba kernel against the pure-Python loop.

    python3 benchmarks/bench_sampler.py [--num N] [--bits K]

Both backends are fed the same seed and must produce identical outcomes.
"""

import argparse
import time
from fractions import Fraction

import numpy as np

from optsample.ddg import build_encoding, expected_bits, shannon_entropy
from optsample.distributions import binomial
from optsample.divergence import Divergence
from optsample.optimize import closest_approx
from optsample.runtime import SplitMix64Source, sample_batch, sample_encoding


def timed(fn, repeat=3):
    best = float("inf")
    out = None
    for _ in range(repeat):
        start = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - start)
    return best, out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--num", type=int, default=10**7)
    ap.add_argument("--python-num", type=int, default=10**6)
    ap.add_argument("--bits", type=int, default=32)
    args = ap.parse_args()

    p = binomial(99, Fraction(1, 25))
    approx = closest_approx(p, args.bits, Divergence("tv"))
    enc = build_encoding(approx.assignment, approx.spec)
    print(f"target Binomial(99, 1/25): n={len(p)}, H={float(shannon_entropy(p)):.3f} bits")
    print(f"encoding k={approx.spec.k} l={approx.spec.l}: {len(enc)} cells, "
          f"E[bits]={float(expected_bits(enc)):.3f}")

    start = time.perf_counter()
    sample_batch(enc, 10, SplitMix64Source(0), backend="numba")
    print(f"numba compile/load: {time.perf_counter() - start:.2f}s")

    t_nb, a = timed(lambda: sample_batch(enc, args.num, SplitMix64Source(1), backend="numba"))
    t_py, b = timed(lambda: sample_batch(enc, args.python_num, SplitMix64Source(1), backend="python"), repeat=1)
    assert np.array_equal(a[: args.python_num], b), "backends disagree"

    src = SplitMix64Source(1)
    m = args.python_num // 10
    t_sc, _ = timed(lambda: [sample_encoding(enc, src) for _ in range(m)], repeat=1)

    rows = [
        ("numba batch", args.num / t_nb),
        ("python batch", args.python_num / t_py),
        ("python scalar", m / t_sc),
    ]
    for name, rate in rows:
        print(f"{name:>14}: {rate:12.4g} samples/s")
    print(f"speedup numba/python batch: {rows[0][1] / rows[1][1]:.1f}x")


if __name__ == "__main__":
    main()
