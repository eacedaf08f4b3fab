import logging
import random
from fractions import Fraction

import pytest

from optsample.baselines import (
    inversion_counts,
    inversion_output_distribution,
    inversion_report,
    inversion_sample,
    rejection_bits,
    rejection_expected_bits,
    rejection_report,
    rejection_sample,
)
from optsample.divergence import Divergence, EvalContext
from optsample.optimize import Assignment, closest_approx
from optsample.runtime import NEED_MORE_BITS, FixedBitsSource, enumerate_outcomes
from oracles import inversion_by_counting, random_distribution

F = Fraction
TV = Divergence("tv")


def test_rejection_examples():
    M = Assignment((1, 1), 2)
    assert rejection_sample(M, FixedBitsSource([1])) == 1
    assert rejection_expected_bits(2, 1) == 1
    M3 = Assignment((1, 1, 1), 3)
    src = FixedBitsSource([1, 1, 0, 1])
    assert rejection_sample(M3, src) == 1
    assert src.bits_consumed == 4
    assert rejection_expected_bits(3, 2) == F(8, 3)
    assert rejection_sample(M3, FixedBitsSource([1, 1])) is NEED_MORE_BITS


def test_rejection_bits():
    assert [rejection_bits(Z) for Z in (1, 2, 3, 4, 5, 30)] == [0, 1, 2, 2, 3, 5]
    with pytest.raises(ValueError):
        rejection_bits(0)
    with pytest.raises(ValueError):
        rejection_expected_bits(3, 3)


def test_rejection_wastes_entropy_on_uniform_numerators():
    # Z = 2**16 with sixteen equal numerators: 16 bits drawn, 4 bits of entropy
    assert rejection_expected_bits(2**16, 16) == 16
    rep = rejection_report([F(1, 16)] * 16, TV)
    assert rep.expected_bits == 4 and rep.error_vs_target == 0


def test_rejection_enumeration_tail():
    M = Assignment((2, 1, 2), 5)
    k = rejection_bits(5)
    for t in (1, 2, 3):
        e = enumerate_outcomes(lambda s: rejection_sample(M, s), k * t, n=3)
        tail = (1 - F(5, 2**k)) ** t
        assert e.undetermined == tail
        assert e.masses == [F(m, 5) * (1 - tail) for m in M.M]


def test_inversion_examples():
    p = [F(3, 10), F(7, 10)]
    assert inversion_sample(p, 2, FixedBitsSource([1, 0])) == 1
    assert inversion_output_distribution(p, 2) == [F(1, 2), F(1, 2)]
    assert inversion_output_distribution([F(1, 2), F(1, 2)], 1) == [F(1, 2), F(1, 2)]
    assert inversion_output_distribution([F(1, 3)] * 3, 2) == [F(1, 2), F(1, 4), F(1, 4)]
    assert inversion_output_distribution([F(1, 4), F(0), F(3, 4)], 3) == [F(1, 4), F(0), F(3, 4)]
    assert inversion_sample(p, 2, FixedBitsSource([1])) is NEED_MORE_BITS
    with pytest.raises(ValueError):
        inversion_sample(p, 0, FixedBitsSource([1]))


@pytest.mark.parametrize("inclusive", [False, True])
def test_inversion_formula_matches_enumeration(inclusive, caplog):
    rng = random.Random(51)
    with caplog.at_level(logging.WARNING):
        for _ in range(60):
            p = random_distribution(rng, rng.randint(2, 6), 20, zeros=True)
            k = rng.randint(1, 9)
            e = enumerate_outcomes(lambda s: inversion_sample(p, k, s, inclusive), k, n=len(p))
            assert e.undetermined == 0 and e.expected_bits == k
            assert inversion_output_distribution(p, k, inclusive) == e.masses
            assert e.masses == inversion_by_counting(p, k, inclusive)
            assert sum(inversion_counts(p, k, inclusive)) == 2**k
    assert "normalizing" not in caplog.text


def test_inclusive_variant_differs_at_boundaries():
    p = [F(1, 4), F(3, 4)]
    assert inversion_output_distribution(p, 2) == [F(1, 4), F(3, 4)]
    assert inversion_output_distribution(p, 2, inclusive=True) == [F(1, 2), F(1, 2)]


def test_dyadic_optimum_dominates_inversion():
    rng = random.Random(52)
    kinds = [TV, Divergence("hellinger"), Divergence("pearson-chi2"), Divergence("forward-kl"),
             Divergence("reverse-kl"), Divergence("triangular"), Divergence("alpha", F(1, 2))]
    for _ in range(20):
        p = random_distribution(rng, rng.randint(2, 5), 50)
        for k in (4, 8):
            for div in kinds:
                ctx = EvalContext.for_divergence(div)
                inv = inversion_report(p, k, div, ctx)
                opt = closest_approx(p, k, div, ctx, cls="dyadic")
                assert not ctx.less(inv.error_vs_target, opt.error)


def test_reports():
    p = [F(3, 10), F(7, 10)]
    inv = inversion_report(p, 2, TV)
    assert (inv.method, inv.k, inv.Z, inv.expected_bits, inv.error_vs_target) == ("inversion", 2, 4, 2, F(1, 5))
    assert sum(inv.output_distribution) == 1
    rej = rejection_report(p, TV)
    assert (rej.method, rej.k, rej.Z, rej.error_vs_target) == ("rejection", 4, 10, 0)
    assert rej.expected_bits == F(64, 10)
