"""Core p-adic arithmetic: worked examples plus randomized properties."""

import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from orbitgap.errors import ContextMismatch, InputError, PrecisionExhausted
from orbitgap.padic import (
    INF,
    MahlerSeries,
    PadicContext,
    PrecisionLedger,
    TruncatedSeries,
    binomial_mod,
    binomial_row,
    exact_div,
    forward_differences,
    vp_factorial,
)

C53 = PadicContext(5, 3)
C34 = PadicContext(3, 4)


def test_context_rejects_non_primes_and_two():
    with pytest.raises(InputError):
        PadicContext(4, 3)
    with pytest.raises(InputError):
        PadicContext(2, 3)
    with pytest.raises(InputError):
        PadicContext(5, 0)


def test_basic_arithmetic():
    a, b = C53.scalar(2), C53.scalar(3)
    assert (a * b).residue == 6 and (a * b).valuation == 0
    assert (a + C53.zero()) == a
    assert C53.scalar(50).valuation == 2  # 50 = 2 * 5^2
    assert C53.scalar(0).valuation is INF
    assert PadicContext(3, 4).scalar(7).valuation == 0


def test_context_mismatch_raises():
    with pytest.raises(ContextMismatch):
        C53.scalar(1) + C34.scalar(1)


def test_fraction_reduction():
    # 1/2 = 63 mod 125 since 2*63 = 126 = 1 mod 125
    x = C53.scalar(Fraction(1, 2))
    assert (x * C53.scalar(2)).residue == 1
    with pytest.raises(InputError):
        C53.scalar(Fraction(1, 5))


def test_exact_div_and_ledger():
    ledger = PrecisionLedger()
    a, b = C53.scalar(50), C53.scalar(10)
    q = exact_div(a, b, ledger)
    assert q.residue == 5
    assert ledger.total == 1  # one uniformizer digit lost
    with pytest.raises(InputError):
        exact_div(C53.scalar(1), C53.scalar(5))
    with pytest.raises(PrecisionExhausted):
        exact_div(C53.scalar(5), C53.scalar(0))


def test_binomial_examples():
    assert binomial_mod(7, 0, C53).residue == 1
    assert binomial_mod(5, 2, C53).residue == 10
    c = binomial_mod(9, 3, C34)
    assert c.residue == 84 % 81 == 3 and c.valuation == 1
    # p-adic argument agrees with the integer path on canonical representatives
    n = C53.scalar(9)
    assert binomial_mod(n, 3).residue == math.comb(9, 3) % 125


def test_binomial_row_matches_comb():
    ctx = PadicContext(3, 8)
    n = ctx.scalar(25)
    row = binomial_row(n, 10)
    for k in range(11):
        assert row[k].residue == math.comb(25, k) % ctx.modulus


def test_binomial_row_padic_consistency():
    # C(n, k) is continuous: congruent arguments give congruent values
    ctx_hi = PadicContext(3, 12)
    ctx_lo = PadicContext(3, 4)
    e = vp_factorial(6, 3)
    n1, n2 = 7, 7 + 3**12
    r1 = binomial_mod(ctx_hi.scalar(n1), 6)
    r2 = binomial_mod(n2, 6, ctx_hi)
    assert (r1.residue - r2.residue) % 3 ** (12 - e) == 0
    assert ctx_lo  # silence unused warning paths


def test_binomial_insufficient_precision():
    ctx = PadicContext(3, 2)
    with pytest.raises(PrecisionExhausted):
        binomial_mod(ctx.scalar(5), 9)  # v_3(9!) = 4 >= 2


@given(st.integers(0, 5**6 - 1), st.integers(0, 5**6 - 1))
@settings(max_examples=100)
def test_product_valuation_additive_below_cap(x, y):
    ctx = PadicContext(5, 6)
    a, b = ctx.scalar(x), ctx.scalar(y)
    if a.valuation is not INF and b.valuation is not INF:
        if a.valuation + b.valuation < ctx.precision:
            assert (a * b).valuation == a.valuation + b.valuation


def _random_series(ctx, nvars, rng_data, max_terms=4):
    items = {}
    for _ in range(rng_data.draw(st.integers(1, max_terms))):
        exp = tuple(rng_data.draw(st.integers(0, 3)) for _ in range(nvars))
        items[exp] = rng_data.draw(st.integers(0, ctx.modulus - 1))
    return TruncatedSeries.make(ctx, nvars, items)


@given(st.data())
@settings(max_examples=60)
def test_gauss_norm_submultiplicative(data):
    ctx = PadicContext(3, 6)
    f = _random_series(ctx, 2, data)
    g = _random_series(ctx, 2, data)
    fg = f * g
    assert fg.gauss_valuation >= f.gauss_valuation + g.gauss_valuation


@given(st.lists(st.integers(-(10**6), 10**6), min_size=2, max_size=12))
@settings(max_examples=100)
def test_mahler_matches_integer_difference_oracle(seq):
    """Forward-difference reconstruction over exact integers is the oracle."""
    ctx = PadicContext(5, 10)
    values = [ctx.vector([v]) for v in seq]
    series = MahlerSeries.from_values(values)
    # oracle: exact integer differences, then exact binomial reconstruction
    diffs = [list(seq)]
    while len(diffs[-1]) > 1:
        row = diffs[-1]
        diffs.append([b - a for a, b in zip(row, row[1:])])
    exact_coeffs = [row[0] for row in diffs]
    for n in range(len(seq)):
        recon = sum(exact_coeffs[k] * math.comb(n, k) for k in range(len(exact_coeffs)))
        assert series.evaluate(n).coords[0].residue == recon % ctx.modulus
        assert recon == seq[n]


def test_mahler_constant_series():
    ctx = PadicContext(5, 6)
    v = ctx.vector([7])
    series = MahlerSeries(ctx, (v,))
    for n in [0, 3, ctx.scalar(12)]:
        assert series.evaluate(n) == v


def test_mahler_geometric_example():
    # coefficients 5^k interpolate 6^n: at n=2, 1 + 2*5 + 25 = 36
    ctx = PadicContext(5, 8)
    coeffs = tuple(ctx.vector([5**k]) for k in range(6))
    series = MahlerSeries(ctx, coeffs)
    assert series.evaluate(2).coords[0].residue == 36
    assert series.evaluate(0).coords[0].residue == 1


def test_series_evaluate_and_compose():
    ctx = PadicContext(5, 6)
    f = TruncatedSeries.make(ctx, 1, {(2,): 1, (0,): 1})  # x^2 + 1
    x = ctx.vector([3])
    assert f.evaluate(x).residue == 10
    g = TruncatedSeries.make(ctx, 1, {(1,): 5, (0,): 2})  # 5t + 2
    comp = f.compose([g])  # (5t+2)^2 + 1
    assert comp.coefficient((0,)).residue == 5
    assert comp.coefficient((1,)).residue == 20
    assert comp.coefficient((2,)).residue == 25


def test_forward_differences_shape():
    ctx = PadicContext(3, 4)
    vals = [ctx.vector([v]) for v in (1, 4, 9, 16)]
    diffs = forward_differences(vals)
    assert [d.coords[0].residue for d in diffs] == [1, 3, 2, 0]
