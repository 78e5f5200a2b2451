"""Exact rational polynomial arithmetic and modular reductions."""

from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from orbitgap.errors import InputError
from orbitgap.polynomials import (
    ModularMap,
    PolyMap,
    identity_map,
    make_const,
    make_var,
    modular_compose,
    poly_compose,
    poly_derivative,
    poly_eval,
    reduce_poly,
)

SQ_PLUS_ONE = PolyMap.from_lists(1, [{(2,): 1, (0,): 1}])


def test_eval_and_compose_agree():
    f = {(2, 0): Fraction(1), (0, 1): Fraction(3)}  # x^2 + 3y
    args = [make_const(2, 2), make_var(2, 1)]  # x -> 2, y -> y
    comp = poly_compose(f, args)
    assert poly_eval(comp, (0, 5)) == poly_eval(f, (2, 5))


def test_derivative():
    f = {(3,): Fraction(2), (1,): Fraction(5)}
    assert poly_derivative(f, 0) == {(2,): Fraction(6), (0,): Fraction(5)}


def test_map_iteration_matches_composition():
    f2 = SQ_PLUS_ONE.compose(SQ_PLUS_ONE)
    for x in (0, 1, Fraction(1, 3), -2):
        assert f2.evaluate((x,))[0] == SQ_PLUS_ONE.iterate_point((x,), 2)[0]


def test_reduce_examples():
    # (3x+1)/2 mod 5 -> 4x + 3 since 1/2 = 3 mod 5
    p = {(1,): Fraction(3, 2), (0,): Fraction(1, 2)}
    assert reduce_poly(p, 5) == {(1,): 4, (0,): 3}
    with pytest.raises(InputError):
        reduce_poly({(0,): Fraction(1, 5)}, 5)


def test_denominator_primes():
    f = PolyMap.from_lists(1, [{(2,): Fraction(1, 2), (0,): Fraction(1, 6)}])
    assert f.denominator_primes() == {2, 3}


def test_quasi_finite_guard_requires_square_map():
    with pytest.raises(InputError):
        PolyMap(2, ({(1, 0): Fraction(1)},))


coeff = st.integers(-9, 9)


def _random_map(data, nvars):
    polys = []
    for _ in range(nvars):
        p = {}
        for _ in range(data.draw(st.integers(1, 3))):
            exp = tuple(data.draw(st.integers(0, 2)) for _ in range(nvars))
            p[exp] = Fraction(data.draw(coeff))
        # force quasi-finiteness: guarantee a non-constant term
        exp = tuple(1 if i == 0 else 0 for i in range(nvars))
        p.setdefault(exp, Fraction(1))
        polys.append({e: c for e, c in p.items() if c != 0})
    return PolyMap.from_lists(nvars, polys)


@given(st.data())
@settings(max_examples=50, deadline=None)
def test_reduction_is_a_homomorphism(data):
    """reduce(f o f) = reduce(f) o reduce(f) and reduce(f(a)) = f_p(a_p)."""
    nvars = data.draw(st.integers(1, 2))
    f = _random_map(data, nvars)
    p = data.draw(st.sampled_from([3, 5, 7, 11]))
    point = tuple(data.draw(st.integers(0, p - 1)) for _ in range(nvars))

    composed = f.compose(f)
    # composition of reductions equals reduction of the composition, coefficientwise
    assert reduce_poly(composed.polys[0], p) == modular_compose(
        reduce_poly(f.polys[0], p), [reduce_poly(q, p) for q in f.polys], p
    )

    fp = ModularMap.from_map(f, p)
    exact = f.evaluate(point)
    assert fp(point) == tuple(Fraction(x).numerator % p for x in exact)


def test_identity_map():
    ident = identity_map(3)
    assert ident.evaluate((1, 2, 3)) == (1, 2, 3)


def test_modular_map_iterate():
    fp = ModularMap.from_map(SQ_PLUS_ONE, 5)
    assert fp.iterate((0,), 3) == (0,)  # 0 -> 1 -> 2 -> 0 mod 5
