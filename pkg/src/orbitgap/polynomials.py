"""Exact sparse multivariate polynomial arithmetic over the rationals.

A polynomial is a dict mapping monomial exponent tuples to Fraction
coefficients; zero coefficients are never stored.  Example in 2 variables:

    x0^2 * x1 + 3  ->  {(2, 1): Fraction(1), (0, 0): Fraction(3)}

PolyMap bundles N polynomials in N variables: a polynomial self-map of
affine N-space with exact rational coefficients.  Modular images (int
coefficient dicts modulo m) are produced by reduce_poly / ModularMap for
the residue-field and p-power computations.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .errors import InputError

Exponent = tuple[int, ...]
Poly = dict[Exponent, Fraction]


def make_const(nvars: int, value) -> Poly:
    c = Fraction(value)
    return {} if c == 0 else {(0,) * nvars: c}


def make_var(nvars: int, i: int) -> Poly:
    exp = [0] * nvars
    exp[i] = 1
    return {tuple(exp): Fraction(1)}


def poly_add(p: Poly, q: Poly) -> Poly:
    out = dict(p)
    for e, c in q.items():
        t = out.get(e, Fraction(0)) + c
        if t == 0:
            out.pop(e, None)
        else:
            out[e] = t
    return out


def poly_neg(p: Poly) -> Poly:
    return {e: -c for e, c in p.items()}


def poly_sub(p: Poly, q: Poly) -> Poly:
    return poly_add(p, poly_neg(q))


def poly_mul(p: Poly, q: Poly) -> Poly:
    out: Poly = {}
    for e1, c1 in p.items():
        for e2, c2 in q.items():
            e = tuple(a + b for a, b in zip(e1, e2))
            t = out.get(e, Fraction(0)) + c1 * c2
            if t == 0:
                out.pop(e, None)
            else:
                out[e] = t
    return out


def poly_scale(p: Poly, s) -> Poly:
    s = Fraction(s)
    if s == 0:
        return {}
    return {e: c * s for e, c in p.items()}


def poly_degree(p: Poly) -> int:
    return max((sum(e) for e in p), default=0)


def poly_eval(p: Poly, point) -> Fraction:
    acc = Fraction(0)
    for e, c in p.items():
        term = c
        for x, k in zip(point, e):
            if k:
                term *= Fraction(x) ** k
        acc += term
    return acc


def poly_derivative(p: Poly, i: int) -> Poly:
    out: Poly = {}
    for e, c in p.items():
        if e[i] == 0:
            continue
        ne = list(e)
        ne[i] -= 1
        out[tuple(ne)] = c * e[i]
    return out


def poly_compose(p: Poly, args: list[Poly], term_guard: int | None = None) -> Poly:
    """Substitute args[i] for variable i; exact over the rationals."""
    if not p:
        return {}
    nvars_out = max((len(next(iter(a))) for a in args if a), default=0)
    if nvars_out == 0:  # every argument constant
        nvars_out = 1
    max_exp = [0] * len(args)
    for e in p:
        for i, k in enumerate(e):
            max_exp[i] = max(max_exp[i], k)
    pow_cache: list[list[Poly]] = []
    for i, a in enumerate(args):
        powers = [make_const(nvars_out, 1)]
        for _ in range(max_exp[i]):
            powers.append(poly_mul(powers[-1], a))
        pow_cache.append(powers)
    out: Poly = {}
    for e, c in p.items():
        term = make_const(nvars_out, c)
        for i, k in enumerate(e):
            if k:
                term = poly_mul(term, pow_cache[i][k])
        out = poly_add(out, term)
        if term_guard is not None and len(out) > term_guard:
            raise InputError("exact composition exceeded the term guard")
    return out


def denominator_primes(p: Poly) -> set[int]:
    primes: set[int] = set()
    for c in p.values():
        d = c.denominator
        q = 2
        while q * q <= d:
            if d % q == 0:
                primes.add(q)
                while d % q == 0:
                    d //= q
            q += 1
        if d > 1:
            primes.add(d)
    return primes


def reduce_poly(p: Poly, m: int) -> dict[Exponent, int]:
    """Coefficients reduced mod m; denominators must be invertible mod m."""
    out: dict[Exponent, int] = {}
    for e, c in p.items():
        try:
            r = c.numerator * pow(c.denominator, -1, m) % m
        except ValueError:
            raise InputError(f"coefficient {c} is not invertible mod {m}") from None
        if r:
            out[e] = r
    return out


def modular_eval(p: dict[Exponent, int], point, m: int) -> int:
    acc = 0
    for e, c in p.items():
        term = c
        for x, k in zip(point, e):
            if k:
                term = term * pow(x, k, m) % m
        acc = (acc + term) % m
    return acc


def modular_compose(p: dict[Exponent, int], args: list[dict[Exponent, int]], m: int) -> dict[Exponent, int]:
    """Composition with coefficients mod m (same convolution, modular ring)."""

    def mul(a, b):
        out: dict[Exponent, int] = {}
        for e1, c1 in a.items():
            for e2, c2 in b.items():
                e = tuple(x + y for x, y in zip(e1, e2))
                out[e] = (out.get(e, 0) + c1 * c2) % m
        return {e: c for e, c in out.items() if c}

    nvars_out = max((len(next(iter(a))) for a in args if a), default=1)
    out: dict[Exponent, int] = {}
    for e, c in p.items():
        term = {(0,) * nvars_out: c}
        for i, k in enumerate(e):
            for _ in range(k):
                term = mul(term, args[i])
        for key, val in term.items():
            out[key] = (out.get(key, 0) + val) % m
    return {e: c for e, c in out.items() if c}


@dataclass(frozen=True)
class PolyMap:
    """N polynomials in N variables with exact rational coefficients."""

    nvars: int
    polys: tuple[Poly, ...]

    def __post_init__(self):
        if len(self.polys) != self.nvars:
            raise InputError("a self-map needs as many polynomials as variables")
        for p in self.polys:
            for e in p:
                if len(e) != self.nvars:
                    raise InputError("exponent arity mismatch")

    @staticmethod
    def from_lists(nvars: int, polys) -> "PolyMap":
        cleaned = []
        for p in polys:
            q: Poly = {}
            for e, c in dict(p).items():
                c = Fraction(c)
                if c != 0:
                    q[tuple(e)] = c
            cleaned.append(q)
        return PolyMap(nvars, tuple(cleaned))

    def evaluate(self, point) -> tuple[Fraction, ...]:
        return tuple(poly_eval(p, point) for p in self.polys)

    def iterate_point(self, point, k: int) -> tuple[Fraction, ...]:
        pt = tuple(Fraction(x) for x in point)
        for _ in range(k):
            pt = self.evaluate(pt)
        return pt

    def compose(self, other: "PolyMap", term_guard: int | None = None) -> "PolyMap":
        """self after other: x -> self(other(x))."""
        return PolyMap(
            self.nvars,
            tuple(poly_compose(p, list(other.polys), term_guard) for p in self.polys),
        )

    def iterate_map(self, k: int, term_guard: int | None = None) -> "PolyMap":
        out = identity_map(self.nvars)
        for _ in range(k):
            out = self.compose(out, term_guard)
        return out

    def jacobian(self) -> list[list[Poly]]:
        return [[poly_derivative(p, j) for j in range(self.nvars)] for p in self.polys]

    def degree(self) -> int:
        return max(poly_degree(p) for p in self.polys)

    def denominator_primes(self) -> set[int]:
        out: set[int] = set()
        for p in self.polys:
            out |= denominator_primes(p)
        return out

    def max_coeff_bits(self) -> int:
        bits = 0
        for p in self.polys:
            for c in p.values():
                bits = max(bits, c.numerator.bit_length(), c.denominator.bit_length())
        return bits


def identity_map(nvars: int) -> PolyMap:
    return PolyMap(nvars, tuple(make_var(nvars, i) for i in range(nvars)))


@dataclass(frozen=True)
class ModularMap:
    """A PolyMap reduced mod m (m a prime or prime power)."""

    modulus: int
    nvars: int
    polys: tuple[dict[Exponent, int], ...]

    @staticmethod
    def from_map(f: PolyMap, m: int) -> "ModularMap":
        return ModularMap(m, f.nvars, tuple(reduce_poly(p, m) for p in f.polys))

    def __call__(self, point: tuple[int, ...]) -> tuple[int, ...]:
        return tuple(modular_eval(p, point, self.modulus) for p in self.polys)

    def iterate(self, point: tuple[int, ...], k: int) -> tuple[int, ...]:
        for _ in range(k):
            point = self(point)
        return point
