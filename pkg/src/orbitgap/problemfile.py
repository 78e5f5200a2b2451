"""Problem file parsing: a single human-writable JSON document.

Every coefficient is an exact rational written as an integer or a string
"n" / "n/d"; floats are rejected outright.  A polynomial is a list of
[exponents, coefficient] pairs, e.g. x^2 - 2 in one variable:

    [[[2], 1], [[0], -2]]

Unknown keys are rejected at every level so typos cannot silently change a
run.  The canonical content hash ties every emitted record to its input.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, fields
from fractions import Fraction

from .errors import InputError
from .polynomials import Poly, PolyMap
from .reduction import ProblemInstance

_TOP_KEYS = {"dimension", "map", "initial_point", "variety", "periodic_points", "parameters"}


@dataclass(frozen=True)
class RunParameters:
    prime_range: tuple[int, int] = (3, 50)
    precision: int = 64
    n_max: int = 100_000
    mahler_terms: int | None = None  # defaults to precision
    screen_primes: int = 8
    exact_budget: int = 1 << 20
    density_m: int = 1
    enumeration_guard: int = 1 << 24
    shift_cap: int = 16
    compat_samples: int = 24

    def __post_init__(self):
        lo, hi = self.prime_range
        if lo > hi or lo < 3:
            raise InputError("prime_range must satisfy 3 <= lo <= hi")
        for name in (
            "precision",
            "n_max",
            "screen_primes",
            "exact_budget",
            "density_m",
            "enumeration_guard",
            "shift_cap",
            "compat_samples",
        ):
            if getattr(self, name) < 1:
                raise InputError(f"parameter {name} must be positive")
        if self.mahler_terms is not None and self.mahler_terms < 1:
            raise InputError("parameter mahler_terms must be positive")

    @property
    def terms(self) -> int:
        return self.mahler_terms if self.mahler_terms is not None else self.precision


def _as_fraction(value, where: str) -> Fraction:
    if isinstance(value, bool) or isinstance(value, float):
        raise InputError(f"{where}: floats are not accepted; write exact rationals")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value)
        except (ValueError, ZeroDivisionError) as exc:
            raise InputError(f"{where}: not a rational literal: {value!r} ({exc})") from None
    raise InputError(f"{where}: expected an integer or 'n/d' string, got {type(value).__name__}")


def _as_poly(data, dimension: int, where: str) -> Poly:
    if not isinstance(data, list):
        raise InputError(f"{where}: a polynomial is a list of [exponents, coefficient] pairs")
    out: Poly = {}
    for i, term in enumerate(data):
        if not (isinstance(term, list) and len(term) == 2):
            raise InputError(f"{where}[{i}]: expected [exponents, coefficient]")
        exps, coeff = term
        if not (isinstance(exps, list) and len(exps) == dimension and all(
            isinstance(e, int) and not isinstance(e, bool) and e >= 0 for e in exps
        )):
            raise InputError(f"{where}[{i}]: exponents must be {dimension} non-negative integers")
        c = _as_fraction(coeff, f"{where}[{i}]")
        if c != 0:
            key = tuple(exps)
            out[key] = out.get(key, Fraction(0)) + c
    return {e: c for e, c in out.items() if c != 0}


def parse_problem(doc) -> tuple[ProblemInstance, RunParameters]:
    """Validate a parsed JSON document into an instance and run parameters."""
    if not isinstance(doc, dict):
        raise InputError("problem file must be a JSON object")
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise InputError(f"unknown keys in problem file: {sorted(unknown)}")
    for key in ("dimension", "map", "initial_point", "variety"):
        if key not in doc:
            raise InputError(f"problem file is missing required key {key!r}")
    dim = doc["dimension"]
    if not isinstance(dim, int) or isinstance(dim, bool) or dim < 1:
        raise InputError("dimension must be a positive integer")
    if not isinstance(doc["map"], list) or len(doc["map"]) != dim:
        raise InputError(f"map must list exactly {dim} coordinate polynomials")
    polys = tuple(_as_poly(p, dim, f"map[{i}]") for i, p in enumerate(doc["map"]))
    if not isinstance(doc["initial_point"], list) or len(doc["initial_point"]) != dim:
        raise InputError(f"initial_point must list {dim} rationals")
    point = tuple(
        _as_fraction(x, f"initial_point[{i}]") for i, x in enumerate(doc["initial_point"])
    )
    if not isinstance(doc["variety"], list) or not doc["variety"]:
        raise InputError("variety must list at least one defining polynomial")
    variety = tuple(
        _as_poly(q, dim, f"variety[{i}]") for i, q in enumerate(doc["variety"])
    )
    targets = ()
    if "periodic_points" in doc:
        if not isinstance(doc["periodic_points"], list):
            raise InputError("periodic_points must be a list of points")
        targets = tuple(
            tuple(_as_fraction(x, f"periodic_points[{i}][{j}]") for j, x in enumerate(pt))
            for i, pt in enumerate(doc["periodic_points"])
        )
        for i, t in enumerate(targets):
            if len(t) != dim:
                raise InputError(f"periodic_points[{i}] must have {dim} coordinates")

    params_doc = doc.get("parameters", {})
    if not isinstance(params_doc, dict):
        raise InputError("parameters must be an object")
    allowed = {f.name for f in fields(RunParameters)}
    unknown = set(params_doc) - allowed
    if unknown:
        raise InputError(f"unknown parameters: {sorted(unknown)}")
    kwargs = dict(params_doc)
    if "prime_range" in kwargs:
        pr = kwargs["prime_range"]
        if not (isinstance(pr, list) and len(pr) == 2 and all(isinstance(x, int) for x in pr)):
            raise InputError("prime_range must be [lo, hi]")
        kwargs["prime_range"] = (pr[0], pr[1])
    for name, value in kwargs.items():
        if name != "prime_range" and (not isinstance(value, int) or isinstance(value, bool)):
            raise InputError(f"parameter {name} must be an integer")
    params = RunParameters(**kwargs)
    inst = ProblemInstance(dim, PolyMap(dim, polys), point, variety, targets)
    return inst, params


def load_problem(path: str) -> tuple[ProblemInstance, RunParameters, str]:
    """Parse a problem file; returns (instance, parameters, content hash)."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise InputError(f"cannot read problem file: {exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(
            f"malformed problem file at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from None
    inst, params = parse_problem(doc)
    return inst, params, problem_hash(doc)


def problem_hash(doc) -> str:
    canonical = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]
