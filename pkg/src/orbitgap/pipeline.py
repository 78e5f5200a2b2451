"""Pipeline orchestration and structured reporting.

Every stage appends machine-readable records (plain dicts, serialized as
sorted-key JSON lines) and the CLI renders a human summary from the same
records, so no value is computed at the CLI layer.  Partial failures return
a report truncated at the failed stage with the stage named; the exception
class determines the process exit code.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import (
    BudgetExceeded,
    HypothesisViolation,
    InputError,
    OrbitgapError,
    PrecisionExhausted,
)
from .gaps import (
    build_density_report,
    build_gap_report,
    compute_returns,
    default_screening_primes,
    localize_zeros,
)
from .interpolation import (
    build_interpolant,
    constancy_test,
    default_compat_samples,
    verify_compatibility,
    verify_error_bound,
)
from .normalization import build_model_family, ensure_not_preperiodic
from .problemfile import RunParameters
from .reduction import (
    ProblemInstance,
    avoidance_search,
    bad_primes,
    periodic_points_on_variety,
    reduce_instance,
    reduce_poly,
    residue_orbit_avoids,
)


def _fmt(x) -> str:
    return "%.6g" % x


def _primes_in(lo: int, hi: int) -> list[int]:
    out = []
    for n in range(max(lo, 3), hi + 1):
        if all(n % d for d in range(2, int(n**0.5) + 1)):
            out.append(n)
    return out


@dataclass
class RunReport:
    problem_sha: str
    records: list[dict] = field(default_factory=list)
    assumptions: list[str] = field(default_factory=list)
    failure: tuple[str, str] | None = None

    def add(self, record: dict) -> None:
        record["problem_sha"] = self.problem_sha
        self.records.append(record)

    def fail(self, stage: str, exc: Exception) -> None:
        self.failure = (stage, str(exc))
        self.add({"record": "failure", "stage": stage, "message": str(exc)})

    @property
    def exit_code(self) -> int:
        if self.failure is None:
            return 0
        return exit_code_for(self._failure_exc)

    _failure_exc: Exception | None = None


def exit_code_for(exc: Exception | None) -> int:
    if exc is None:
        return 0
    if isinstance(exc, InputError):
        return 2
    if isinstance(exc, (PrecisionExhausted, BudgetExceeded)):
        return 3
    if isinstance(exc, OrbitgapError):
        return 1
    return 1


def stage_bad_primes(report: RunReport, inst: ProblemInstance, params: RunParameters):
    bad = bad_primes(inst, search_bound=params.prime_range[1])
    report.add(
        {
            "record": "bad_primes",
            "primes": sorted(bad.primes),
            "reasons": [[p, why] for p, why in bad.reasons],
        }
    )
    return bad


def stage_avoidance(report: RunReport, inst: ProblemInstance, params: RunParameters, bad):
    lo, hi = params.prime_range
    scan = avoidance_search(inst, _primes_in(lo, hi), bad, params.enumeration_guard)
    report.add(
        {
            "record": "certificates",
            "scanned": scan.scanned,
            "certified_density": _fmt(scan.certified_density),
            "rows": [
                {
                    "prime": c.prime,
                    "verdict": c.verdict,
                    "bound": c.bound,
                    "depths": list(c.depths),
                }
                for c in scan.certificates
            ],
        }
    )
    return scan


def choose_prime(scan) -> tuple[int, int]:
    """Smallest certified prime in the scan and its avoidance bound."""
    for cert in scan.certificates:
        if cert.certified:
            return cert.prime, cert.bound
    verdicts = sorted({c.verdict for c in scan.certificates})
    raise HypothesisViolation(
        f"no prime in the scanned range was certified (verdicts seen: {verdicts})"
    )


def stage_diagnostics(report: RunReport, inst, params, bad, prime: int, bound: int):
    """Residue-level periodic points on the variety and the decisive orbit screen."""
    fp, _, _ = reduce_instance(inst, prime, bad)
    discovered: list | None = None
    if prime**inst.dimension <= min(params.enumeration_guard, 100_000):
        variety_p = [reduce_poly(q, prime) for q in inst.variety]
        discovered = periodic_points_on_variety(fp, variety_p, params.enumeration_guard)
    avoided = residue_orbit_avoids(inst, prime, bound, bad)
    if not avoided:
        raise HypothesisViolation(
            f"residue orbit meets a declared target at iterate >= {bound} despite a certificate"
        )
    if not inst.targets:
        report.assumptions.append(
            "no periodic points declared on the variety; the user asserts there are none"
        )
        if discovered:
            report.assumptions.append(
                f"warning: {len(discovered)} residue-periodic points lie on the variety "
                f"mod {prime}; if any lifts to a periodic point it must be declared"
            )
    report.add(
        {
            "record": "diagnostics",
            "prime": prime,
            "bound": bound,
            "residue_periodic_on_variety": [list(pt) for pt in (discovered or [])]
            if discovered is not None
            else None,
            "orbit_avoids_targets": avoided,
        }
    )


def stage_normalization(report: RunReport, inst, params, prime: int):
    depth = ensure_not_preperiodic(inst)
    report.assumptions.append(
        f"non-preperiodicity verified heuristically to orbit depth {depth}"
    )
    family = build_model_family(inst, prime, params.precision, params.shift_cap)
    if len(family) == 1 and family[0].k_total > 1:
        report.assumptions.append(
            f"stride {family[0].k_total} exceeds the shift cap; only the residue class "
            "of the stabilized orbit index is analyzed"
        )
    for model in family:
        report.add(
            {
                "record": "model",
                "shift": model.shift,
                "m0": model.m0,
                "k1": model.k1,
                "k2": model.steps_per_iterate,
                "k_total": model.k_total,
                "center": list(model.center),
                "base_point": list(model.base_point.lift()),
                "congruence_exponent": model.congruence_exponent,
                "series_precision": model.series_precision,
                "linear": [list(row) for row in model.linear],
                "transform_log": [[r.kind, list(r.data)] for r in model.transform_log],
            }
        )
    return family


def stage_interpolation(report: RunReport, params, family):
    interps = {}
    for model in family:
        interp = build_interpolant(model, min(params.terms, params.precision))
        bound_rep = verify_error_bound(interp)
        samples = default_compat_samples(model.ctx, params.compat_samples)
        compat_rep = verify_compatibility(interp, samples)
        const_rep = constancy_test(interp)
        record = interp.to_record()
        record.update(
            {
                "record": "interpolant",
                "shift": model.shift,
                "bound_samples": list(bound_rep.samples),
                "bound_margins": [_fmt_val(v) for v in bound_rep.margins],
                "compat_threshold": compat_rep.threshold,
                "compat_min_margin": _fmt_val(min(compat_rep.margins)),
                "constant": const_rep.constant,
            }
        )
        report.add(record)
        interps[model.shift] = interp
    return interps


def _fmt_val(v):
    return "inf" if v == float("inf") else int(v)


def stage_returns(report: RunReport, inst, params, bad):
    screening = default_screening_primes(inst, params.screen_primes)
    returns = compute_returns(inst, params.n_max, screening, params.exact_budget, bad)
    report.add(
        {
            "record": "returns",
            "n_max": returns.n_max,
            "entries": [[e.index, e.status] for e in returns.entries],
            "screening_primes": list(returns.screening_primes),
            "refuted": list(returns.refuted),
            "exact_horizon": returns.exact_horizon,
        }
    )
    if any(e.status == "modular-screened" for e in returns.entries):
        report.assumptions.append(
            "some returns are modular-screened only (exact budget exceeded); "
            "they are labeled as such everywhere downstream"
        )
    return returns


def stage_gaps(report: RunReport, inst, params, family, interps, returns):
    analyses_by_shift = {}
    models_by_shift = {}
    for model in family:
        qs = [model.transport_poly(q) for q in inst.variety]
        analyses_by_shift[model.shift] = localize_zeros(interps[model.shift], qs)
        models_by_shift[model.shift] = model
    c = min(m.congruence_exponent for m in family)
    gap = build_gap_report(
        returns, analyses_by_shift, models_by_shift, family[0].prime, c, params.precision
    )
    report.add(
        {
            "record": "gap_report",
            "prime": gap.prime,
            "congruence_exponent": gap.congruence_exponent,
            "verdict": gap.verdict,
            "prefix_members": list(gap.prefix_members),
            "uncovered_members": list(gap.uncovered_members),
            "precision_cutoff": gap.precision_cutoff,
            "classes": [
                {
                    "shift": cl.shift,
                    "class": cl.class_index,
                    "modulus_exp": cl.modulus_exp,
                    "members_model": list(cl.members_model),
                    "members_original": list(cl.members_original),
                    "verdict": cl.verdict,
                    "gap_constant": list(cl.gap_constant) if cl.gap_constant else None,
                    "member_bound": cl.member_bound,
                    "pairs": [
                        [p.index_low, p.index_high, p.required_exponent, p.ok, p.provenance]
                        for p in cl.pairs
                    ],
                }
                for cl in gap.classes
            ],
        }
    )
    return gap


def stage_density(report: RunReport, params, returns):
    density = build_density_report(returns.indices(), params.n_max, params.density_m)
    report.add(
        {
            "record": "density",
            "m": density.m,
            "max_ratio": _fmt(density.max_ratio) if density.max_ratio is not None else None,
            "diverging": density.diverging,
            "rows": [
                [r.checkpoint, r.count, _fmt(r.yardstick) if r.yardstick else None,
                 _fmt(r.ratio) if r.ratio is not None else None]
                for r in density.rows
            ],
        }
    )
    return density


def run_primes(inst: ProblemInstance, params: RunParameters, sha: str) -> RunReport:
    report = RunReport(sha)
    try:
        bad = stage_bad_primes(report, inst, params)
        stage_avoidance(report, inst, params, bad)
    except OrbitgapError as exc:
        report._failure_exc = exc
        report.fail("avoidance", exc)
    return report


def run_returns(inst: ProblemInstance, params: RunParameters, sha: str) -> RunReport:
    report = RunReport(sha)
    try:
        bad = stage_bad_primes(report, inst, params)
        stage_returns(report, inst, params, bad)
    except OrbitgapError as exc:
        report._failure_exc = exc
        report.fail("returns", exc)
    return report


def run_analyze(inst: ProblemInstance, params: RunParameters, sha: str) -> RunReport:
    report = RunReport(sha)
    stage = "bad-primes"
    try:
        bad = stage_bad_primes(report, inst, params)
        stage = "avoidance"
        scan = stage_avoidance(report, inst, params, bad)
        prime, bound = choose_prime(scan)
        stage = "diagnostics"
        stage_diagnostics(report, inst, params, bad, prime, bound)
        stage = "normalization"
        family = stage_normalization(report, inst, params, prime)
        stage = "interpolation"
        interps = stage_interpolation(report, params, family)
        stage = "returns"
        returns = stage_returns(report, inst, params, bad)
        stage = "gaps"
        gap = stage_gaps(report, inst, params, family, interps, returns)
        stage = "density"
        density = stage_density(report, params, returns)
        report.add(
            {
                "record": "summary",
                "prime": prime,
                "avoidance_bound": bound,
                "returns": [e.index for e in returns.entries],
                "gap_verdict": gap.verdict,
                "density_max_ratio": _fmt(density.max_ratio)
                if density.max_ratio is not None
                else None,
                "density_diverging": density.diverging,
                "assumptions": list(report.assumptions),
            }
        )
    except OrbitgapError as exc:
        report._failure_exc = exc
        report.fail(stage, exc)
    return report


def render_summary(report: RunReport) -> str:
    """Human-readable digest of the record stream."""
    lines = []
    for rec in report.records:
        kind = rec["record"]
        if kind == "bad_primes":
            lines.append(f"bad primes: {rec['primes'] or 'none'}")
        elif kind == "certificates":
            lines.append(
                f"avoidance scan: {rec['scanned']} primes, "
                f"certified density {rec['certified_density']}"
            )
            for row in rec["rows"]:
                extra = f" M={row['bound']}" if row["bound"] is not None else ""
                lines.append(f"  p={row['prime']}: {row['verdict']}{extra}")
        elif kind == "diagnostics":
            lines.append(
                f"chosen prime {rec['prime']} (avoidance bound {rec['bound']}); "
                f"orbit avoids targets: {rec['orbit_avoids_targets']}"
            )
        elif kind == "model":
            lines.append(
                f"model shift {rec['shift']}: m0={rec['m0']} k1={rec['k1']} "
                f"k2={rec['k2']} c={rec['congruence_exponent']} center={rec['center']}"
            )
        elif kind == "interpolant":
            lines.append(
                f"interpolant shift {rec['shift']}: {rec['terms']} terms, "
                f"c={rec['congruence_exponent']}, compat margin >= {rec['compat_min_margin']}"
                f"{' (constant)' if rec['constant'] else ''}"
            )
        elif kind == "returns":
            entries = rec["entries"]
            lines.append(
                f"return set (n <= {rec['n_max']}): "
                f"{[e[0] for e in entries] or 'empty'}"
            )
            for n, status in entries:
                lines.append(f"  n={n}: {status}")
            if rec["refuted"]:
                lines.append(f"  refuted screened candidates: {rec['refuted']}")
        elif kind == "gap_report":
            lines.append(f"gap verdict: {rec['verdict']}")
            for cl in rec["classes"]:
                if cl["verdict"] in ("no-members",):
                    continue
                lines.append(
                    f"  shift {cl['shift']} class {cl['class']} mod p^{cl['modulus_exp']}: "
                    f"{cl['verdict']} members={cl['members_original']}"
                )
        elif kind == "density":
            lines.append(
                f"density: max ratio {rec['max_ratio']} vs log^({rec['m']}), "
                f"diverging: {rec['diverging']}"
            )
        elif kind == "summary":
            lines.append(
                f"SUMMARY: prime {rec['prime']}, returns {rec['returns']}, "
                f"gap {rec['gap_verdict']}, density diverging {rec['density_diverging']}"
            )
            for a in rec["assumptions"]:
                lines.append(f"  assumption: {a}")
        elif kind == "failure":
            lines.append(f"FAILED at stage {rec['stage']}: {rec['message']}")
    return "\n".join(lines)
