"""Command-line front end.

Subcommands run the pipeline end to end (analyze) or stage by stage
(primes, returns, interpolate, gaps); stage commands can replay serialized
records from a previous run so a single stage is recomputed
deterministically.  Exit codes: 0 success, 1 hypothesis-violation abort,
2 input error, 3 precision or budget exhaustion.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

from .errors import InputError, OrbitgapError
from .gaps import ReturnEntry, ReturnSet
from .pipeline import (
    RunReport,
    exit_code_for,
    render_summary,
    run_analyze,
    run_primes,
    run_returns,
    stage_density,
    stage_gaps,
    stage_interpolation,
    stage_normalization,
)
from .problemfile import load_problem


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("problem", help="problem file (JSON)")
    sub.add_argument("--prime-range", nargs=2, type=int, metavar=("LO", "HI"))
    sub.add_argument("--precision", type=int)
    sub.add_argument("--n-max", type=int)
    sub.add_argument("--mahler-terms", type=int)
    sub.add_argument("--screen-primes", type=int)
    sub.add_argument("--exact-budget", type=int)
    sub.add_argument("--density-m", type=int)
    sub.add_argument("--out", help="write machine records (JSON lines) here")
    sub.add_argument("--replay", help="records of a previous run to resume from")


def _apply_overrides(params, args):
    updates = {}
    if args.prime_range:
        updates["prime_range"] = tuple(args.prime_range)
    for flag, name in [
        ("precision", "precision"),
        ("n_max", "n_max"),
        ("mahler_terms", "mahler_terms"),
        ("screen_primes", "screen_primes"),
        ("exact_budget", "exact_budget"),
        ("density_m", "density_m"),
    ]:
        value = getattr(args, flag)
        if value is not None:
            updates[name] = value
    return dataclasses.replace(params, **updates) if updates else params


def _emit(report: RunReport, out_path: str | None) -> None:
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            for rec in report.records:
                fh.write(json.dumps(rec, sort_keys=True, separators=(",", ":")) + "\n")
    print(render_summary(report))


def _load_replay(path: str, sha: str) -> dict:
    records: dict[str, list] = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                rec = json.loads(line)
                records.setdefault(rec.get("record", "?"), []).append(rec)
    except OSError as exc:
        raise InputError(f"cannot read replay records: {exc}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"malformed replay records: {exc}") from None
    for rows in records.values():
        for rec in rows:
            if rec.get("problem_sha") and rec["problem_sha"] != sha:
                raise InputError(
                    "stale replay: records were produced from a different problem file"
                )
    return records


def _replayed_prime(records: dict) -> int:
    rows = records.get("certificates")
    if not rows:
        raise InputError("missing upstream artifact: run the primes stage first")
    for row in rows[-1]["rows"]:
        if row["verdict"] == "certified":
            return row["prime"]
    raise InputError("replay records contain no certified prime")


def _replayed_returns(records: dict) -> ReturnSet:
    rows = records.get("returns")
    if not rows:
        raise InputError("missing upstream artifact: run the returns stage first")
    rec = rows[-1]
    return ReturnSet(
        rec["n_max"],
        tuple(ReturnEntry(n, status) for n, status in rec["entries"]),
        tuple(rec["screening_primes"]),
        tuple(rec["refuted"]),
        rec["exact_horizon"],
    )


def _check_replayed_interpolants(report: RunReport, records: dict) -> None:
    """Rebuilt interpolants must match any previously recorded ones bit for bit."""
    old = {rec["shift"]: rec for rec in records.get("interpolant", [])}
    for rec in report.records:
        if rec["record"] == "interpolant" and rec["shift"] in old:
            prev = old[rec["shift"]]
            if prev["coefficients"] != rec["coefficients"]:
                raise InputError(
                    "stale replay: recorded interpolant disagrees with the rebuilt one"
                )


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="orbitgap",
        description="certify avoidance, interpolation, and gap reports for "
        "polynomial orbit return sets",
    )
    subs = parser.add_subparsers(dest="command", required=True)
    for name, doc in [
        ("primes", "bad primes and per-prime avoidance certificates"),
        ("analyze", "full pipeline: primes, normalization, interpolation, returns, gaps, density"),
        ("returns", "multi-modular screening and exact certification of the return set"),
        ("interpolate", "normalization and certified interpolation at the replayed prime"),
        ("gaps", "zero localization and gap/density reports from replayed records"),
    ]:
        _add_common(subs.add_parser(name, help=doc))
    args = parser.parse_args(argv)

    try:
        inst, params, sha = load_problem(args.problem)
        params = _apply_overrides(params, args)
    except OrbitgapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exit_code_for(exc)

    try:
        if args.command == "primes":
            report = run_primes(inst, params, sha)
        elif args.command == "analyze":
            report = run_analyze(inst, params, sha)
        elif args.command == "returns":
            report = run_returns(inst, params, sha)
        elif args.command == "interpolate":
            if not args.replay:
                raise InputError("interpolate needs --replay records from the primes stage")
            records = _load_replay(args.replay, sha)
            prime = _replayed_prime(records)
            report = RunReport(sha)
            family = stage_normalization(report, inst, params, prime)
            stage_interpolation(report, params, family)
            _check_replayed_interpolants(report, records)
        elif args.command == "gaps":
            if not args.replay:
                raise InputError("gaps needs --replay records from earlier stages")
            records = _load_replay(args.replay, sha)
            prime = _replayed_prime(records)
            returns = _replayed_returns(records)
            report = RunReport(sha)
            family = stage_normalization(report, inst, params, prime)
            interps = stage_interpolation(report, params, family)
            _check_replayed_interpolants(report, records)
            stage_gaps(report, inst, params, family, interps, returns)
            stage_density(report, params, returns)
        else:  # pragma: no cover
            raise InputError(f"unknown command {args.command}")
    except OrbitgapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exit_code_for(exc)

    _emit(report, args.out)
    return report.exit_code


if __name__ == "__main__":
    sys.exit(main())
