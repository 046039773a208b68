"""Command-line interface.

Subcommands:

* ``validate``: check a person-time data file against a config's schema.
* ``fit``: fit the three hazard models and print diagnostics.
* ``estimate``: run the full pipeline (risk curves, contrasts, optional
  bootstrap) and write artifacts.
* ``simulate``: draw a cohort from a canned or JSON-specified small model.
* ``oracle verify``: run the exact identity suite on a small model.
* ``oracle emit-dgp``: write a canned model specification to JSON.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .cohort import load_person_time, serialize_cohort, validate_cohort
from .dgp import (OBSERVATIONAL, InterventionSpec, canned_dgps, dgp_from_json,
                  dgp_to_json, random_dgp, simulate_cohort)
from .errors import (CohortValidationError, ConfigError, CriskError,
                     DataError, NumericalError, PositivityError)
from .oracle import verify_identities
from .pipeline import fit_models, load_config, run_pipeline

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4


def _exit_code(exc: CriskError) -> int:
    from .pipeline import StageError
    if isinstance(exc, StageError):
        return _exit_code(exc.cause) if isinstance(exc.cause, CriskError) else EXIT_NUMERICAL
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, DataError):
        return EXIT_DATA
    return EXIT_NUMERICAL  # NumericalError, PositivityError, other failures


def _default_jobs() -> int:
    env = os.environ.get("CRISK_JOBS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"CRISK_JOBS must be an integer, got {env!r}")
    return 1


def _load_dgp(token: str):
    """A canned model name (with or without the _dgp suffix) or a JSON path."""
    canned = canned_dgps()
    for key in (token, f"{token}_dgp"):
        if key in canned:
            return canned[key]
    if token.startswith("random:"):
        return random_dgp(int(token.split(":", 1)[1]))
    path = Path(token)
    if path.exists():
        return dgp_from_json(path.read_text(encoding="utf-8"))
    raise ConfigError(
        f"unknown model {token!r}: expected one of {sorted(canned)}, "
        f"'random:<seed>', or a JSON file path")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crisk",
        description="Causal risks for failure-time events with competing "
                    "events and loss to follow-up.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_val = sub.add_parser("validate", help="validate a person-time data file")
    p_val.add_argument("--config", required=True)

    p_fit = sub.add_parser("fit", help="fit the three hazard models")
    p_fit.add_argument("--config", required=True)

    p_est = sub.add_parser("estimate", help="run the full estimation pipeline")
    p_est.add_argument("--config", required=True)
    p_est.add_argument("--seed", type=int, default=None)
    p_est.add_argument("--bootstrap", type=int, default=None,
                       help="number of bootstrap replicates (overrides config)")
    p_est.add_argument("--out", default=None, help="output directory override")
    p_est.add_argument("--jobs", type=int, default=None,
                       help="worker processes (default: CRISK_JOBS or 1)")

    p_sim = sub.add_parser("simulate", help="simulate a cohort from a small model")
    p_sim.add_argument("--dgp", required=True)
    p_sim.add_argument("--n", type=int, required=True)
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--out", required=True)
    p_sim.add_argument("--arm", type=int, choices=(0, 1), default=None,
                       help="set treatment instead of drawing it")
    p_sim.add_argument("--no-censoring", action="store_true",
                       help="eliminate loss to follow-up in the simulation")

    p_oracle = sub.add_parser("oracle", help="exact checks on small models")
    oracle_sub = p_oracle.add_subparsers(dest="oracle_command", required=True)
    p_verify = oracle_sub.add_parser("verify", help="run the identity suite")
    p_verify.add_argument("--dgp", required=True)
    p_verify.add_argument("--tol", type=float, default=1e-10)
    p_emit = oracle_sub.add_parser("emit-dgp", help="write a model to JSON")
    p_emit.add_argument("--dgp", required=True)
    p_emit.add_argument("--out", required=True)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _dispatch(args)
    except CohortValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except CriskError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _exit_code(exc)


def _dispatch(args) -> int:
    if args.command == "validate":
        config = load_config(args.config)
        data = load_person_time(config.data_path, config.schema, k_max=config.k_max)
        report = validate_cohort(data)
        counts = report.event_counts
        print(f"valid: {data.n_subjects} subjects, {data.n_records()} records, "
              f"K+1 = {data.k_max + 1}")
        for arm in sorted(counts):
            c = counts[arm]
            print(f"  arm {arm}: {c['event']} events, {c['competing']} competing, "
                  f"{c['censored']} censored")
        return EXIT_OK

    if args.command == "fit":
        config = load_config(args.config)
        data = load_person_time(config.data_path, config.schema, k_max=config.k_max)
        models = fit_models(data, config)
        for kind, model in models.items():
            print(f"{kind}: converged={model.converged} iterations={model.iterations} "
                  f"log_likelihood={model.log_likelihood:.4f} n_records={model.n_records}")
        return EXIT_OK

    if args.command == "estimate":
        overrides = {}
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.bootstrap is not None:
            overrides["bootstrap"] = args.bootstrap
        if args.out is not None:
            overrides["out"] = args.out
        config = load_config(args.config, overrides=overrides)
        n_jobs = args.jobs if args.jobs is not None else _default_jobs()
        summary = run_pipeline(config, n_jobs=n_jobs)
        print(f"wrote {len(summary['artifacts'])} artifacts to {summary['output_dir']}")
        for entry in summary["effects"]:
            ci = ""
            if "lower" in entry:
                ci = f" [{entry['lower']:.4f}, {entry['upper']:.4f}]"
            value = "NA" if entry["value"] is None else f"{entry['value']:.4f}"
            print(f"  {entry['target']}/{entry['method']} {entry['scale']}: {value}{ci}")
        return EXIT_OK

    if args.command == "simulate":
        dgp = _load_dgp(args.dgp)
        intervention = OBSERVATIONAL
        if args.arm is not None or args.no_censoring:
            intervention = InterventionSpec(
                set_a=args.arm, eliminate_censoring=args.no_censoring)
        cohort = simulate_cohort(dgp, args.n, args.seed, intervention)
        Path(args.out).write_text(serialize_cohort(cohort), encoding="utf-8")
        print(f"wrote {cohort.n_records()} records for {cohort.n_subjects} "
              f"subjects to {args.out}")
        return EXIT_OK

    # oracle subcommands
    if args.oracle_command == "verify":
        report = verify_identities(_load_dgp(args.dgp), tol=args.tol)
        print(report.summary())
        return EXIT_OK if report.all_pass else EXIT_NUMERICAL

    dgp = _load_dgp(args.dgp)
    Path(args.out).write_text(dgp_to_json(dgp) + "\n", encoding="utf-8")
    print(f"wrote model {dgp.name or args.dgp!r} to {args.out}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
