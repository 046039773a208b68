"""Config-driven estimation pipeline: validate -> fit -> estimate -> report.

A run is described by one JSON config (diffable, archivable); command-line
flags only override the seed, bootstrap replicates, output directory, and
worker count. Artifacts are deterministic for a fixed config + data + seed;
the manifest records the config hash and library versions, with the
timestamp isolated to a single field.
"""

from __future__ import annotations

import csv
import hashlib
import json
import platform
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import pandas as pd
import scipy

from . import __version__
from .cohort import (Cohort, CovariateSchema, expand_risk_sets,
                     load_person_time, validate_cohort)
from .errors import ConfigError, CriskError, DataError
from .estimators import (METHODS, TARGETS, EstimandSpec, RiskCurve,
                         effect_contrast, estimate_risk_gformula,
                         estimate_risk_ipw, nonparametric_cumulative,
                         risk_curve_rows)
from .hazards import (DesignSpec, FittedHazardModel, fit_pooled_logistic,
                      positivity_report)
from .inference import BootstrapPlan, bootstrap_percentile_ci

CONTRAST_SCALES = ("difference", "ratio")


@dataclass(frozen=True)
class RunConfig:
    data_path: str
    schema: CovariateSchema
    k_max: int
    horizon: int  # K+1
    event_design: DesignSpec
    competing_design: DesignSpec
    censoring_design: DesignSpec
    estimands: tuple[tuple[str, str], ...]  # (target, method)
    contrast_scales: tuple[str, ...]
    output_dir: str
    seed: int = 0
    bootstrap: BootstrapPlan | None = None
    truncate_percentile: float | None = None
    raw: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.horizon != self.k_max + 1:
            raise ConfigError(
                f"horizon must equal k_max + 1 (got horizon={self.horizon}, k_max={self.k_max})")
        for scale in self.contrast_scales:
            if scale not in CONTRAST_SCALES:
                raise ConfigError(f"unknown contrast scale {scale!r}")
        for target, method in self.estimands:
            # constructing the spec enforces admissibility
            EstimandSpec(target, method, 0, self.horizon)
        for design in (self.event_design, self.competing_design, self.censoring_design):
            for term in design.covariate_terms:
                if term.name not in self.schema.names:
                    raise ConfigError(
                        f"design covariate {term.name!r} not in declared schema")


def load_config(path: str | Path, overrides: dict | None = None) -> RunConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return parse_config(raw, base_dir=path.parent, overrides=overrides)


def parse_config(raw: dict, base_dir: Path | None = None,
                 overrides: dict | None = None) -> RunConfig:
    overrides = overrides or {}
    known = {"data", "k_max", "horizon", "covariates", "models", "estimands",
             "contrast_scales", "output_dir", "seed", "bootstrap",
             "truncate_percentile"}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    try:
        data_path = str(raw["data"])
        k_max = int(raw["k_max"])
        models = raw["models"]
        output_dir = str(overrides.get("out") or raw.get("output_dir", "out"))
    except KeyError as exc:
        raise ConfigError(f"config missing required key {exc.args[0]!r}") from exc

    if base_dir is not None:
        if not Path(data_path).is_absolute():
            data_path = str(base_dir / data_path)
        if not Path(output_dir).is_absolute():
            output_dir = str(base_dir / output_dir)

    cov = raw.get("covariates", {})
    names = tuple(cov.get("names", ()))
    levels = {
        name: tuple(float(v) for v in vals) if vals is not None else None
        for name, vals in cov.get("levels", {}).items()
    }
    schema = CovariateSchema(names, levels)

    designs = {}
    for kind in ("event", "competing", "censoring"):
        if kind not in models:
            raise ConfigError(f"config missing model specification for {kind!r}")
        designs[kind] = DesignSpec.from_config(models[kind], kind)

    estimands = []
    for entry in raw.get("estimands", []):
        if "target" not in entry or "method" not in entry:
            raise ConfigError("each estimand entry needs 'target' and 'method'")
        estimands.append((entry["target"], entry["method"]))
    if not estimands:
        raise ConfigError("config declares no estimands")

    seed = int(overrides.get("seed", raw.get("seed", 0)))
    plan = None
    boot_raw = raw.get("bootstrap")
    replicates_override = overrides.get("bootstrap")
    if replicates_override is not None:
        boot_raw = dict(boot_raw or {})
        boot_raw["replicates"] = int(replicates_override)
    if boot_raw:
        plan = BootstrapPlan(
            replicates=int(boot_raw.get("replicates", 500)),
            seed=int(boot_raw.get("seed", seed)),
            percentiles=tuple(boot_raw.get("percentiles", (2.5, 97.5))),
        )

    trunc = raw.get("truncate_percentile")
    return RunConfig(
        data_path=data_path,
        schema=schema,
        k_max=k_max,
        horizon=int(raw.get("horizon", k_max + 1)),
        event_design=designs["event"],
        competing_design=designs["competing"],
        censoring_design=designs["censoring"],
        estimands=tuple(estimands),
        contrast_scales=tuple(raw.get("contrast_scales", ("difference", "ratio"))),
        output_dir=output_dir,
        seed=seed,
        bootstrap=plan,
        truncate_percentile=float(trunc) if trunc is not None else None,
        raw=raw,
    )


def config_hash(raw: dict) -> str:
    canonical = json.dumps(raw, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# fitting and estimation recipes (shared by the point run and the bootstrap)

def fit_models(data: Cohort, config: RunConfig) -> dict[str, FittedHazardModel]:
    """Fit the three hazard models with their standard risk-set filters."""
    models: dict[str, FittedHazardModel] = {}
    models["event"] = fit_pooled_logistic(data, config.event_design, "y_next")
    models["competing"] = fit_pooled_logistic(data, config.competing_design, "d_next")
    cens = config.censoring_design
    if cens.structural_zero_before > data.k_max:
        # no interval admits loss to follow-up: nothing to fit
        models["censoring"] = FittedHazardModel.all_zero(cens, data.k_max, data.covariate_schema)
    else:
        models["censoring"] = fit_pooled_logistic(data, cens, "c_next")
    return models


@dataclass(frozen=True)
class PipelineStatistic:
    """Maps a cohort to the vector of horizon contrasts; picklable so the
    bootstrap can run it in worker processes."""

    config: RunConfig

    def labels(self) -> list[str]:
        return [f"{target}/{method}/{scale}"
                for target, method in self.config.estimands
                for scale in self.config.contrast_scales]

    def __call__(self, data: Cohort) -> np.ndarray:
        config = self.config
        models = fit_models(data, config)
        expanded_cache: dict[str, Cohort] = {}
        values = []
        for target, method in config.estimands:
            curves = {}
            for arm in (0, 1):
                curves[arm] = _estimate_one(data, models, config, target, method,
                                            arm, expanded_cache)
            for scale in config.contrast_scales:
                effect = effect_contrast(curves[1], curves[0], scale)
                values.append(np.nan if effect.value is None else effect.value)
        return np.asarray(values, dtype=float)


def _estimate_one(data: Cohort, models: dict, config: RunConfig, target: str,
                  method: str, arm: int, expanded_cache: dict) -> RiskCurve:
    spec = EstimandSpec(target, method, arm, config.horizon)
    if method == "gformula":
        return estimate_risk_gformula(data, spec, models["event"], models["competing"])
    if method == "ipw_cause_specific":
        return estimate_risk_ipw(data, spec, models["censoring"], models["competing"],
                                 config.truncate_percentile)
    # subdistribution: expand with the role matching the requested target
    role = "competing_event" if target == "competing_risk" else "event_of_interest"
    if role not in expanded_cache:
        expanded_cache[role] = expand_risk_sets(data, role)
    if target == "composite_risk":
        # composite needs both expansions; delegate per component
        event = _estimate_one(data, models, config, "total_risk", method, arm, expanded_cache)
        comp = _estimate_one(data, models, config, "competing_risk", method, arm, expanded_cache)
        values = tuple(a + b for a, b in zip(event.values, comp.values))
        return RiskCurve(arm, values, spec, event.warnings + comp.warnings)
    return estimate_risk_ipw(expanded_cache[role], spec, models["censoring"],
                             None, config.truncate_percentile)


# ---------------------------------------------------------------------------
# the run itself

class StageError(CriskError):
    """Wraps an error with the pipeline stage where it occurred."""

    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        self.cause = cause
        super().__init__(f"[stage: {stage}] {cause}")


def run_pipeline(config: RunConfig, n_jobs: int = 1) -> dict:
    """Execute the full run and write artifacts to config.output_dir.

    Returns a summary dict (paths, effects). On a stage error, any artifact
    files already written by this run are removed before re-raising.
    """
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    try:
        return _run_stages(config, out, written, n_jobs)
    except CriskError:
        for path in written:
            path.unlink(missing_ok=True)
        raise


def _stage(name: str):
    def wrap(fn):
        def inner(*args, **kwargs):
            try:
                return fn(*args, **kwargs)
            except StageError:
                raise
            except CriskError as exc:
                raise StageError(name, exc) from exc
        return inner
    return wrap


def _run_stages(config: RunConfig, out: Path, written: list[Path], n_jobs: int) -> dict:
    data = _stage("validate")(load_person_time)(
        config.data_path, config.schema, k_max=config.k_max)

    models = _stage("fit")(fit_models)(data, config)
    _write_json(out, written, "fit_diagnostics.json", {
        kind: _model_summary(model) for kind, model in models.items()
    })

    discrete = [n for n in config.schema.names
                if config.schema.levels.get(n) is not None]
    pos = positivity_report(data, discrete)
    _write_df(out, written, "positivity.csv", pos)

    # risk curves per target, all requested methods, both arms
    expanded_cache: dict[str, Cohort] = {}
    curves_by_target: dict[str, list[RiskCurve]] = {}
    curve_lookup: dict[tuple[str, str, int], RiskCurve] = {}
    estimate = _stage("estimate")(_estimate_one)
    for target, method in config.estimands:
        for arm in (0, 1):
            curve = estimate(data, models, config, target, method, arm, expanded_cache)
            curves_by_target.setdefault(target, []).append(curve)
            curve_lookup[(target, method, arm)] = curve
    for target, curves in curves_by_target.items():
        name = {"total_risk": "risk_total.csv", "competing_risk": "risk_competing.csv",
                "composite_risk": "risk_composite.csv", "direct_risk": "risk_direct.csv"}[target]
        rows = [row for c in curves for row in risk_curve_rows(c)]
        _write_df(out, written, name, pd.DataFrame(rows))

    np_rows = []
    for arm in (0, 1):
        for event in ("y_next", "d_next"):
            np_rows += risk_curve_rows(nonparametric_cumulative(data, arm, event))
    for row in np_rows:
        row["method"] = "nonparametric"
    _write_df(out, written, "risk_nonparametric.csv", pd.DataFrame(np_rows))

    # contrasts, optionally with bootstrap intervals
    statistic = PipelineStatistic(config)
    labels = statistic.labels()
    points = []
    for target, method in config.estimands:
        for scale in config.contrast_scales:
            effect = effect_contrast(curve_lookup[(target, method, 1)],
                                     curve_lookup[(target, method, 0)], scale)
            points.append(effect)
    interval = None
    if config.bootstrap is not None:
        interval = _stage("bootstrap")(bootstrap_percentile_ci)(
            data, statistic, config.bootstrap, n_jobs=n_jobs)

    effects = []
    for i, (label, effect) in enumerate(zip(labels, points)):
        target, method, scale = label.split("/")
        entry = {
            "target": target, "method": method, "scale": scale,
            "horizon": effect.horizon, "value": effect.value,
            "per_interval": list(effect.per_interval),
        }
        if interval is not None:
            entry["lower"] = float(interval.lower[i])
            entry["upper"] = float(interval.upper[i])
            entry["n_failed_replicates"] = interval.n_failed_replicates
        effects.append(entry)
    _write_json(out, written, "effects.json", effects)

    manifest = {
        "config_hash": config_hash(config.raw),
        "seed": config.seed,
        "bootstrap": None if config.bootstrap is None else {
            "replicates": config.bootstrap.replicates,
            "seed": config.bootstrap.seed,
            "percentiles": list(config.bootstrap.percentiles),
        },
        "n_subjects": data.n_subjects,
        "n_records": data.n_records(),
        "versions": {
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "pandas": pd.__version__,
            "crisk": __version__,
        },
        "artifacts": sorted(p.name for p in written),
        # the only non-deterministic field, isolated here by contract
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }
    _write_json(out, written, "manifest.json", manifest)
    return {"output_dir": str(out), "effects": effects,
            "artifacts": sorted(p.name for p in written)}


def _model_summary(model: FittedHazardModel) -> dict:
    return {
        "converged": model.converged,
        "iterations": model.iterations,
        "log_likelihood": model.log_likelihood,
        "max_score": None if np.isnan(model.max_score) else model.max_score,
        "n_records": model.n_records,
        "structural_zero_before": model.spec.structural_zero_before,
        "coefficients": dict(zip(model.column_names(),
                                 [float(b) for b in model.coefficients])),
    }


def _write_json(out: Path, written: list[Path], name: str, obj) -> None:
    path = out / name
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    written.append(path)


def _write_df(out: Path, written: list[Path], name: str, frame: pd.DataFrame) -> None:
    path = out / name
    frame.to_csv(path, index=False, quoting=csv.QUOTE_MINIMAL)
    written.append(path)
