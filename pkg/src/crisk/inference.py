"""Nonparametric bootstrap percentile confidence intervals.

Resampling is at the subject level: a replicate draws n subjects with
replacement and re-runs the full statistic (typically model fitting plus
estimation) on the resampled cohort. Replicate r is driven by the stream
``SeedSequence(entropy=seed, spawn_key=(r,))``, so results are reproducible
and independent of execution order or worker count.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .cohort import Cohort, ExpandedCohort, PersonTimeRecord
from .errors import BootstrapError, ConfigError, CriskError

MAX_FAILURE_FRACTION = 0.2


@dataclass(frozen=True)
class BootstrapPlan:
    replicates: int = 500
    seed: int = 0
    percentiles: tuple[float, float] = (2.5, 97.5)
    resample_unit: str = "subject"

    def __post_init__(self):
        if self.replicates < 1:
            raise ConfigError("replicates must be >= 1")
        lo, hi = self.percentiles
        if not 0.0 < lo < hi < 100.0:
            raise ConfigError("percentiles must satisfy 0 < lower < upper < 100")
        if self.resample_unit != "subject":
            raise ConfigError("only subject-level resampling is supported")


@dataclass(frozen=True)
class IntervalEstimate:
    point: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    n_replicates: int
    n_failed_replicates: int
    scalar: bool

    def as_scalar(self) -> tuple[float, float, float]:
        if not self.scalar:
            raise ConfigError("interval estimate is vector-valued")
        return float(self.point[0]), float(self.lower[0]), float(self.upper[0])


def resample_cohort(data: Cohort, rng: np.random.Generator) -> Cohort:
    """Draw n subjects with replacement; duplicates get suffixed ids."""
    ids = list(data.subjects)
    picks = rng.choice(len(ids), size=len(ids), replace=True)
    subjects: dict[str, tuple[PersonTimeRecord, ...]] = {}
    seen: dict[str, int] = {}
    for pick in picks:
        sid = ids[pick]
        count = seen.get(sid, 0)
        seen[sid] = count + 1
        new_sid = sid if count == 0 else f"{sid}#{count}"
        records = data.subjects[sid]
        if count > 0:
            records = tuple(replace(r, subject_id=new_sid) for r in records)
        subjects[new_sid] = records
    if isinstance(data, ExpandedCohort):
        return ExpandedCohort(subjects=subjects, k_max=data.k_max,
                              covariate_schema=data.covariate_schema,
                              primary_event_role=data.primary_event_role)
    return Cohort(subjects=subjects, k_max=data.k_max,
                  covariate_schema=data.covariate_schema)


def _one_replicate(data: Cohort, statistic, seed: int, rep: int):
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(rep,)))
    sample = resample_cohort(data, rng)
    try:
        return np.atleast_1d(np.asarray(statistic(sample), dtype=float))
    except CriskError:
        return None


def bootstrap_percentile_ci(data: Cohort, statistic, plan: BootstrapPlan,
                            n_jobs: int = 1) -> IntervalEstimate:
    """Percentile confidence interval for ``statistic(data)``.

    ``statistic`` maps a cohort to a float or a 1-d array. Replicates that
    raise a crisk error (non-convergence, separation, estimation failure)
    are dropped and counted; more than 20% failures aborts with
    ``BootstrapError``. Results are identical for any ``n_jobs``.
    """
    point_raw = statistic(data)
    scalar = np.ndim(point_raw) == 0
    point = np.atleast_1d(np.asarray(point_raw, dtype=float))

    reps = range(plan.replicates)
    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(
                _one_replicate,
                (data for _ in reps), (statistic for _ in reps),
                (plan.seed for _ in reps), reps,
                chunksize=max(1, plan.replicates // (4 * n_jobs)),
            ))
    else:
        results = [_one_replicate(data, statistic, plan.seed, rep) for rep in reps]

    kept = [r for r in results if r is not None]
    n_failed = plan.replicates - len(kept)
    if n_failed > MAX_FAILURE_FRACTION * plan.replicates:
        raise BootstrapError(
            f"{n_failed} of {plan.replicates} bootstrap replicates failed "
            f"(more than {MAX_FAILURE_FRACTION:.0%})"
        )
    draws = np.vstack(kept)
    if draws.shape[1] != point.shape[0]:
        raise ConfigError("statistic returned inconsistent shapes across replicates")
    lo, hi = plan.percentiles
    lower = np.percentile(draws, lo, axis=0)
    upper = np.percentile(draws, hi, axis=0)
    return IntervalEstimate(point=point, lower=lower, upper=upper,
                            n_replicates=plan.replicates,
                            n_failed_replicates=n_failed, scalar=scalar)
