"""Counterfactual risk curves and effect contrasts.

Two estimator families over baseline covariates:

* g-formula: standardize predicted discrete-time hazards over the empirical
  baseline-covariate distribution of all n subjects and accumulate the
  product-limit sum.
* IPW: reweight observed records by inverse cumulative probabilities of
  remaining uncensored (and, for the direct effect, free of the competing
  event), then accumulate weighted product-limit (Kaplan-Meier or
  Aalen-Johansen type) curves.

Targets: ``direct_risk`` (risk under elimination of competing events),
``total_risk``, ``competing_risk``, and their sum ``composite_risk``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cohort import Cohort, ExpandedCohort
from .errors import ConfigError, ConvergenceError, EstimationError
from .hazards import FittedHazardModel, predict_hazard_matrix

TARGETS = ("direct_risk", "total_risk", "competing_risk", "composite_risk")
METHODS = ("gformula", "ipw_cause_specific", "ipw_subdistribution")


@dataclass(frozen=True)
class EstimandSpec:
    target: str
    method: str
    arm: int
    horizon: int  # K+1

    def __post_init__(self):
        if self.target not in TARGETS:
            raise ConfigError(f"unknown target {self.target!r}")
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}")
        if self.arm not in (0, 1):
            raise ConfigError(f"arm must be 0 or 1, got {self.arm!r}")
        if self.horizon < 1:
            raise ConfigError("horizon must be >= 1")
        if self.target == "direct_risk" and self.method == "ipw_subdistribution":
            raise ConfigError(
                "direct_risk with ipw_subdistribution is inadmissible: "
                "no such estimator exists"
            )


@dataclass(frozen=True)
class RiskCurve:
    arm: int
    values: tuple[float, ...]  # indexed by k+1 = 1..K+1
    estimand: EstimandSpec
    warnings: tuple[str, ...] = ()

    def at(self, k_plus_1: int) -> float:
        return self.values[k_plus_1 - 1]

    @property
    def horizon_value(self) -> float:
        return self.values[self.estimand.horizon - 1]


@dataclass(frozen=True)
class EffectEstimate:
    scale: str  # difference | ratio
    horizon: int
    value: float | None
    per_interval: tuple[float | None, ...]
    estimand: str


def _check_converged(model: FittedHazardModel, name: str):
    if model is None:
        raise ConfigError(f"{name} hazard model is required for this estimand")
    if not model.converged:
        raise ConvergenceError(f"{name} hazard model did not converge")


def _baseline_matrix(data: Cohort) -> np.ndarray:
    rows = [l0 for _, _, l0 in data.baseline()]
    width = len(data.covariate_schema.names)
    if width == 0:
        return np.zeros((len(rows), 0))
    return np.asarray(rows, dtype=float)


def estimate_risk_gformula(data: Cohort, spec: EstimandSpec,
                           event_model: FittedHazardModel,
                           competing_model: FittedHazardModel | None = None) -> RiskCurve:
    """Parametric g-formula risk curve, standardized over all n subjects."""
    if spec.method != "gformula":
        raise ConfigError("estimate_risk_gformula requires method=gformula")
    if isinstance(data, ExpandedCohort):
        raise ConfigError("g-formula estimation uses the unexpanded cohort")
    _check_converged(event_model, "event")
    if spec.target != "direct_risk":
        _check_converged(competing_model, "competing")

    l0 = _baseline_matrix(data)
    p = predict_hazard_matrix(event_model, spec.arm, l0)  # (n, K+1)
    if spec.target == "direct_risk":
        surv = np.cumprod(1.0 - p, axis=1)
        terms = p.copy()
        terms[:, 1:] *= surv[:, :-1]
        return RiskCurve(spec.arm, tuple(np.cumsum(terms.mean(axis=0))), spec)

    q = predict_hazard_matrix(competing_model, spec.arm, l0)
    surv = np.cumprod((1.0 - p) * (1.0 - q), axis=1)
    lagged = np.ones_like(surv)
    lagged[:, 1:] = surv[:, :-1]
    event_terms = p * (1.0 - q) * lagged
    competing_terms = q * lagged
    if spec.target == "total_risk":
        values = np.cumsum(event_terms.mean(axis=0))
    elif spec.target == "competing_risk":
        values = np.cumsum(competing_terms.mean(axis=0))
    else:  # composite_risk: exact per-interval sum of the two curves
        values = np.cumsum(event_terms.mean(axis=0)) + np.cumsum(competing_terms.mean(axis=0))
    return RiskCurve(spec.arm, tuple(values), spec)


@dataclass
class _ArmArrays:
    """Per-subject indicator and hazard arrays for one arm, padded to K+1."""

    present: np.ndarray  # (m, K+1) record exists
    c: np.ndarray
    d: np.ndarray
    y: np.ndarray
    post: np.ndarray  # post-competing flag per record
    l0: np.ndarray


def _arm_arrays(data: Cohort, arm: int) -> _ArmArrays:
    subjects = [recs for recs in data.subjects.values() if recs[0].a == arm]
    m = len(subjects)
    width = len(data.covariate_schema.names)
    shape = (m, data.k_max + 1)
    present = np.zeros(shape, dtype=bool)
    c = np.zeros(shape)
    d = np.zeros(shape)
    y = np.zeros(shape)
    post = np.zeros(shape, dtype=bool)
    l0 = np.zeros((m, width))
    for i, recs in enumerate(subjects):
        l0[i] = recs[0].l0
        for r in recs:
            present[i, r.k] = True
            c[i, r.k] = r.c_next
            d[i, r.k] = r.d_next
            y[i, r.k] = r.y_next
            post[i, r.k] = r.post_competing
    return _ArmArrays(present, c, d, y, post, l0)


def _eligible(present: np.ndarray, *bad: np.ndarray) -> np.ndarray:
    """Record k exists and none of the listed indicators fired at any j <= k."""
    any_bad = np.zeros_like(present, dtype=bool)
    for b in bad:
        any_bad |= b > 0
    fired_by = np.cumsum(any_bad, axis=1) > 0
    return present & ~fired_by


def _truncate(weights: np.ndarray, eligible: np.ndarray, percentile: float | None) -> np.ndarray:
    if percentile is None:
        return weights
    values = weights[eligible]
    if values.size == 0:
        return weights
    cap = np.percentile(values, percentile)
    return np.minimum(weights, cap)


def estimate_risk_ipw(data: Cohort, spec: EstimandSpec,
                      censoring_model: FittedHazardModel,
                      competing_model: FittedHazardModel | None = None,
                      truncate_percentile: float | None = None) -> RiskCurve:
    """IPW risk curve via weighted product-limit accumulation.

    * direct_risk: weights are cumulative inverse probabilities of remaining
      both uncensored and free of the competing event (unexpanded cohort);
      the curve is the complement of a weighted Kaplan-Meier estimator.
    * total_risk / competing_risk with ipw_cause_specific: censoring weights
      only; weighted Aalen-Johansen accumulation (unexpanded cohort).
    * total_risk / competing_risk with ipw_subdistribution: censoring weights
      with post-competing censoring hazard structurally 0, on the risk-set
      expanded cohort; weighted subdistribution product-limit.
    """
    if spec.method == "gformula":
        raise ConfigError("estimate_risk_ipw requires an IPW method")
    if spec.target == "composite_risk":
        event = estimate_risk_ipw(data, EstimandSpec("total_risk", spec.method, spec.arm, spec.horizon),
                                  censoring_model, competing_model, truncate_percentile)
        comp = estimate_risk_ipw(data, EstimandSpec("competing_risk", spec.method, spec.arm, spec.horizon),
                                 censoring_model, competing_model, truncate_percentile)
        values = tuple(a + b for a, b in zip(event.values, comp.values))
        return RiskCurve(spec.arm, values, spec, event.warnings + comp.warnings)
    _check_converged(censoring_model, "censoring")

    expanded = isinstance(data, ExpandedCohort)
    if spec.method == "ipw_subdistribution" and not expanded:
        raise ConfigError("ipw_subdistribution requires a risk-set expanded cohort")
    if spec.method == "ipw_cause_specific" and expanded:
        raise ConfigError("ipw_cause_specific uses the unexpanded cohort")
    if spec.target == "competing_risk" and spec.method == "ipw_subdistribution":
        if data.primary_event_role != "competing_event":
            raise ConfigError(
                "subdistribution competing_risk requires expansion with role=competing_event"
            )
    if spec.target == "total_risk" and spec.method == "ipw_subdistribution":
        if data.primary_event_role != "event_of_interest":
            raise ConfigError(
                "subdistribution total_risk requires expansion with role=event_of_interest"
            )

    arm = _arm_arrays(data, spec.arm)
    if arm.present.shape[0] == 0:
        raise EstimationError(f"no subjects in arm {spec.arm}")
    K1 = data.k_max + 1
    r_hat = predict_hazard_matrix(censoring_model, spec.arm, arm.l0)

    warnings: list[str] = []
    if spec.target == "direct_risk":
        _check_converged(competing_model, "competing")
        q_hat = predict_hazard_matrix(competing_model, spec.arm, arm.l0)
        eligible = _eligible(arm.present, arm.c, arm.d)
        denom = np.cumprod((1.0 - r_hat) * (1.0 - q_hat), axis=1)
        with np.errstate(divide="ignore"):
            w = np.where(eligible, 1.0 / denom, 0.0)
        w = _truncate(w, eligible, truncate_percentile)
        hazard = np.zeros(K1)
        exhausted = None
        for k in range(K1):
            at_risk = int(eligible[:, k].sum())
            den = float(w[:, k].sum())
            if at_risk == 0:
                exhausted = k
                break
            if den == 0.0:
                raise EstimationError(
                    f"zero weighted denominator at interval {k} with {at_risk} subjects at risk"
                )
            hazard[k] = float((arm.y[:, k] * w[:, k]).sum()) / den
        values = _km_accumulate(hazard, exhausted, warnings)
        return RiskCurve(spec.arm, values, spec, tuple(warnings))

    if spec.method == "ipw_cause_specific":
        eligible = _eligible(arm.present, arm.c)
        denom = np.cumprod(1.0 - r_hat, axis=1)
        with np.errstate(divide="ignore"):
            w = np.where(eligible, 1.0 / denom, 0.0)
        w = _truncate(w, eligible, truncate_percentile)
        g1 = np.zeros(K1)
        g2 = np.zeros(K1)
        exhausted = None
        for k in range(K1):
            at_risk = int(eligible[:, k].sum())
            if at_risk == 0:
                exhausted = k
                break
            den2 = float(w[:, k].sum())
            if den2 == 0.0:
                raise EstimationError(
                    f"zero weighted denominator at interval {k} with {at_risk} subjects at risk"
                )
            g2[k] = float((arm.d[:, k] * w[:, k]).sum()) / den2
            event_eligible = eligible[:, k] & (arm.d[:, k] == 0)
            den1 = float((w[:, k] * (1.0 - arm.d[:, k])).sum())
            if den1 == 0.0:
                if int(event_eligible.sum()) > 0:
                    raise EstimationError(
                        f"zero weighted event denominator at interval {k} "
                        f"with {int(event_eligible.sum())} subjects at risk"
                    )
                g1[k] = 0.0
            else:
                g1[k] = float((arm.y[:, k] * w[:, k]).sum()) / den1
        values = _aj_accumulate(g1, g2, spec.target, exhausted, warnings, K1)
        return RiskCurve(spec.arm, values, spec, tuple(warnings))

    # ipw_subdistribution on the expanded cohort
    r_sub = np.where(arm.post, 0.0, r_hat)  # post-competing censoring hazard is 0
    eligible = _eligible(arm.present, arm.c)
    denom = np.cumprod(1.0 - r_sub, axis=1)
    with np.errstate(divide="ignore"):
        w = np.where(eligible, 1.0 / denom, 0.0)
    w = _truncate(w, eligible, truncate_percentile)
    hazard = np.zeros(K1)
    exhausted = None
    for k in range(K1):
        at_risk = int(eligible[:, k].sum())
        den = float(w[:, k].sum())
        if at_risk == 0:
            exhausted = k
            break
        if den == 0.0:
            raise EstimationError(
                f"zero weighted denominator at interval {k} with {at_risk} subjects at risk"
            )
        hazard[k] = float((arm.y[:, k] * w[:, k]).sum()) / den
    values = _km_accumulate(hazard, exhausted, warnings)
    return RiskCurve(spec.arm, values, spec, tuple(warnings))


def _km_accumulate(hazard: np.ndarray, exhausted: int | None,
                   warnings: list[str]) -> tuple[float, ...]:
    K1 = hazard.shape[0]
    values = np.zeros(K1)
    risk = 0.0
    surv = 1.0
    for k in range(K1):
        if exhausted is not None and k >= exhausted:
            if exhausted < K1:
                warnings.append(
                    f"risk set exhausted at interval {exhausted}; curve held constant"
                )
            values[k:] = risk
            break
        risk += hazard[k] * surv
        surv *= 1.0 - hazard[k]
        values[k] = risk
    return tuple(values)


def _aj_accumulate(g1: np.ndarray, g2: np.ndarray, target: str, exhausted: int | None,
                   warnings: list[str], K1: int) -> tuple[float, ...]:
    values = np.zeros(K1)
    risk = 0.0
    surv = 1.0
    for k in range(K1):
        if exhausted is not None and k >= exhausted:
            warnings.append(
                f"risk set exhausted at interval {exhausted}; curve held constant"
            )
            values[k:] = risk
            break
        if target == "total_risk":
            risk += g1[k] * (1.0 - g2[k]) * surv
        else:
            risk += g2[k] * surv
        surv *= (1.0 - g1[k]) * (1.0 - g2[k])
        values[k] = risk
    return tuple(values)


def nonparametric_cumulative(data: Cohort, arm: int, event: str = "y_next") -> RiskCurve:
    """Events by k+1 divided by arm size; valid while no censoring occurred."""
    if event not in ("y_next", "d_next"):
        raise ConfigError(f"unknown event column {event!r}")
    subjects = [recs for recs in data.subjects.values() if recs[0].a == arm]
    if not subjects:
        raise EstimationError(f"no subjects in arm {arm}")
    n = len(subjects)
    counts = np.zeros(data.k_max + 1)
    for recs in subjects:
        for r in recs:
            if getattr(r, event) and not r.post_competing:
                counts[r.k] += 1
    target = "total_risk" if event == "y_next" else "competing_risk"
    spec = EstimandSpec(target, "ipw_cause_specific", arm, data.k_max + 1)
    return RiskCurve(arm, tuple(np.cumsum(counts) / n), spec)


def effect_contrast(r1: RiskCurve, r0: RiskCurve, scale: str) -> EffectEstimate:
    """Per-interval and horizon contrast of arm-1 vs arm-0 risk curves."""
    if scale not in ("difference", "ratio"):
        raise ConfigError(f"unknown contrast scale {scale!r}")
    if r1.estimand.target != r0.estimand.target or r1.estimand.method != r0.estimand.method \
            or r1.estimand.horizon != r0.estimand.horizon:
        raise ConfigError("contrast requires matching estimand and horizon")
    if (r1.arm, r0.arm) != (1, 0):
        raise ConfigError("contrast expects r1 from arm 1 and r0 from arm 0")
    per_interval: list[float | None] = []
    for v1, v0 in zip(r1.values, r0.values):
        if scale == "difference":
            per_interval.append(v1 - v0)
        else:
            per_interval.append(v1 / v0 if v0 > 0 else None)
    horizon = r1.estimand.horizon
    return EffectEstimate(
        scale=scale,
        horizon=horizon,
        value=per_interval[horizon - 1],
        per_interval=tuple(per_interval),
        estimand=f"{r1.estimand.target}/{r1.estimand.method}",
    )


def risk_curve_rows(curve: RiskCurve) -> list[dict]:
    """Tidy rows for CSV serialization."""
    return [
        {
            "estimand": curve.estimand.target,
            "method": curve.estimand.method,
            "arm": curve.arm,
            "k_plus_1": k + 1,
            "risk": value,
        }
        for k, value in enumerate(curve.values)
    ]
