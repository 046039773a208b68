"""Pooled-over-time logistic models for discrete-time hazards.

One model per hazard kind (event of interest, competing event, loss to
follow-up), fit by damped Newton iteration on the Bernoulli log-likelihood
over the person-time records in the relevant risk set. Intervals may be
declared structural zeros (hazard exactly 0, excluded from the likelihood),
e.g. when loss to follow-up cannot occur before some interval by design.

Time enters as powers of the scaled index (k+1)/(K+1); raw interval powers
up to 60^3 would be badly conditioned.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy.special import expit

from .cohort import Cohort, CovariateSchema, PersonTimeRecord
from .errors import ConfigError, ConvergenceError, DataError, SeparationError

HAZARD_KINDS = ("event", "competing", "censoring")
OUTCOME_BY_KIND = {"event": "y_next", "competing": "d_next", "censoring": "c_next"}

MAX_ITER = 100
SCORE_TOL = 1e-8
SEPARATION_BOUND = 15.0


@dataclass(frozen=True)
class CovariateTerm:
    name: str
    # None: enter the raw value. Otherwise strictly increasing cut points;
    # cuts (c1, .., cm) produce m indicator columns 1{x >= cj}.
    cuts: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.cuts is not None:
            if len(self.cuts) == 0:
                raise ConfigError(f"covariate {self.name!r}: empty cut list")
            if any(b <= a for a, b in zip(self.cuts, self.cuts[1:])):
                raise ConfigError(f"covariate {self.name!r}: cuts must be strictly increasing")

    @property
    def width(self) -> int:
        return 1 if self.cuts is None else len(self.cuts)

    def encode(self, value: float) -> list[float]:
        if self.cuts is None:
            return [float(value)]
        return [1.0 if value >= cut else 0.0 for cut in self.cuts]

    def column_names(self) -> list[str]:
        if self.cuts is None:
            return [self.name]
        return [f"{self.name}>={_trim(c)}" for c in self.cuts]


def _trim(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else repr(float(x))


@dataclass(frozen=True)
class DesignSpec:
    hazard_kind: str
    time_degree: int = 0
    include_treatment: bool = False
    treatment_time_interaction: bool = False
    covariate_terms: tuple[CovariateTerm, ...] = ()
    # intervals k < structural_zero_before have hazard forced to 0
    structural_zero_before: int = 0

    def __post_init__(self):
        if self.hazard_kind not in HAZARD_KINDS:
            raise ConfigError(f"unknown hazard kind {self.hazard_kind!r}")
        if self.time_degree < 0:
            raise ConfigError("time_degree must be >= 0")
        if self.treatment_time_interaction and not self.include_treatment:
            raise ConfigError("treatment_time_interaction requires include_treatment")
        if self.structural_zero_before < 0:
            raise ConfigError("structural_zero_before must be >= 0")

    @property
    def width(self) -> int:
        return (
            1
            + self.time_degree
            + int(self.include_treatment)
            + (self.time_degree if self.treatment_time_interaction else 0)
            + sum(term.width for term in self.covariate_terms)
        )

    def column_names(self) -> list[str]:
        names = ["intercept"]
        names += [f"t^{d}" for d in range(1, self.time_degree + 1)]
        if self.include_treatment:
            names.append("a")
        if self.treatment_time_interaction:
            names += [f"a*t^{d}" for d in range(1, self.time_degree + 1)]
        for term in self.covariate_terms:
            names += term.column_names()
        return names

    @classmethod
    def from_config(cls, obj: dict, hazard_kind: str) -> "DesignSpec":
        known = {"time_degree", "treatment", "treatment_time_interaction",
                 "covariates", "structural_zero_before"}
        unknown = set(obj) - known
        if unknown:
            raise ConfigError(f"unknown design keys: {sorted(unknown)}")
        terms = []
        for entry in obj.get("covariates", []):
            if "name" not in entry:
                raise ConfigError("covariate entry missing 'name'")
            cuts = entry.get("cuts")
            terms.append(CovariateTerm(entry["name"], None if cuts is None else tuple(cuts)))
        return cls(
            hazard_kind=hazard_kind,
            time_degree=int(obj.get("time_degree", 0)),
            include_treatment=bool(obj.get("treatment", False)),
            treatment_time_interaction=bool(obj.get("treatment_time_interaction", False)),
            covariate_terms=tuple(terms),
            structural_zero_before=int(obj.get("structural_zero_before", 0)),
        )

    def to_config(self) -> dict:
        obj: dict = {"time_degree": self.time_degree, "treatment": self.include_treatment,
                     "treatment_time_interaction": self.treatment_time_interaction}
        if self.covariate_terms:
            obj["covariates"] = [
                {"name": t.name} if t.cuts is None else {"name": t.name, "cuts": list(t.cuts)}
                for t in self.covariate_terms
            ]
        if self.structural_zero_before:
            obj["structural_zero_before"] = self.structural_zero_before
        return obj


def build_design_row(spec: DesignSpec, a: int, l0, k: int, k_max: int,
                     schema: CovariateSchema) -> np.ndarray:
    """Feature vector for one person-interval."""
    if k > k_max:
        raise DataError(f"interval {k} exceeds K={k_max}")
    row = [1.0]
    t = (k + 1) / (k_max + 1)
    row += [t ** d for d in range(1, spec.time_degree + 1)]
    if spec.include_treatment:
        row.append(float(a))
    if spec.treatment_time_interaction:
        row += [a * t ** d for d in range(1, spec.time_degree + 1)]
    index = {name: i for i, name in enumerate(schema.names)}
    for term in spec.covariate_terms:
        if term.name not in index:
            raise ConfigError(f"design covariate {term.name!r} not in schema")
        row += term.encode(l0[index[term.name]])
    return np.asarray(row, dtype=float)


def build_design_matrix(spec: DesignSpec, records: list[PersonTimeRecord], k_max: int,
                        schema: CovariateSchema) -> np.ndarray:
    return np.vstack([
        build_design_row(spec, r.a, r.l0, r.k, k_max, schema) for r in records
    ]) if records else np.empty((0, spec.width))


@dataclass(frozen=True)
class FittedHazardModel:
    spec: DesignSpec
    coefficients: np.ndarray
    converged: bool
    iterations: int
    log_likelihood: float
    structural_zero: frozenset[int]
    fit_filter: str
    k_max: int
    schema: CovariateSchema
    n_records: int = 0
    max_score: float = float("nan")

    def column_names(self) -> list[str]:
        return self.spec.column_names()

    @classmethod
    def all_zero(cls, spec: DesignSpec, k_max: int, schema: CovariateSchema) -> "FittedHazardModel":
        """A model whose hazard is structurally 0 at every interval; no fit."""
        return cls(
            spec=spec,
            coefficients=np.zeros(spec.width),
            converged=True,
            iterations=0,
            log_likelihood=0.0,
            structural_zero=frozenset(range(k_max + 1)),
            fit_filter="structural zero everywhere; no records fit",
            k_max=k_max,
            schema=schema,
        )


def default_risk_set(outcome: str):
    """Standard risk-set predicate for fitting a hazard of the given outcome.

    The within-interval ordering is (C, D, Y): the event hazard conditions on
    remaining uncensored and free of the competing event through k+1, the
    competing hazard on remaining uncensored through k+1, and the censoring
    hazard uses every record at risk.
    """
    if outcome == "y_next":
        return lambda r: r.c_next == 0 and r.d_next == 0 and not r.post_competing
    if outcome == "d_next":
        return lambda r: r.c_next == 0 and not r.post_competing
    if outcome == "c_next":
        return lambda r: True
    raise ConfigError(f"unknown outcome {outcome!r}")


def pre_competing_risk_set(r: PersonTimeRecord) -> bool:
    """Risk set restricted to records before a competing-event failure."""
    return not r.post_competing


def _log_likelihood(eta: np.ndarray, y: np.ndarray) -> float:
    # sum_i y*eta - log(1 + exp(eta)), computed stably
    return float(np.sum(y * eta - np.logaddexp(0.0, eta)))


def fit_pooled_logistic(data: Cohort, spec: DesignSpec, outcome: str,
                        risk_set=None) -> FittedHazardModel:
    """Maximize the Bernoulli log-likelihood by damped Newton iteration.

    ``risk_set`` is a predicate over records; by default the standard
    restriction for ``outcome`` (see ``default_risk_set``). Records in
    structural-zero intervals are excluded from the likelihood.
    """
    if outcome not in OUTCOME_BY_KIND.values():
        raise ConfigError(f"unknown outcome {outcome!r}")
    if risk_set is None:
        risk_set = default_risk_set(outcome)
    structural_zero = frozenset(range(spec.structural_zero_before))

    records = [
        r for r in data.iter_records()
        if r.k not in structural_zero and risk_set(r)
    ]
    if not records:
        raise DataError("empty risk set: no records enter the likelihood")
    y = np.array([getattr(r, outcome) for r in records], dtype=float)
    X = build_design_matrix(spec, records, data.k_max, data.covariate_schema)
    columns = spec.column_names()

    beta = np.zeros(spec.width)
    eta = X @ beta
    ll = _log_likelihood(eta, y)
    converged = False
    iterations = 0
    max_score = np.inf
    for iterations in range(1, MAX_ITER + 1):
        p = expit(eta)
        score = X.T @ (y - p)
        max_score = float(np.max(np.abs(score)))
        if max_score < SCORE_TOL:
            converged = True
            iterations -= 1
            break
        w = p * (1.0 - p)
        hessian = (X * w[:, None]).T @ X
        try:
            step = np.linalg.solve(hessian, score)
        except np.linalg.LinAlgError:
            worst = int(np.argmax(np.abs(beta)))
            raise SeparationError(columns[worst], float(beta[worst])) from None

        # step-halving on likelihood decrease; the slack is relative because
        # the log-likelihood's floating-point granularity grows with |ll|
        slack = 1e-9 * max(1.0, abs(ll))
        scale = 1.0
        for _ in range(40):
            candidate = beta + scale * step
            eta_new = X @ candidate
            ll_new = _log_likelihood(eta_new, y)
            if ll_new >= ll - slack:
                break
            scale *= 0.5
        else:
            break  # no improving step; report non-convergence below
        beta, eta, improved = candidate, eta_new, ll_new - ll
        ll = ll_new

        over = np.abs(beta) > SEPARATION_BOUND
        if np.any(over) and improved < 1e-8:
            worst = int(np.argmax(np.abs(beta)))
            raise SeparationError(columns[worst], float(beta[worst]))

    if converged:
        p = expit(eta)
        max_score = float(np.max(np.abs(X.T @ (y - p))))
        if np.any(np.abs(beta) > SEPARATION_BOUND):
            worst = int(np.argmax(np.abs(beta)))
            raise SeparationError(columns[worst], float(beta[worst]))

    return FittedHazardModel(
        spec=spec,
        coefficients=beta,
        converged=converged,
        iterations=iterations,
        log_likelihood=ll,
        structural_zero=structural_zero,
        fit_filter=f"outcome={outcome}, n_records={len(records)}",
        k_max=data.k_max,
        schema=data.covariate_schema,
        n_records=len(records),
        max_score=max_score,
    )


def predict_hazard(model: FittedHazardModel, a: int, l0, k: int) -> float:
    """Predicted hazard at one person-interval; exactly 0 on structural zeros."""
    if not model.converged:
        raise ConvergenceError("cannot predict from a non-converged model")
    if k in model.structural_zero:
        return 0.0
    row = build_design_row(model.spec, a, l0, k, model.k_max, model.schema)
    return float(expit(row @ model.coefficients))


def predict_hazard_matrix(model: FittedHazardModel, a: int, l0_rows: np.ndarray) -> np.ndarray:
    """Hazard matrix of shape (n_subjects, K+1) for arm ``a``.

    ``l0_rows`` has one row of baseline covariates per subject.
    """
    if not model.converged:
        raise ConvergenceError("cannot predict from a non-converged model")
    spec, schema, beta = model.spec, model.schema, model.coefficients
    l0_rows = np.atleast_2d(np.asarray(l0_rows, dtype=float))
    n = l0_rows.shape[0]

    # covariate columns do not vary with k: encode them once
    n_base = 1 + spec.time_degree + int(spec.include_treatment) \
        + (spec.time_degree if spec.treatment_time_interaction else 0)
    cov_cols = []
    index = {name: i for i, name in enumerate(schema.names)}
    for term in spec.covariate_terms:
        if term.name not in index:
            raise ConfigError(f"design covariate {term.name!r} not in schema")
        values = l0_rows[:, index[term.name]]
        if term.cuts is None:
            cov_cols.append(values)
        else:
            cov_cols += [(values >= cut).astype(float) for cut in term.cuts]
    cov_part = np.zeros(n)
    if cov_cols:
        cov_part = np.column_stack(cov_cols) @ beta[n_base:]

    out = np.zeros((n, model.k_max + 1))
    for k in range(model.k_max + 1):
        if k in model.structural_zero:
            continue
        t = (k + 1) / (model.k_max + 1)
        base = [1.0] + [t ** d for d in range(1, spec.time_degree + 1)]
        if spec.include_treatment:
            base.append(float(a))
        if spec.treatment_time_interaction:
            base += [a * t ** d for d in range(1, spec.time_degree + 1)]
        eta0 = float(np.asarray(base) @ beta[:n_base])
        out[:, k] = expit(eta0 + cov_part)
    return out


def positivity_report(data: Cohort, strata: list[str], which: str = "treatment") -> pd.DataFrame:
    """At-risk counts per stratum x interval x arm, flagging empty cells.

    ``which`` picks the risk set whose conditional probability the cell
    supports: "treatment" and "censoring" count records free of all events
    through k; "competing" counts records additionally free of the competing
    event by k+1.
    """
    if which not in ("treatment", "censoring", "competing"):
        raise ConfigError(f"unknown positivity report kind {which!r}")
    schema = data.covariate_schema
    for name in strata:
        if name not in schema.names:
            raise ConfigError(f"stratum {name!r} is not a declared covariate")
    index = {name: schema.names.index(name) for name in strata}

    counts: dict[tuple, int] = {}
    seen_strata = set()
    for r in data.iter_records():
        if r.post_competing:
            continue
        if which == "competing" and r.c_next == 1:
            continue
        stratum = tuple(r.l0[index[name]] for name in strata)
        seen_strata.add(stratum)
        counts[(stratum, r.k, r.a)] = counts.get((stratum, r.k, r.a), 0) + 1

    rows = []
    for stratum in sorted(seen_strata):
        for k in range(data.k_max + 1):
            for arm in (0, 1):
                at_risk = counts.get((stratum, k, arm), 0)
                rows.append({
                    "stratum": ",".join(f"{n}={_trim(v)}" for n, v in zip(strata, stratum)) or "(all)",
                    "k": k,
                    "arm": arm,
                    "at_risk": at_risk,
                    "zero_cell": at_risk == 0,
                })
    return pd.DataFrame(rows, columns=["stratum", "k", "arm", "at_risk", "zero_cell"])
