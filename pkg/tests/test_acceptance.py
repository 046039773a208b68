"""Acceptance suite: the eight release criteria with their stated tolerances.

Criteria touching the prostate trial data (1, 2, and the second half of 7)
skip with an explicit reason when the prepared person-time file is absent;
this environment cannot download the public dataset. Everything else is
regenerated at test time.
"""

import dataclasses
import time

import numpy as np
import pytest

from crisk.cohort import expand_risk_sets, load_person_time
from crisk.dgp import canned_dgps, random_dgp, simulate_cohort
from crisk.estimators import (EstimandSpec, effect_contrast,
                              estimate_risk_gformula, estimate_risk_ipw,
                              nonparametric_cumulative)
from crisk.hazards import (DesignSpec, build_design_matrix, default_risk_set,
                           fit_pooled_logistic)
from crisk.inference import BootstrapPlan, bootstrap_percentile_ci
from crisk.oracle import true_estimand, verify_identities
from crisk.pipeline import fit_models, load_config, run_pipeline

from conftest import PROSTATE_CONFIG, require_prostate

SAT = dict(time_degree=2, include_treatment=True, treatment_time_interaction=True)

# Table of published 60-month effect estimates the pipeline must reproduce:
# (target, method, published risk ratio, published risk difference)
PUBLISHED_EFFECTS = [
    ("total_risk", "gformula", 0.76, -0.07),
    ("total_risk", "ipw_cause_specific", 0.78, -0.06),
    ("total_risk", "ipw_subdistribution", 0.78, -0.06),
    ("competing_risk", "gformula", 1.28, 0.12),
    ("competing_risk", "ipw_cause_specific", 1.19, 0.08),
    ("direct_risk", "gformula", 0.91, -0.03),
    ("direct_risk", "ipw_cause_specific", 0.98, -0.01),
]

# published 95% interval widths for the same rows (ratio scale, then
# difference scale), used for the bootstrap width comparison in criterion 7
PUBLISHED_RATIO_CI = {
    ("total_risk", "gformula"): (0.47, 1.24),
}


def _prostate_run(tmp_path, bootstrap=False):
    require_prostate()
    config = load_config(PROSTATE_CONFIG, overrides={"out": str(tmp_path / "out")})
    if not bootstrap:
        config = dataclasses.replace(config, bootstrap=None)
    return config, run_pipeline(config)


def test_criterion_1_table_reproduction(tmp_path):
    start = time.time()
    _, summary = _prostate_run(tmp_path)
    elapsed = time.time() - start
    effects = {(e["target"], e["method"], e["scale"]): e["value"]
               for e in summary["effects"]}
    for target, method, rr, rd in PUBLISHED_EFFECTS:
        got_rr = effects[(target, method, "ratio")]
        got_rd = effects[(target, method, "difference")]
        assert abs(got_rd - rd) <= 0.02, (target, method, "difference", got_rd)
        assert abs(got_rr - rr) <= 0.05, (target, method, "ratio", got_rr)
    assert elapsed < 60.0


def test_criterion_2_no_censoring_agreement():
    start = time.time()
    require_prostate()
    config = load_config(PROSTATE_CONFIG)
    data = load_person_time(config.data_path, config.schema, k_max=config.k_max)
    models = fit_models(data, config)
    horizon = config.horizon
    expanded = expand_risk_sets(data, "event_of_interest")
    for arm in (0, 1):
        empirical = nonparametric_cumulative(data, arm, "y_next").values
        cs = estimate_risk_ipw(
            data, EstimandSpec("total_risk", "ipw_cause_specific", arm, horizon),
            models["censoring"], models["competing"]).values
        sub = estimate_risk_ipw(
            expanded, EstimandSpec("total_risk", "ipw_subdistribution", arm, horizon),
            models["censoring"]).values
        # no losses to follow-up occur before interval 50, so both weighted
        # estimators must coincide exactly with the empirical proportion there
        for k in range(50):
            assert abs(cs[k] - empirical[k]) < 1e-10, (arm, k)
            assert abs(sub[k] - empirical[k]) < 1e-10, (arm, k)
    assert time.time() - start < 10.0


def test_criterion_3_algebraic_identities():
    start = time.time()
    for seed in range(100):
        dgp = random_dgp(seed, horizon=seed % 4)
        report = verify_identities(dgp, tol=1e-10)
        assert report.all_pass, (seed, [str(r) for r in report.failures[:3]])
    assert time.time() - start < 60.0


def _fit_and_estimate(data, target, arm):
    models = {
        "event": fit_pooled_logistic(data, DesignSpec("event", **SAT), "y_next"),
        "competing": fit_pooled_logistic(data, DesignSpec("competing", **SAT), "d_next"),
        "censoring": fit_pooled_logistic(data, DesignSpec("censoring", **SAT), "c_next"),
    }
    horizon = data.k_max + 1
    gform = estimate_risk_gformula(
        data, EstimandSpec(target, "gformula", arm, horizon),
        models["event"], models["competing"])
    ipw = estimate_risk_ipw(
        data, EstimandSpec(target, "ipw_cause_specific", arm, horizon),
        models["censoring"], models["competing"])
    return gform.values, ipw.values


def test_criterion_4_identification_at_scale(dgps):
    start = time.time()
    n = 200_000

    # figure1_dgp: everything identified; estimates within 3 MC SE of truth
    dgp = dgps["figure1_dgp"]
    data = simulate_cohort(dgp, n, seed=2024)
    arm_n = data.arm_sizes()
    for target, estimand in (("direct_risk", "risk1"), ("total_risk", "risk2")):
        for arm in (0, 1):
            gform, ipw = _fit_and_estimate(data, target, arm)
            for k in range(dgp.horizon + 1):
                truth = true_estimand(dgp, estimand, arm, k)
                se = np.sqrt(truth * (1 - truth) / arm_n[arm])
                assert abs(gform[k] - truth) < 3 * se, (target, arm, k)
                assert abs(ipw[k] - truth) < 3 * se, (target, arm, k)

    # figure2_dgp: the unmeasured factor drives the competing event, so the
    # direct-risk estimators are biased while the total-risk ones are not
    dgp = dgps["figure2_dgp"]
    data = simulate_cohort(dgp, n, seed=2025)
    arm_n = data.arm_sizes()
    k = dgp.horizon
    for arm in (0, 1):
        truth1 = true_estimand(dgp, "risk1", arm, k)
        truth2 = true_estimand(dgp, "risk2", arm, k)
        se1 = np.sqrt(truth1 * (1 - truth1) / arm_n[arm])
        se2 = np.sqrt(truth2 * (1 - truth2) / arm_n[arm])
        gform_d, ipw_d = _fit_and_estimate(data, "direct_risk", arm)
        gform_t, ipw_t = _fit_and_estimate(data, "total_risk", arm)
        assert abs(gform_d[k] - truth1) > 3 * se1, arm
        assert abs(ipw_d[k] - truth1) > 3 * se1, arm
        assert abs(gform_t[k] - truth2) < 3 * se2, arm
        assert abs(ipw_t[k] - truth2) < 3 * se2, arm

    assert time.time() - start < 300.0


def test_criterion_5_hazard_non_causality(dgps):
    dgp = dgps["hazard_paradox_dgp"]
    # structural non-dependence of the second-interval event on treatment
    assert "A" not in dgp.tables["Y2"].parents
    h1 = true_estimand(dgp, "hazard1", 1, k=1)
    h0 = true_estimand(dgp, "hazard1", 0, k=1)
    assert abs(h1 / h0 - 1.0) > 0.01
    report = verify_identities(dgp)
    assert report.all_pass
    paradox_rows = [r for r in report.rows if "paradox" in r.name]
    assert paradox_rows and all(r.status == "pass" for r in paradox_rows)


def test_criterion_6_composite_additivity(fig2_cohort):
    data = fig2_cohort
    horizon = data.k_max + 1
    models = {
        "event": fit_pooled_logistic(data, DesignSpec("event", **SAT), "y_next"),
        "competing": fit_pooled_logistic(data, DesignSpec("competing", **SAT), "d_next"),
        "censoring": fit_pooled_logistic(data, DesignSpec("censoring", **SAT), "c_next"),
    }
    for arm in (0, 1):
        for method in ("gformula", "ipw_cause_specific"):
            curves = {}
            for target in ("total_risk", "competing_risk", "composite_risk"):
                spec = EstimandSpec(target, method, arm, horizon)
                if method == "gformula":
                    curves[target] = estimate_risk_gformula(
                        data, spec, models["event"], models["competing"]).values
                else:
                    curves[target] = estimate_risk_ipw(
                        data, spec, models["censoring"], models["competing"]).values
            for e, c, tot in zip(curves["total_risk"], curves["competing_risk"],
                                 curves["composite_risk"]):
                assert abs(tot - (e + c)) < 1e-12


def _rd2_statistic(data):
    # a first-degree time trend: the quadratic basis is badly conditioned at
    # n = 500 and trips the separation guard on many resamples, which is the
    # same failure mode that motivates leaner models on small data
    lean = dict(time_degree=1, include_treatment=True, treatment_time_interaction=True)
    models = {
        "event": fit_pooled_logistic(data, DesignSpec("event", **lean), "y_next"),
        "competing": fit_pooled_logistic(data, DesignSpec("competing", **lean), "d_next"),
    }
    horizon = data.k_max + 1
    r1 = estimate_risk_gformula(
        data, EstimandSpec("total_risk", "gformula", 1, horizon),
        models["event"], models["competing"])
    r0 = estimate_risk_gformula(
        data, EstimandSpec("total_risk", "gformula", 0, horizon),
        models["event"], models["competing"])
    return r1.horizon_value - r0.horizon_value


def test_criterion_7_bootstrap_determinism_and_coverage(dgps):
    dgp = dgps["figure2_dgp"]
    plan = BootstrapPlan(replicates=40, seed=77)
    data = simulate_cohort(dgp, 500, seed=0)
    one = bootstrap_percentile_ci(data, _rd2_statistic, plan)
    two = bootstrap_percentile_ci(data, _rd2_statistic, plan)
    assert np.array_equal(one.lower, two.lower)
    assert np.array_equal(one.upper, two.upper)

    # coverage of the 95% percentile interval for the total-effect risk
    # difference across repeated samples of n = 500
    truth = true_estimand(dgp, "RD2")
    n_sims, hits, failures = 200, 0, 0
    plan = BootstrapPlan(replicates=200, seed=1234)
    for sim in range(n_sims):
        sample = simulate_cohort(dgp, 500, seed=10_000 + sim)
        try:
            result = bootstrap_percentile_ci(sample, _rd2_statistic, plan)
        except Exception:
            failures += 1
            continue
        _, lower, upper = result.as_scalar()
        hits += int(lower <= truth <= upper)
    assert failures <= 5
    coverage = hits / (n_sims - failures)
    assert 0.90 <= coverage <= 0.98, coverage


def test_criterion_7_prostate_interval_sanity(tmp_path):
    require_prostate()
    config = load_config(
        PROSTATE_CONFIG, overrides={"out": str(tmp_path / "out"), "bootstrap": 500})
    summary = run_pipeline(config)
    effects = {(e["target"], e["method"], e["scale"]): e
               for e in summary["effects"]}
    for (target, method), (lo, hi) in PUBLISHED_RATIO_CI.items():
        entry = effects[(target, method, "ratio")]
        assert entry["lower"] <= entry["value"] <= entry["upper"]
        width = entry["upper"] - entry["lower"]
        published_width = hi - lo
        assert abs(width - published_width) <= 0.25 * published_width
    # every reported interval brackets its point estimate
    for entry in effects.values():
        if entry["value"] is not None and "lower" in entry:
            assert entry["lower"] <= entry["value"] <= entry["upper"]


def test_criterion_8_score_at_optimum(dgps):
    data = simulate_cohort(dgps["figure2_dgp"], 3000, seed=55)
    from scipy.special import expit

    for outcome, kind in (("y_next", "event"), ("d_next", "competing"),
                          ("c_next", "censoring")):
        spec = DesignSpec(kind, **SAT)
        model = fit_pooled_logistic(data, spec, outcome)
        assert model.converged
        assert model.max_score < 1e-6

        records = [r for r in data.iter_records()
                   if default_risk_set(outcome)(r)]
        y = np.array([getattr(r, outcome) for r in records], dtype=float)
        X = build_design_matrix(spec, records, data.k_max, data.covariate_schema)
        beta = model.coefficients

        def loglik(b):
            eta = X @ b
            return float(np.sum(y * eta - np.logaddexp(0.0, eta)))

        analytic = X.T @ (y - expit(X @ beta))
        h = 1e-5
        for j in range(len(beta)):
            e = np.zeros_like(beta)
            e[j] = h
            numeric = (loglik(beta + e) - loglik(beta - e)) / (2 * h)
            scale = max(1.0, abs(numeric))
            assert abs(analytic[j] - numeric) <= 1e-4 * scale
