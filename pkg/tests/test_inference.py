import numpy as np
import pytest

from crisk.dgp import canned_dgps, simulate_cohort
from crisk.errors import BootstrapError, ConfigError, EstimationError
from crisk.inference import (BootstrapPlan, bootstrap_percentile_ci,
                             resample_cohort)


def _mean_treated(data):
    sizes = data.arm_sizes()
    return sizes.get(1, 0) / data.n_subjects


def test_plan_validation():
    with pytest.raises(ConfigError):
        BootstrapPlan(replicates=0)
    with pytest.raises(ConfigError):
        BootstrapPlan(percentiles=(97.5, 2.5))
    with pytest.raises(ConfigError):
        BootstrapPlan(resample_unit="record")


def test_resample_preserves_shape(fig2_cohort):
    rng = np.random.default_rng(0)
    sample = resample_cohort(fig2_cohort, rng)
    assert sample.n_subjects == fig2_cohort.n_subjects
    assert sample.k_max == fig2_cohort.k_max
    # duplicated subjects keep their full record sequences
    for sid, recs in sample.subjects.items():
        orig = sid.split("#")[0]
        assert len(recs) == len(fig2_cohort.subjects[orig])
        assert all(r.subject_id == sid for r in recs)


def test_fixed_seed_determinism(fig2_cohort):
    plan = BootstrapPlan(replicates=25, seed=7)
    one = bootstrap_percentile_ci(fig2_cohort, _mean_treated, plan)
    two = bootstrap_percentile_ci(fig2_cohort, _mean_treated, plan)
    assert np.array_equal(one.lower, two.lower)
    assert np.array_equal(one.upper, two.upper)
    other = bootstrap_percentile_ci(
        fig2_cohort, _mean_treated, BootstrapPlan(replicates=25, seed=8))
    assert not np.array_equal(one.lower, other.lower)


def test_parallel_matches_serial(fig2_cohort):
    plan = BootstrapPlan(replicates=16, seed=3)
    serial = bootstrap_percentile_ci(fig2_cohort, _mean_treated, plan, n_jobs=1)
    parallel = bootstrap_percentile_ci(fig2_cohort, _mean_treated, plan, n_jobs=2)
    assert np.array_equal(serial.lower, parallel.lower)
    assert np.array_equal(serial.upper, parallel.upper)


def test_interval_brackets_point_for_smooth_statistic(fig2_cohort):
    plan = BootstrapPlan(replicates=60, seed=11)
    result = bootstrap_percentile_ci(fig2_cohort, _mean_treated, plan)
    point, lower, upper = result.as_scalar()
    assert lower <= point <= upper
    assert result.n_failed_replicates == 0


def test_vector_statistic(fig2_cohort):
    def curve(data):
        sizes = data.arm_sizes()
        return np.array([sizes.get(0, 0), sizes.get(1, 0)], dtype=float)

    plan = BootstrapPlan(replicates=20, seed=2)
    result = bootstrap_percentile_ci(fig2_cohort, curve, plan)
    assert not result.scalar
    assert result.lower.shape == (2,)
    with pytest.raises(ConfigError):
        result.as_scalar()


class _FlakyStatistic:
    """Fails on a deterministic subset of replicates."""

    def __init__(self, fail_fraction):
        self.fail_fraction = fail_fraction

    def __call__(self, data):
        # hash the resampled ids so failure depends only on the draw
        share = sum(1 for sid in data.subjects if "#" in sid) / data.n_subjects
        if share > self.fail_fraction:
            raise EstimationError("synthetic failure")
        return float(data.arm_sizes().get(1, 0))


def test_failure_counting_and_abort(fig2_cohort):
    plan = BootstrapPlan(replicates=20, seed=5)
    # ~26% of subject ids are duplicates in a typical resample, so a cutoff
    # above that fails rarely and one below fails always
    tolerant = bootstrap_percentile_ci(fig2_cohort, _FlakyStatistic(0.5), plan)
    assert tolerant.n_failed_replicates == 0
    with pytest.raises(BootstrapError, match="bootstrap replicates failed"):
        bootstrap_percentile_ci(fig2_cohort, _FlakyStatistic(0.0), plan)
