"""crisk: causal risk estimation for failure-time outcomes with competing
events and loss to follow-up on a discrete time axis.

Main entry points:

* :func:`crisk.cohort.load_person_time` and :class:`crisk.cohort.Cohort`
* :func:`crisk.hazards.fit_pooled_logistic`
* :func:`crisk.estimators.estimate_risk_gformula` / ``estimate_risk_ipw``
* :func:`crisk.inference.bootstrap_percentile_ci`
* :func:`crisk.oracle.verify_identities` for exact checks on small models
* :func:`crisk.pipeline.run_pipeline` / the ``crisk`` command line
"""

from .cohort import (Cohort, CovariateSchema, ExpandedCohort, PersonTimeRecord,
                     ValidationReport, expand_risk_sets, load_person_time,
                     serialize_cohort, validate_cohort)
from .dgp import (DiscreteDGP, InterventionSpec, StructuralTable, canned_dgps,
                  dgp_from_json, dgp_to_json, enumerate_law,
                  enumerate_paired_law, random_dgp, simulate, simulate_cohort)
from .errors import (BootstrapError, CohortValidationError, ConfigError,
                     ConvergenceError, CriskError, DataError, EstimationError,
                     NumericalError, ParseError, PositivityError,
                     SeparationError)
from .estimators import (EffectEstimate, EstimandSpec, RiskCurve,
                         effect_contrast, estimate_risk_gformula,
                         estimate_risk_ipw, nonparametric_cumulative)
from .hazards import (CovariateTerm, DesignSpec, FittedHazardModel,
                      fit_pooled_logistic, positivity_report, predict_hazard_matrix)
from .oracle import (IdentityReport, exact_identifying_functional,
                     true_estimand, verify_identities)

__version__ = "0.1.0"

__all__ = [
    "Cohort", "CovariateSchema", "ExpandedCohort", "PersonTimeRecord",
    "ValidationReport", "expand_risk_sets", "load_person_time",
    "serialize_cohort", "validate_cohort",
    "DiscreteDGP", "InterventionSpec", "StructuralTable", "canned_dgps",
    "dgp_from_json", "dgp_to_json", "enumerate_law", "enumerate_paired_law",
    "random_dgp", "simulate", "simulate_cohort",
    "BootstrapError", "CohortValidationError", "ConfigError",
    "ConvergenceError", "CriskError", "DataError", "EstimationError",
    "NumericalError", "ParseError", "PositivityError", "SeparationError",
    "EffectEstimate", "EstimandSpec", "RiskCurve", "effect_contrast",
    "estimate_risk_gformula", "estimate_risk_ipw", "nonparametric_cumulative",
    "CovariateTerm", "DesignSpec", "FittedHazardModel", "fit_pooled_logistic",
    "positivity_report", "predict_hazard_matrix",
    "IdentityReport", "exact_identifying_functional", "true_estimand",
    "verify_identities",
    "__version__",
]
