"""Exception hierarchy for crisk.

Errors are grouped by the CLI exit code they map to:

* ``ConfigError`` -> exit code 2 (bad configuration / inadmissible request)
* ``DataError`` -> exit code 3 (unreadable, unparseable, or invalid data)
* ``NumericalError`` -> exit code 4 (fitting or estimation failure)
"""


class CriskError(Exception):
    """Base class for all crisk errors."""


class ConfigError(CriskError):
    """Invalid configuration or inadmissible estimand request."""


class DataError(CriskError):
    """Unreadable or malformed input data."""


class ParseError(DataError):
    """A cell failed to parse; carries row/column location in the message."""


class CohortValidationError(DataError):
    """A cohort violated the person-time invariants."""

    def __init__(self, violations):
        self.violations = list(violations)
        lines = "; ".join(str(v) for v in self.violations[:10])
        more = len(self.violations) - 10
        if more > 0:
            lines += f"; ... and {more} more"
        super().__init__(f"cohort validation failed: {lines}")


class NumericalError(CriskError):
    """Numerical failure during fitting or estimation."""


class SeparationError(NumericalError):
    """Detected (quasi-)complete separation during a logistic fit."""

    def __init__(self, column, coefficient):
        self.column = column
        self.coefficient = coefficient
        super().__init__(
            f"separation detected: coefficient for column {column!r} "
            f"diverged to {coefficient:.3f}"
        )


class ConvergenceError(NumericalError):
    """A model failed to converge and a converged model was required."""


class EstimationError(NumericalError):
    """Estimator failure, e.g. a zero weighted denominator with subjects at risk."""


class PositivityError(CriskError):
    """A conditioning event required by an identifying formula has probability 0."""

    def __init__(self, event):
        self.event = event
        super().__init__(f"positivity violation: conditioning event {event} has probability 0")


class BootstrapError(NumericalError):
    """Too many bootstrap replicates failed to produce estimates."""
