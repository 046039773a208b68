import pathlib

import pytest

from crisk.dgp import InterventionSpec, canned_dgps, simulate_cohort

REPO_ROOT = pathlib.Path(__file__).resolve().parents[1]
PROSTATE_DATA = REPO_ROOT / "data" / "prostate_person_time.csv"
PROSTATE_CONFIG = REPO_ROOT / "configs" / "prostate.json"


@pytest.fixture(scope="session")
def dgps():
    return canned_dgps()


@pytest.fixture(scope="session")
def fig2_cohort(dgps):
    """A moderate observational cohort from the confounded model."""
    return simulate_cohort(dgps["figure2_dgp"], 4000, seed=101)


@pytest.fixture(scope="session")
def fig2_uncensored_cohort(dgps):
    """Same model with loss to follow-up eliminated in the simulation."""
    return simulate_cohort(dgps["figure2_dgp"], 4000, seed=102,
                           intervention=InterventionSpec(eliminate_censoring=True))


def require_prostate():
    if not PROSTATE_DATA.exists():
        pytest.skip(
            "prostate person-time data not present: this environment has no "
            "network access to download the public trial data; run "
            "scripts/prepare_prostate.py on the patient-level CSV to create "
            f"{PROSTATE_DATA}"
        )
