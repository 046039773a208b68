import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crisk.cohort import (Cohort, CovariateSchema, ExpandedCohort,
                          PersonTimeRecord, expand_risk_sets,
                          load_person_time, serialize_cohort, validate_cohort)
from crisk.errors import CohortValidationError, DataError, ParseError

SCHEMA = CovariateSchema(("l0",), {"l0": (0.0, 1.0)})

CSV_OK = """subject_id,k,a,l0,c_next,d_next,y_next
s1,0,1,0,0,0,0
s1,1,1,0,0,0,1
s2,0,0,1,0,1,0
s3,0,1,1,0,0,0
s3,1,1,1,0,0,0
"""


def test_load_basic():
    cohort = load_person_time(CSV_OK, SCHEMA)
    assert cohort.n_subjects == 3
    assert cohort.k_max == 1
    assert cohort.arm_of("s2") == 0
    assert cohort.subjects["s1"][1].y_next == 1
    assert cohort.subjects["s3"][0].l0 == (1.0,)


def test_load_header_order_free():
    shuffled = ("y_next,l0,subject_id,c_next,a,d_next,k\n"
                "0,0,s1,0,1,0,0\n"
                "1,0,s1,0,1,0,1\n")
    cohort = load_person_time(shuffled, SCHEMA)
    assert cohort.subjects["s1"][1].y_next == 1


def test_load_missing_column():
    bad = CSV_OK.replace("y_next", "y_other")
    with pytest.raises(ParseError, match="missing columns"):
        load_person_time(bad, SCHEMA)
    extra = (CSV_OK.replace("subject_id,k", "subject_id,extra,k")
             .replace("s1,0,", "s1,x,0,"))
    with pytest.raises(ParseError, match="unexpected columns"):
        load_person_time(extra, SCHEMA)


def test_parse_error_location():
    bad = CSV_OK.replace("s2,0,0,1,0,1,0", "s2,zero,0,1,0,1,0")
    with pytest.raises(ParseError, match=r"row 4, column 'k'"):
        load_person_time(bad, SCHEMA)


def test_round_trip():
    cohort = load_person_time(CSV_OK, SCHEMA)
    text = serialize_cohort(cohort)
    again = load_person_time(text, SCHEMA)
    assert again.subjects == cohort.subjects


def test_validation_censoring_after_competing():
    recs = (
        PersonTimeRecord("s1", 0, 1, (), 0, 1, 0),
        PersonTimeRecord("s1", 1, 1, (), 1, 0, 0),
    )
    cohort = Cohort({"s1": recs}, k_max=1, covariate_schema=CovariateSchema(()))
    report = validate_cohort(cohort)
    assert not report.valid
    assert any("censoring after competing event" in str(v) for v in report.violations)


def test_validation_exclusivity_and_gaps():
    bad = ("subject_id,k,a,l0,c_next,d_next,y_next\n"
           "s1,0,1,0,1,1,0\n")
    with pytest.raises(CohortValidationError, match="c_next=1 requires"):
        load_person_time(bad, SCHEMA)
    gap = ("subject_id,k,a,l0,c_next,d_next,y_next\n"
           "s1,0,1,0,0,0,0\n"
           "s1,2,1,0,0,0,1\n")
    with pytest.raises(CohortValidationError, match="non-contiguous"):
        load_person_time(gap, SCHEMA)


def test_validation_early_stop_without_event():
    bad = ("subject_id,k,a,l0,c_next,d_next,y_next\n"
           "s1,0,1,0,0,0,0\n"
           "s2,0,1,0,0,0,0\n"
           "s2,1,1,0,0,0,1\n")
    with pytest.raises(CohortValidationError, match="ends at 0 without event"):
        load_person_time(bad, SCHEMA)


def test_validation_covariate_levels():
    bad = CSV_OK.replace("s2,0,0,1,", "s2,0,0,3,")
    with pytest.raises(CohortValidationError, match="not in declared levels"):
        load_person_time(bad, SCHEMA)


def test_event_counts_per_arm():
    cohort = load_person_time(CSV_OK, SCHEMA)
    report = validate_cohort(cohort)
    assert report.valid
    assert report.event_counts[1] == {"event": 1, "competing": 0, "censored": 0}
    assert report.event_counts[0] == {"event": 0, "competing": 1, "censored": 0}


def test_expand_event_of_interest():
    cohort = load_person_time(CSV_OK, SCHEMA)
    expanded = expand_risk_sets(cohort, "event_of_interest")
    assert isinstance(expanded, ExpandedCohort)
    # s2 failed from the competing event at k=0 and gets records through K
    recs = expanded.subjects["s2"]
    assert len(recs) == 2
    assert recs[1].post_competing and recs[1].k == 1
    assert (recs[1].c_next, recs[1].d_next, recs[1].y_next) == (0, 0, 0)
    # record count identity: data-set-1 count plus the extension records
    extension = sum(
        cohort.k_max - max(r.k for r in recs)
        for recs in cohort.subjects.values()
        if any(r.d_next for r in recs)
    )
    assert expanded.n_records() == cohort.n_records() + extension
    assert validate_cohort(expanded).valid


def test_expand_role_swap():
    cohort = load_person_time(CSV_OK, SCHEMA)
    swapped = expand_risk_sets(cohort, "competing_event")
    # s2's competing event becomes the primary event: terminal, no extension
    assert swapped.subjects["s2"][0].y_next == 1
    assert len(swapped.subjects["s2"]) == 1
    # s1's primary event becomes the competing event: extended through K
    assert swapped.subjects["s1"][1].d_next == 1


def test_expand_idempotent_and_role_conflict():
    cohort = load_person_time(CSV_OK, SCHEMA)
    expanded = expand_risk_sets(cohort, "event_of_interest")
    again = expand_risk_sets(expanded, "event_of_interest")
    assert again.subjects == expanded.subjects
    with pytest.raises(DataError, match="different role"):
        expand_risk_sets(expanded, "competing_event")


@st.composite
def cohort_texts(draw):
    """Small random valid cohorts as CSV text."""
    k_max = draw(st.integers(0, 3))
    n = draw(st.integers(1, 6))
    lines = ["subject_id,k,a,l0,c_next,d_next,y_next"]
    for i in range(n):
        a = draw(st.integers(0, 1))
        l0 = draw(st.integers(0, 1))
        fate_k = draw(st.integers(0, k_max))
        fate = draw(st.sampled_from(["none", "c", "d", "y"]))
        last = k_max if fate == "none" else fate_k
        for k in range(last + 1):
            terminal = fate != "none" and k == last
            c = int(terminal and fate == "c")
            d = int(terminal and fate == "d")
            y = int(terminal and fate == "y")
            lines.append(f"s{i},{k},{a},{l0},{c},{d},{y}")
    return "\n".join(lines) + "\n", k_max


@given(cohort_texts())
@settings(max_examples=40, deadline=None)
def test_property_round_trip_and_expansion(data):
    text, k_max = data
    cohort = load_person_time(text, SCHEMA, k_max=k_max)
    assert validate_cohort(cohort).valid
    assert load_person_time(serialize_cohort(cohort), SCHEMA, k_max=k_max).subjects \
        == cohort.subjects
    expanded = expand_risk_sets(cohort, "event_of_interest")
    assert validate_cohort(expanded).valid
    # every extension record is zero-outcome and flagged
    for recs in expanded.subjects.values():
        for r in recs:
            if r.post_competing:
                assert (r.c_next, r.d_next, r.y_next) == (0, 0, 0)
