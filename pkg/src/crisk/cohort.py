"""Person-time cohort ingestion, validation, and risk-set expansion.

Observed data are long-format person-time records. Each record carries the
interval index ``k`` and next-interval indicators ``c_next`` (loss to
follow-up by ``k+1``), ``d_next`` (competing event by ``k+1``) and ``y_next``
(event of interest by ``k+1``), with the temporal ordering (C, D, Y) within
an interval. Indicators after a terminal one are coded 0 in-file; the
terminal indicator marks them non-informative.

A ``Cohort`` truncates each subject at the first terminal indicator. An
``ExpandedCohort`` retains subjects after a competing-event failure through
the administrative horizon, which is the risk-set convention needed by
subdistribution-hazard estimation.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace

from .errors import CohortValidationError, DataError, ParseError

ID_COLUMNS = ("subject_id", "k", "a")
OUTCOME_COLUMNS = ("c_next", "d_next", "y_next")


@dataclass(frozen=True)
class CovariateSchema:
    """Names and admissible levels of the baseline covariates.

    ``levels[name]`` is a tuple of admissible numeric codes, or None for a
    continuous covariate (any finite value accepted).
    """

    names: tuple[str, ...]
    levels: dict[str, tuple[float, ...] | None] = field(default_factory=dict)

    def __post_init__(self):
        for name in self.levels:
            if name not in self.names:
                raise DataError(f"schema levels given for unknown covariate {name!r}")

    def check_value(self, name: str, value: float) -> str | None:
        """Return a violation message for an inadmissible value, else None."""
        admissible = self.levels.get(name)
        if admissible is not None and value not in admissible:
            return f"covariate {name!r} value {value!r} not in declared levels {admissible}"
        return None


@dataclass(frozen=True, slots=True)
class PersonTimeRecord:
    subject_id: str
    k: int
    a: int
    l0: tuple[float, ...]
    c_next: int
    d_next: int
    y_next: int
    # True on records of an ExpandedCohort that fall after the subject's
    # (non-primary) competing-event failure. Always False in a plain Cohort.
    post_competing: bool = False

    @property
    def terminal(self) -> bool:
        return bool(self.c_next or self.d_next or self.y_next)


@dataclass(frozen=True)
class Cohort:
    subjects: dict[str, tuple[PersonTimeRecord, ...]]
    k_max: int
    covariate_schema: CovariateSchema

    @property
    def n_subjects(self) -> int:
        return len(self.subjects)

    def subject_ids(self) -> list[str]:
        return list(self.subjects)

    def iter_records(self):
        for records in self.subjects.values():
            yield from records

    def n_records(self) -> int:
        return sum(len(r) for r in self.subjects.values())

    def arm_of(self, subject_id: str) -> int:
        return self.subjects[subject_id][0].a

    def arm_sizes(self) -> dict[int, int]:
        sizes: dict[int, int] = {}
        for records in self.subjects.values():
            sizes[records[0].a] = sizes.get(records[0].a, 0) + 1
        return sizes

    def baseline(self) -> list[tuple[str, int, tuple[float, ...]]]:
        """(subject_id, a, l0) per subject, in cohort order."""
        return [(sid, recs[0].a, recs[0].l0) for sid, recs in self.subjects.items()]


@dataclass(frozen=True)
class ExpandedCohort(Cohort):
    primary_event_role: str = "event_of_interest"


@dataclass(frozen=True)
class Violation:
    subject_id: str | None
    k: int | None
    message: str

    def __str__(self):
        where = ""
        if self.subject_id is not None:
            where = f"subject {self.subject_id}"
            if self.k is not None:
                where += f", interval {self.k}"
            where += ": "
        return where + self.message


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...]
    # arm -> dict with event/competing/censored counts
    event_counts: dict[int, dict[str, int]]

    @property
    def valid(self) -> bool:
        return not self.violations


def _parse_cell(text: str, row_num: int, column: str, as_int: bool):
    text = text.strip()
    if text == "":
        raise ParseError(f"row {row_num}, column {column!r}: missing value")
    try:
        return int(text) if as_int else float(text)
    except ValueError as exc:
        raise ParseError(f"row {row_num}, column {column!r}: cannot parse {text!r}") from exc


def load_person_time(source, schema: CovariateSchema, k_max: int | None = None) -> Cohort:
    """Load a person-time CSV into a validated Cohort.

    ``source`` is a path, a text file object, or a CSV string. The header
    must name exactly the columns subject_id, k, a, the schema covariates,
    c_next, d_next and y_next (any order). K is inferred as the maximum k
    unless ``k_max`` is given.
    """
    if hasattr(source, "read"):
        text = source.read()
    else:
        source = str(source)
        if "\n" in source or "," in source:
            text = source
        else:
            try:
                with open(source, "r", encoding="utf-8") as fh:
                    text = fh.read()
            except OSError as exc:
                raise DataError(f"cannot read {source!r}: {exc}") from exc

    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty input: no header row") from None
    header = [h.strip() for h in header]

    expected = set(ID_COLUMNS) | set(schema.names) | set(OUTCOME_COLUMNS)
    missing = expected - set(header)
    extra = set(header) - expected
    if missing:
        raise ParseError(f"missing columns: {sorted(missing)}")
    if extra:
        raise ParseError(f"unexpected columns: {sorted(extra)}")
    if len(header) != len(set(header)):
        raise ParseError("duplicate column names in header")
    col = {name: header.index(name) for name in header}

    subjects: dict[str, list[PersonTimeRecord]] = {}
    for row_num, row in enumerate(reader, start=2):
        if not row or all(cell.strip() == "" for cell in row):
            continue
        if len(row) != len(header):
            raise ParseError(f"row {row_num}: expected {len(header)} cells, got {len(row)}")
        sid = row[col["subject_id"]].strip()
        if sid == "":
            raise ParseError(f"row {row_num}, column 'subject_id': missing value")
        record = PersonTimeRecord(
            subject_id=sid,
            k=_parse_cell(row[col["k"]], row_num, "k", as_int=True),
            a=_parse_cell(row[col["a"]], row_num, "a", as_int=True),
            l0=tuple(
                _parse_cell(row[col[name]], row_num, name, as_int=False)
                for name in schema.names
            ),
            c_next=_parse_cell(row[col["c_next"]], row_num, "c_next", as_int=True),
            d_next=_parse_cell(row[col["d_next"]], row_num, "d_next", as_int=True),
            y_next=_parse_cell(row[col["y_next"]], row_num, "y_next", as_int=True),
        )
        subjects.setdefault(sid, []).append(record)

    if not subjects:
        raise DataError("no data rows")
    for sid, records in subjects.items():
        records.sort(key=lambda r: r.k)
    inferred_k = max(r.k for recs in subjects.values() for r in recs)
    horizon = inferred_k if k_max is None else k_max
    cohort = Cohort(
        subjects={sid: tuple(recs) for sid, recs in subjects.items()},
        k_max=horizon,
        covariate_schema=schema,
    )
    report = validate_cohort(cohort)
    if not report.valid:
        raise CohortValidationError(report.violations)
    return cohort


def serialize_cohort(cohort: Cohort) -> str:
    """Write the cohort back to the canonical CSV form."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    names = cohort.covariate_schema.names
    writer.writerow(list(ID_COLUMNS[:2]) + ["a"] + list(names) + list(OUTCOME_COLUMNS))
    for record in cohort.iter_records():
        writer.writerow(
            [record.subject_id, record.k, record.a]
            + [_format_number(v) for v in record.l0]
            + [record.c_next, record.d_next, record.y_next]
        )
    return out.getvalue()


def _format_number(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(v)


def validate_cohort(cohort: Cohort) -> ValidationReport:
    """Check all person-time invariants; report-valued, never raises."""
    violations: list[Violation] = []
    counts: dict[int, dict[str, int]] = {}
    expanded = isinstance(cohort, ExpandedCohort)
    schema = cohort.covariate_schema

    for sid, records in cohort.subjects.items():
        first = records[0]
        if first.k != 0:
            violations.append(Violation(sid, first.k, "no record at interval 0"))
        for i, rec in enumerate(records):
            if rec.k != first.k + i:
                violations.append(Violation(sid, rec.k, "non-contiguous intervals"))
                break
        for rec in records:
            if rec.a not in (0, 1):
                violations.append(Violation(sid, rec.k, f"treatment a={rec.a} not in {{0,1}}"))
            for ind_name in OUTCOME_COLUMNS:
                value = getattr(rec, ind_name)
                if value not in (0, 1):
                    violations.append(
                        Violation(sid, rec.k, f"indicator {ind_name}={value} not in {{0,1}}")
                    )
            if rec.c_next and (rec.d_next or rec.y_next):
                violations.append(
                    Violation(sid, rec.k, "c_next=1 requires d_next=0 and y_next=0")
                )
            elif rec.d_next and rec.y_next:
                violations.append(Violation(sid, rec.k, "d_next=1 requires y_next=0"))
            if rec.a != first.a:
                violations.append(Violation(sid, rec.k, "treatment varies across records"))
            if rec.l0 != first.l0:
                violations.append(Violation(sid, rec.k, "baseline covariates vary across records"))
            if rec.k > cohort.k_max:
                violations.append(Violation(sid, rec.k, f"interval exceeds K={cohort.k_max}"))
            if len(rec.l0) != len(schema.names):
                violations.append(
                    Violation(sid, rec.k, f"expected {len(schema.names)} covariates, got {len(rec.l0)}")
                )
            else:
                for name, value in zip(schema.names, rec.l0):
                    message = schema.check_value(name, value)
                    if message:
                        violations.append(Violation(sid, rec.k, message))

        # terminality: nothing may follow a terminal record, except the
        # post-competing extension records of an ExpandedCohort
        terminal_seen = None
        for rec in records:
            if terminal_seen is not None:
                allowed = expanded and terminal_seen == "d_next" and rec.post_competing
                if allowed:
                    if rec.c_next:
                        violations.append(Violation(sid, rec.k, "censoring after competing event"))
                    if rec.y_next:
                        violations.append(
                            Violation(sid, rec.k, "primary event after competing event")
                        )
                else:
                    if terminal_seen == "d_next" and rec.c_next:
                        violations.append(Violation(sid, rec.k, "censoring after competing event"))
                    else:
                        violations.append(
                            Violation(sid, rec.k, f"record after terminal indicator {terminal_seen}")
                        )
                continue
            if rec.post_competing and not expanded:
                violations.append(Violation(sid, rec.k, "post-competing record outside ExpandedCohort"))
            if rec.terminal:
                for ind_name in OUTCOME_COLUMNS:
                    if getattr(rec, ind_name):
                        terminal_seen = ind_name
                        break
        last = records[-1]
        if terminal_seen is None and last.k != cohort.k_max:
            violations.append(
                Violation(sid, last.k, f"subject ends at {last.k} without event, K={cohort.k_max}")
            )
        if expanded and terminal_seen == "d_next" and last.k != cohort.k_max:
            if not (last.c_next or last.y_next):
                violations.append(
                    Violation(sid, last.k, "competing-event failure not extended to K")
                )

        arm = first.a
        counts.setdefault(arm, {"event": 0, "competing": 0, "censored": 0})
        for rec in records:
            if rec.y_next and not rec.post_competing:
                counts[arm]["event"] += 1
            if rec.d_next:
                counts[arm]["competing"] += 1
            if rec.c_next:
                counts[arm]["censored"] += 1

    return ValidationReport(violations=tuple(violations), event_counts=counts)


def expand_risk_sets(cohort: Cohort, role: str = "event_of_interest") -> ExpandedCohort:
    """Retain subjects after the non-primary event through K.

    With ``role="event_of_interest"`` the event of interest stays primary
    and competing-event failures get zero-outcome records through K. With
    ``role="competing_event"`` the two event columns swap meaning first, so
    the competing event becomes primary.
    """
    if role not in ("event_of_interest", "competing_event"):
        raise DataError(f"unknown primary event role {role!r}")
    report = validate_cohort(cohort)
    if not report.valid:
        raise CohortValidationError(report.violations)

    already = isinstance(cohort, ExpandedCohort)
    if already and cohort.primary_event_role != role:
        raise DataError("cannot re-expand an ExpandedCohort under a different role")
    # columns of an already-expanded cohort reflect the requested role
    swap = role == "competing_event" and not already

    subjects: dict[str, tuple[PersonTimeRecord, ...]] = {}
    for sid, records in cohort.subjects.items():
        new_records = []
        competing_at = None
        for rec in records:
            if swap:
                rec = replace(rec, d_next=rec.y_next, y_next=rec.d_next)
            if rec.d_next and not rec.post_competing:
                competing_at = rec.k
            new_records.append(rec)
        if competing_at is not None and new_records[-1].k < cohort.k_max:
            base = new_records[0]
            for k in range(new_records[-1].k + 1, cohort.k_max + 1):
                new_records.append(
                    PersonTimeRecord(
                        subject_id=sid, k=k, a=base.a, l0=base.l0,
                        c_next=0, d_next=0, y_next=0, post_competing=True,
                    )
                )
        subjects[sid] = tuple(new_records)

    return ExpandedCohort(
        subjects=subjects,
        k_max=cohort.k_max,
        covariate_schema=cohort.covariate_schema,
        primary_event_role=role,
    )
