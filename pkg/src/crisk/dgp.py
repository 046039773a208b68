"""Small discrete structural causal models with exact enumeration.

A ``DiscreteDGP`` is a structural causal model over binary variables on a
short discrete time axis: baseline exogenous U, optional baseline covariate
L0, treatment A, and per interval t = 1..K+1 the cumulative indicators C_t
(lost by t), D_t (competing event by t), Y_t (event of interest by t), plus
optional time-varying covariates L_t for t <= K. Within interval t the
temporal order is (C_t, D_t, Y_t, L_t).

Structural tables give P(var = 1 | parents) for the free part of each
equation; deterministic constraints (absorbing C/D/Y, no event of interest
at an interval reached by the competing event, no loss to follow-up after
the competing event, covariates frozen after a terminal event, unobserved
indicators coded 0 after loss to follow-up) are applied on top and are not
part of the tables.

Interventions mutilate equations: set A, force C == 0, force D == 0. Joint
(cross-world) counterfactuals are defined through one exogenous uniform per
structural equation per subject, shared across interventions, which yields
the comonotone coupling used by ``enumerate_paired_law``.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field

import numpy as np

from .cohort import Cohort, CovariateSchema, PersonTimeRecord
from .errors import ConfigError, DataError, PositivityError

MAX_HORIZON = 4


@dataclass(frozen=True)
class StructuralTable:
    parents: tuple[str, ...]
    # parent-value tuple (aligned with parents) -> P(var = 1)
    probs: dict[tuple[int, ...], float]

    def prob(self, assign: dict) -> float:
        key = tuple(assign[p] for p in self.parents)
        return self.probs[key]


@dataclass(frozen=True)
class InterventionSpec:
    set_a: int | None = None
    eliminate_censoring: bool = False
    eliminate_competing: bool = False

    def __post_init__(self):
        if self.set_a is not None and self.set_a not in (0, 1):
            raise ConfigError("set_a must be 0, 1 or None")


OBSERVATIONAL = InterventionSpec()


def variable_order(horizon: int) -> list[str]:
    names = ["U", "L0", "A"]
    for t in range(1, horizon + 2):
        names += [f"C{t}", f"D{t}", f"Y{t}"]
        if t <= horizon:
            names.append(f"L{t}")
    return names


def _kind_time(name: str) -> tuple[str, int]:
    if name in ("U", "A"):
        return name, 0
    return name[0], int(name[1:])


@dataclass(frozen=True)
class DiscreteDGP:
    horizon: int
    tables: dict[str, StructuralTable]
    name: str = ""
    # true when, by construction, counterfactual event indicators are
    # independent of censoring AND competing-event processes given the
    # modeled covariates (identifies direct-effect quantities)
    full_exchangeability: bool = False
    # true when they are independent of the censoring process alone
    # (identifies total-effect quantities)
    censoring_exchangeability: bool = False

    def __post_init__(self):
        if not 0 <= self.horizon <= MAX_HORIZON:
            raise ConfigError(f"horizon must be in [0, {MAX_HORIZON}]")
        order = variable_order(self.horizon)
        position = {n: i for i, n in enumerate(order)}
        for name, table in self.tables.items():
            if name not in position:
                raise ConfigError(f"unknown variable {name!r} for horizon {self.horizon}")
            if name == "U":
                if table.parents:
                    raise ConfigError("U must be exogenous (no parents)")
            for parent in table.parents:
                if parent not in position or position[parent] >= position[name]:
                    raise ConfigError(f"{name}: parent {parent!r} does not precede it")
            n_parents = len(table.parents)
            expected = set(itertools.product((0, 1), repeat=n_parents))
            if set(table.probs) != expected:
                raise ConfigError(f"{name}: table must cover all {2 ** n_parents} parent combinations")
            for p in table.probs.values():
                if not 0.0 <= p <= 1.0:
                    raise ConfigError(f"{name}: probability {p} outside [0, 1]")
        if "A" not in self.tables:
            raise ConfigError("a table for A is required")
        for t in range(1, self.horizon + 2):
            if f"Y{t}" not in self.tables:
                raise ConfigError(f"a table for Y{t} is required")

    @property
    def observed_variables(self) -> tuple[str, ...]:
        return tuple(n for n in variable_order(self.horizon)
                     if n != "U" and (not n.startswith("L") or n in self.tables))

    @property
    def has_l0(self) -> bool:
        return "L0" in self.tables

    def l_names_through(self, k: int) -> list[str]:
        """Covariate variables measured by interval k (L0..Lk), present only."""
        return [n for n in self.observed_variables
                if n.startswith("L") and int(n[1:]) <= k]

    def prior_l(self, name: str) -> str | None:
        """The closest earlier L variable, used to freeze covariates."""
        t = int(name[1:])
        for s in range(t - 1, -1, -1):
            if f"L{s}" in self.tables:
                return f"L{s}"
        return None


def _forced_value(dgp: DiscreteDGP, name: str, assign: dict,
                  intervention: InterventionSpec) -> int | None:
    """Deterministic value for a variable, or None when its equation is free."""
    kind, t = _kind_time(name)
    if kind in ("U", "L") and t == 0:
        return None
    if kind == "A":
        return intervention.set_a
    prev = lambda base: assign.get(f"{base}{t - 1}", 0) if t > 1 else 0
    if kind == "C":
        if intervention.eliminate_censoring:
            return 0
        if prev("C") == 1:
            return 1  # absorbing
        if prev("D") == 1 or prev("Y") == 1:
            return 0  # no loss after a competing event; truncated after Y
        return None if name in dgp.tables else 0
    if kind == "D":
        if intervention.eliminate_competing:
            return 0
        if assign[f"C{t}"] == 1:
            return 0  # unobserved after loss, coded 0
        if prev("D") == 1:
            return 1  # absorbing
        if prev("Y") == 1:
            return 0
        return None if name in dgp.tables else 0
    if kind == "Y":
        if assign[f"C{t}"] == 1:
            return 0
        if prev("Y") == 1:
            return 1  # absorbing
        if assign[f"D{t}"] == 1:
            return 0  # competing event excludes the event of interest
        return None
    # L_t, t >= 1: frozen once any terminal indicator holds at t
    if assign[f"C{t}"] == 1 or assign[f"D{t}"] == 1 or assign[f"Y{t}"] == 1:
        prior = dgp.prior_l(name)
        return assign[prior] if prior is not None else 0
    return None if name in dgp.tables else 0


@dataclass
class LawTable:
    """Exact joint distribution over a tuple of named binary variables."""

    variables: tuple[str, ...]
    probs: dict[tuple[int, ...], float]

    def __post_init__(self):
        self._index = {n: i for i, n in enumerate(self.variables)}
        self._marginal_cache: dict = {}

    def total(self) -> float:
        return sum(self.probs.values())

    def marginal(self, given: dict) -> float:
        key = tuple(sorted(given.items()))
        cached = self._marginal_cache.get(key)
        if cached is not None:
            return cached
        idx = [(self._index[n], v) for n, v in given.items()]
        p = sum(prob for h, prob in self.probs.items()
                if all(h[i] == v for i, v in idx))
        self._marginal_cache[key] = p
        return p

    def cond(self, target: str, value: int, given: dict) -> float:
        den = self.marginal(given)
        if den <= 0.0:
            raise PositivityError(dict(given))
        num = self.marginal({**given, target: value})
        return num / den


def enumerate_law(dgp: DiscreteDGP, intervention: InterventionSpec = OBSERVATIONAL,
                  include_u: bool = False) -> LawTable:
    """Exact joint law over the (observed or full) history, summing to 1."""
    order = variable_order(dgp.horizon)
    states: list[tuple[dict, float]] = [({}, 1.0)]
    for name in order:
        if name[0] in ("U", "L") and name not in dgp.tables:
            continue
        new_states: list[tuple[dict, float]] = []
        for assign, prob in states:
            forced = _forced_value(dgp, name, assign, intervention)
            if forced is not None:
                new_states.append(({**assign, name: forced}, prob))
                continue
            p1 = dgp.tables[name].prob(assign)
            if p1 > 0.0:
                new_states.append(({**assign, name: 1}, prob * p1))
            if p1 < 1.0:
                new_states.append(({**assign, name: 0}, prob * (1.0 - p1)))
        states = new_states

    keep = [n for n in order if (include_u or n != "U") and n in states[0][0]]
    probs: dict[tuple[int, ...], float] = {}
    for assign, prob in states:
        key = tuple(assign[n] for n in keep)
        probs[key] = probs.get(key, 0.0) + prob
    return LawTable(tuple(keep), probs)


def enumerate_paired_law(dgp: DiscreteDGP, first: InterventionSpec,
                         second: InterventionSpec,
                         copy_d_to_second: bool = False) -> "PairedLaw":
    """Exact joint law of two counterfactual worlds under shared noise.

    Each structural equation is driven by one shared uniform, which yields
    the comonotone coupling: given parent histories with success
    probabilities p1 and p2, the pair (X1, X2) is (1,1) with min(p1, p2),
    (1,0) with max(p1-p2, 0), (0,1) with max(p2-p1, 0).

    With ``copy_d_to_second`` the second world's competing-event process is
    set to the first world's realized values (cross-world path intervention).
    """
    if first.set_a is None or second.set_a is None:
        raise ConfigError("paired enumeration requires set_a in both worlds")
    order = variable_order(dgp.horizon)
    states: list[tuple[dict, dict, float]] = [({}, {}, 1.0)]
    for name in order:
        if name[0] in ("U", "L") and name not in dgp.tables:
            continue
        new_states: list[tuple[dict, dict, float]] = []
        for a1, a2, prob in states:
            f1 = _forced_value(dgp, name, a1, first)
            f2 = _forced_value(dgp, name, a2, second)
            if copy_d_to_second and name.startswith("D"):
                # world 2's D is taken from world 1 regardless of its own rules
                f2 = "copy"
            p1 = None if f1 is not None else dgp.tables[name].prob(a1)
            if f2 == "copy":
                branches = []
                if f1 is not None:
                    branches.append((f1, f1, 1.0))
                else:
                    branches.append((1, 1, p1))
                    branches.append((0, 0, 1.0 - p1))
            else:
                p2 = None if f2 is not None else dgp.tables[name].prob(a2)
                branches = _couple(f1, p1, f2, p2, shared=_is_shared(name))
            for v1, v2, w in branches:
                if w <= 0.0:
                    continue
                new_states.append(({**a1, name: v1}, {**a2, name: v2}, prob * w))
        states = new_states
    keep = [n for n in order if n != "U" and n in states[0][0]]
    probs: dict[tuple[tuple[int, ...], tuple[int, ...]], float] = {}
    for a1, a2, prob in states:
        key = (tuple(a1[n] for n in keep), tuple(a2[n] for n in keep))
        probs[key] = probs.get(key, 0.0) + prob
    return PairedLaw(tuple(keep), probs)


def _is_shared(name: str) -> bool:
    # baseline variables take identical values in both worlds
    return name in ("U", "L0")


def _couple(f1, p1, f2, p2, shared: bool) -> list[tuple[int, int, float]]:
    if f1 is not None and f2 is not None:
        return [(f1, f2, 1.0)]
    if f1 is not None:
        return [(f1, 1, p2), (f1, 0, 1.0 - p2)]
    if f2 is not None:
        return [(1, f2, p1), (0, f2, 1.0 - p1)]
    if shared:
        # identical parents by construction; one shared draw
        return [(1, 1, p1), (0, 0, 1.0 - p1)]
    high = max(p1, p2)
    return [
        (1, 1, min(p1, p2)),
        (1, 0, max(p1 - p2, 0.0)),
        (0, 1, max(p2 - p1, 0.0)),
        (0, 0, 1.0 - high),
    ]


@dataclass
class PairedLaw:
    variables: tuple[str, ...]
    probs: dict[tuple[tuple[int, ...], tuple[int, ...]], float]

    def __post_init__(self):
        self._index = {n: i for i, n in enumerate(self.variables)}

    def marginal(self, given_first: dict, given_second: dict) -> float:
        i1 = [(self._index[n], v) for n, v in given_first.items()]
        i2 = [(self._index[n], v) for n, v in given_second.items()]
        return sum(
            prob for (h1, h2), prob in self.probs.items()
            if all(h1[i] == v for i, v in i1) and all(h2[i] == v for i, v in i2)
        )


def simulate(dgp: DiscreteDGP, n: int, seed: int,
             intervention: InterventionSpec = OBSERVATIONAL) -> dict[str, np.ndarray]:
    """Draw n i.i.d. subjects; returns one 0/1 array per variable."""
    if n < 1:
        raise ConfigError("n must be >= 1")
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed))
    values: dict[str, np.ndarray] = {}
    for name in variable_order(dgp.horizon):
        kind, t = _kind_time(name)
        in_tables = name in dgp.tables
        if kind in ("U",) and not in_tables:
            continue
        if kind == "L" and not in_tables:
            continue
        # one uniform per structural equation per subject, drawn even when
        # the value ends up forced, so noise indexing is intervention-free
        u = rng.random(n)
        if in_tables:
            table = dgp.tables[name]
            if table.parents:
                combo = np.zeros(n, dtype=np.int64)
                for parent in table.parents:
                    combo = combo * 2 + values[parent]
                lookup = np.empty(2 ** len(table.parents))
                for key, p in table.probs.items():
                    idx = 0
                    for bit in key:
                        idx = idx * 2 + bit
                    lookup[idx] = p
                p_vec = lookup[combo]
            else:
                p_vec = np.full(n, table.probs[()])
            x = (u < p_vec).astype(np.int8)
        else:
            x = np.zeros(n, dtype=np.int8)

        # deterministic overrides, vectorized to match _forced_value
        if kind == "A":
            if intervention.set_a is not None:
                x = np.full(n, intervention.set_a, dtype=np.int8)
        elif kind == "C":
            if intervention.eliminate_censoring:
                x = np.zeros(n, dtype=np.int8)
            else:
                prev_c = values.get(f"C{t - 1}", np.zeros(n, dtype=np.int8)) if t > 1 else np.zeros(n, dtype=np.int8)
                prev_d = values.get(f"D{t - 1}", np.zeros(n, dtype=np.int8)) if t > 1 else np.zeros(n, dtype=np.int8)
                prev_y = values.get(f"Y{t - 1}", np.zeros(n, dtype=np.int8)) if t > 1 else np.zeros(n, dtype=np.int8)
                x = np.where(prev_c == 1, 1, np.where((prev_d == 1) | (prev_y == 1), 0, x)).astype(np.int8)
        elif kind == "D":
            if intervention.eliminate_competing:
                x = np.zeros(n, dtype=np.int8)
            else:
                prev_d = values.get(f"D{t - 1}", np.zeros(n, dtype=np.int8)) if t > 1 else np.zeros(n, dtype=np.int8)
                prev_y = values.get(f"Y{t - 1}", np.zeros(n, dtype=np.int8)) if t > 1 else np.zeros(n, dtype=np.int8)
                x = np.where(values[f"C{t}"] == 1, 0,
                             np.where(prev_d == 1, 1, np.where(prev_y == 1, 0, x))).astype(np.int8)
        elif kind == "Y":
            prev_y = values.get(f"Y{t - 1}", np.zeros(n, dtype=np.int8)) if t > 1 else np.zeros(n, dtype=np.int8)
            x = np.where(values[f"C{t}"] == 1, 0,
                         np.where(prev_y == 1, 1,
                                  np.where(values[f"D{t}"] == 1, 0, x))).astype(np.int8)
        elif kind == "L" and t >= 1:
            prior = dgp.prior_l(name)
            frozen = (values[f"C{t}"] == 1) | (values[f"D{t}"] == 1) | (values[f"Y{t}"] == 1)
            carry = values[prior] if prior is not None else np.zeros(n, dtype=np.int8)
            x = np.where(frozen, carry, x).astype(np.int8)
        values[name] = x
    return values


def simulate_cohort(dgp: DiscreteDGP, n: int, seed: int,
                    intervention: InterventionSpec = OBSERVATIONAL) -> Cohort:
    """Simulate and emit truncated person-time records (one row per subject
    per interval at risk). Only the baseline covariate L0 is exported."""
    values = simulate(dgp, n, seed, intervention)
    K = dgp.horizon
    has_l0 = dgp.has_l0
    schema = CovariateSchema(("l0",), {"l0": (0.0, 1.0)}) if has_l0 else CovariateSchema(())
    width = len(str(n - 1)) if n > 1 else 1

    a = values["A"]
    l0 = values["L0"] if has_l0 else None
    c = np.stack([values[f"C{t}"] for t in range(1, K + 2)])
    d = np.stack([values[f"D{t}"] for t in range(1, K + 2)])
    y = np.stack([values[f"Y{t}"] for t in range(1, K + 2)])
    # new-event indicator at interval k (next-interval columns of record k)
    c_new = np.vstack([c[0:1], np.maximum(c[1:] - c[:-1], 0)])
    d_new = np.vstack([d[0:1], np.maximum(d[1:] - d[:-1], 0)])
    y_new = np.vstack([y[0:1], np.maximum(y[1:] - y[:-1], 0)])
    terminal = np.maximum.reduce([c, d, y])  # terminal by t (index k = t-1)

    subjects: dict[str, tuple[PersonTimeRecord, ...]] = {}
    for i in range(n):
        sid = f"s{i:0{width}d}"
        cov = (float(l0[i]),) if has_l0 else ()
        records = []
        for k in range(K + 1):
            records.append(PersonTimeRecord(
                subject_id=sid, k=k, a=int(a[i]), l0=cov,
                c_next=int(c_new[k, i]), d_next=int(d_new[k, i]), y_next=int(y_new[k, i]),
            ))
            if terminal[k, i]:
                break
        subjects[sid] = tuple(records)
    return Cohort(subjects=subjects, k_max=K, covariate_schema=schema)


def simulate_marginals(dgp: DiscreteDGP, n: int, seed: int,
                       intervention: InterventionSpec = OBSERVATIONAL) -> dict[str, float]:
    """Empirical P(var = 1) per variable from an n-subject simulation."""
    values = simulate(dgp, n, seed, intervention)
    return {name: float(np.mean(vec)) for name, vec in values.items()}


def dgp_to_json(dgp: DiscreteDGP) -> str:
    obj = {
        "name": dgp.name,
        "horizon": dgp.horizon,
        "full_exchangeability": dgp.full_exchangeability,
        "censoring_exchangeability": dgp.censoring_exchangeability,
        "variables": [
            {
                "name": name,
                "parents": list(table.parents),
                "table": {",".join(map(str, key)): prob for key, prob in sorted(table.probs.items())},
            }
            for name, table in dgp.tables.items()
        ],
    }
    return json.dumps(obj, indent=2, sort_keys=True)


def dgp_from_json(text: str) -> DiscreteDGP:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DataError(f"invalid DGP JSON: {exc}") from exc
    try:
        tables = {}
        for var in obj["variables"]:
            parents = tuple(var.get("parents", []))
            probs = {}
            for key, prob in var["table"].items():
                values = tuple(int(v) for v in key.split(",")) if key else ()
                probs[values] = float(prob)
            tables[var["name"]] = StructuralTable(parents, probs)
        return DiscreteDGP(
            horizon=int(obj["horizon"]),
            tables=tables,
            name=str(obj.get("name", "")),
            full_exchangeability=bool(obj.get("full_exchangeability", False)),
            censoring_exchangeability=bool(obj.get("censoring_exchangeability", False)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed DGP specification: {exc}") from exc


def _const(p: float) -> StructuralTable:
    return StructuralTable((), {(): p})


def _table(parents: tuple[str, ...], mapping: dict) -> StructuralTable:
    return StructuralTable(parents, {k: float(v) for k, v in mapping.items()})


def canned_dgps() -> dict[str, DiscreteDGP]:
    """Fixed, documented models used by the verification suite."""
    dgps = {}

    # Randomized treatment; an unmeasured baseline factor U raises the event
    # hazard but touches neither the competing event nor loss to follow-up,
    # so all counterfactual risks (direct and total) are identified.
    y_fig1 = _table(("A", "U"), {(0, 0): 0.06, (0, 1): 0.22, (1, 0): 0.10, (1, 1): 0.26})
    dgps["figure1_dgp"] = DiscreteDGP(
        horizon=2,
        name="figure1_dgp",
        full_exchangeability=True,
        censoring_exchangeability=True,
        tables={
            "U": _const(0.5),
            "A": _const(0.5),
            **{f"C{t}": _table(("A",), {(0,): 0.06, (1,): 0.10}) for t in (1, 2, 3)},
            **{f"D{t}": _table(("A",), {(0,): 0.08, (1,): 0.15}) for t in (1, 2, 3)},
            **{f"Y{t}": y_fig1 for t in (1, 2, 3)},
        },
    )

    # Same as figure1_dgp but U also raises the competing-event hazard, so
    # quantities that treat the competing event as a censoring event (the
    # direct-effect family) are no longer identified, while total-effect
    # quantities still are (loss to follow-up depends on A only).
    y_fig2 = _table(("A", "U"), {(0, 0): 0.04, (0, 1): 0.30, (1, 0): 0.08, (1, 1): 0.34})
    d_fig2 = _table(("A", "U"), {(0, 0): 0.04, (0, 1): 0.30, (1, 0): 0.10, (1, 1): 0.36})
    dgps["figure2_dgp"] = DiscreteDGP(
        horizon=2,
        name="figure2_dgp",
        full_exchangeability=False,
        censoring_exchangeability=True,
        tables={
            "U": _const(0.5),
            "A": _const(0.5),
            **{f"C{t}": _table(("A",), {(0,): 0.06, (1,): 0.10}) for t in (1, 2, 3)},
            **{f"D{t}": d_fig2 for t in (1, 2, 3)},
            **{f"Y{t}": y_fig2 for t in (1, 2, 3)},
        },
    )

    # No competing events and no losses; treatment strongly protects against
    # the event in interval 1, while the second-interval structural equation
    # does not depend on treatment at all given (U, Y_1). The counterfactual
    # hazard contrast at k+1 = 2 is nevertheless non-null, because the
    # treated survivors of interval 1 are enriched for high-risk U.
    dgps["hazard_paradox_dgp"] = DiscreteDGP(
        horizon=1,
        name="hazard_paradox_dgp",
        full_exchangeability=True,
        censoring_exchangeability=True,
        tables={
            "U": _const(0.5),
            "A": _const(0.5),
            "Y1": _table(("A", "U"), {(0, 0): 0.05, (0, 1): 0.60, (1, 0): 0.01, (1, 1): 0.12}),
            "Y2": _table(("U",), {(0,): 0.05, (1,): 0.60}),
        },
    )

    # Treatment kills everyone immediately through the competing event, so
    # the event of interest can never occur under a=1: the total effect on
    # the event of interest is protective only through that pathway.
    dgps["section6_extreme_dgp"] = DiscreteDGP(
        horizon=1,
        name="section6_extreme_dgp",
        full_exchangeability=True,
        censoring_exchangeability=True,
        tables={
            "A": _const(0.5),
            "D1": _table(("A",), {(0,): 0.0, (1,): 1.0}),
            "D2": _table(("A",), {(0,): 0.0, (1,): 1.0}),
            "Y1": _table(("A",), {(0,): 0.30, (1,): 0.30}),
            "Y2": _table(("A",), {(0,): 0.30, (1,): 0.30}),
        },
    )
    return dgps


def random_dgp(seed: int, horizon: int | None = None,
               allow_confounding: bool = True) -> DiscreteDGP:
    """A random positivity-respecting DGP for identity checking.

    All free probabilities live in [0.1, 0.9], so every conditioning event
    reachable under the deterministic rules has positive probability.
    """
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed))
    K = int(rng.integers(0, 4)) if horizon is None else horizon
    if not 0 <= K <= MAX_HORIZON:
        raise ConfigError(f"horizon must be in [0, {MAX_HORIZON}]")
    with_u = bool(rng.random() < 0.7)
    with_l0 = bool(rng.random() < 0.6)
    with_lk = bool(rng.random() < 0.4) and K >= 1 and K <= 2
    u_in_cd = allow_confounding and with_u and bool(rng.random() < 0.5)

    def p():
        return float(np.round(rng.uniform(0.1, 0.9), 6))

    def rand_table(parents: tuple[str, ...]) -> StructuralTable:
        return StructuralTable(
            tuple(parents),
            {key: p() for key in itertools.product((0, 1), repeat=len(parents))},
        )

    tables: dict[str, StructuralTable] = {}
    if with_u:
        tables["U"] = _const(p())
    if with_l0:
        parents = ("U",) if with_u and rng.random() < 0.5 else ()
        tables["L0"] = rand_table(parents)
    # treatment is randomized: the baseline covariate density in the
    # g-formulas is marginal, which matches the IPW expectations
    # (conditional on A=a) only when A is independent of L0
    tables["A"] = rand_table(())

    base = (("L0",) if with_l0 else ()) + ("A",)
    for t in range(1, K + 2):
        lk_parent = tuple(
            n for n in (f"L{t - 1}",) if t >= 2 and n in tables
        )
        cd_extra = (("U",) if u_in_cd else ()) + lk_parent
        tables[f"C{t}"] = rand_table(base + (lk_parent if rng.random() < 0.7 else ()))
        tables[f"D{t}"] = rand_table(base + cd_extra)
        y_extra = (("U",) if with_u else ()) + lk_parent
        tables[f"Y{t}"] = rand_table(base + y_extra)
        if with_lk and t <= K:
            tables[f"L{t}"] = rand_table(base + lk_parent)

    return DiscreteDGP(
        horizon=K,
        tables=tables,
        name=f"random_dgp_{seed}",
        # U never enters C or L equations, so censoring exchangeability holds
        # by construction; the direct-effect family is identified only when U
        # also stays out of the competing-event equations.
        full_exchangeability=not u_in_cd,
        censoring_exchangeability=True,
    )
