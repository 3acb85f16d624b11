"""Solver-agnostic MILP of the two-echelon location-routing problem.

The model is a plain container of columns, rows and named metric forms; it can
be exported (``verde2e.mps``), solved by an external MILP engine, or checked
against a candidate assignment with :func:`row_violations`.

Row families follow the published formulation with these adjustments:

* home delivery ``y[c,h]`` is indexed over every satellite, so all rows that
  couple ``y`` with vehicles or satellites range over every satellite;
* customer flow conservation is imposed per second-echelon vehicle;
* first-echelon vehicles may only drop load at a satellite (``sat_drop``).
"""
from __future__ import annotations

import math
import re
import warnings
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping

from .core import (
    COMPANY_DISTANCE, EMISSIONS, METRICS, TOTAL_DISTANCE,
    Instance, Scenario, Solution, customer_trip_emissions,
)

BINARY, CONTINUOUS = "binary", "continuous"
LE, EQ, GE = "L", "E", "G"

_NAME_RE = re.compile(r"[^A-Za-z0-9_]")


def sanitize(name: str) -> str:
    return _NAME_RE.sub("_", name)[:255]


@dataclass(frozen=True)
class Column:
    name: str
    kind: str
    lower: float = 0.0
    upper: float = math.inf
    obj: float = 0.0


@dataclass(frozen=True)
class Row:
    name: str
    coefs: tuple[tuple[int, float], ...]
    sense: str
    rhs: float


@dataclass(frozen=True)
class VariableIndex:
    """Bijection between structured keys such as ``("x", i, j, k)`` and column ids."""

    keys: tuple[tuple, ...]

    @property
    def _ids(self) -> dict[tuple, int]:
        cached = self.__dict__.get("_ids_cache")
        if cached is None:
            cached = {k: i for i, k in enumerate(self.keys)}
            object.__setattr__(self, "_ids_cache", cached)
        return cached

    def __len__(self):
        return len(self.keys)

    def __contains__(self, key):
        return key in self._ids

    def __getitem__(self, key: tuple) -> int:
        return self._ids[key]

    def get(self, key: tuple, default=None):
        return self._ids.get(key, default)

    @staticmethod
    def name_of(key: tuple) -> str:
        return sanitize("_".join(str(p) for p in key))

    @staticmethod
    def key_of(name: str) -> tuple:
        family, *rest = name.split("_")
        return (family, *(int(p) for p in rest))


@dataclass(frozen=True)
class MilpModel:
    name: str
    columns: tuple[Column, ...]
    rows: tuple[Row, ...]
    index: VariableIndex
    objective_metric: str | None = None
    # linear form of each metric over the columns; the objective is one of them
    metric_forms: Mapping[str, tuple[tuple[int, float], ...]] = field(default_factory=dict)
    sense: str = "minimize"

    def column_names(self) -> list[str]:
        return [c.name for c in self.columns]

    def row(self, name: str) -> Row:
        for r in self.rows:
            if r.name == name:
                return r
        raise KeyError(name)


@dataclass(frozen=True)
class BuildOptions:
    valid_inequalities: bool = False
    symmetry_breaking: bool = False


class _Builder:
    def __init__(self):
        self.keys: list[tuple] = []
        self.kinds: list[str] = []
        self.bounds: list[tuple[float, float]] = []
        self.ids: dict[tuple, int] = {}
        self.rows: list[Row] = []

    def col(self, key: tuple, kind: str, lower=0.0, upper=None):
        if upper is None:
            upper = 1.0 if kind == BINARY else math.inf
        self.ids[key] = len(self.keys)
        self.keys.append(key)
        self.kinds.append(kind)
        self.bounds.append((lower, upper))

    def row(self, name: str, terms: Iterable[tuple[tuple, float]], sense: str, rhs: float = 0.0):
        acc: dict[int, float] = {}
        for key, coef in terms:
            j = self.ids[key]
            acc[j] = acc.get(j, 0.0) + coef
        coefs = tuple((j, v) for j, v in sorted(acc.items()) if v != 0)
        self.rows.append(Row(sanitize(name), coefs, sense, float(rhs)))

    def form(self, terms: Iterable[tuple[tuple, float]]) -> tuple[tuple[int, float], ...]:
        acc: dict[int, float] = {}
        for key, coef in terms:
            j = self.ids[key]
            acc[j] = acc.get(j, 0.0) + coef
        return tuple((j, v) for j, v in sorted(acc.items()) if v != 0)


def first_echelon_arcs(instance: Instance) -> list[tuple[int, int]]:
    nodes = [0, *instance.satellite_nodes]
    return [(i, j) for i in nodes for j in nodes if i != j]


def second_echelon_arcs(instance: Instance) -> list[tuple[int, int]]:
    nodes = sorted(instance.satellite_nodes + instance.customer_nodes)
    return [(i, j) for i in nodes for j in nodes if i != j]


def build_model(instance: Instance, scenario: Scenario = Scenario(),
                options: BuildOptions = BuildOptions()) -> MilpModel:
    inst = instance.with_fleet(scenario.green_fleet_variant)
    if not inst.first_echelon or not inst.second_echelon:
        raise ValueError("both echelons need at least one vehicle")
    total_cap = math.fsum(h.capacity_kg for h in inst.satellites)
    if inst.total_demand > total_cap:
        warnings.warn(f"total demand {inst.total_demand:g} kg exceeds total satellite capacity "
                      f"{total_cap:g} kg; the model is infeasible", RuntimeWarning, stacklevel=2)

    H = inst.satellite_nodes
    C = inst.customer_nodes
    K1 = [v.id for v in inst.first_echelon]
    K2 = [v.id for v in inst.second_echelon]
    veh = inst.vehicle_by_id
    D = {c: inst.customer_by_node[c].demand_kg for c in C}
    Hc = {c: set(inst.eligible(c)) for c in C}
    omegas = range(len(inst.stop_intervals))
    d = inst.d
    arcs = {k: first_echelon_arcs(inst) for k in K1}
    arcs.update({k: second_echelon_arcs(inst) for k in K2})
    K = K1 + K2
    out_arcs = {k: {} for k in K}
    in_arcs = {k: {} for k in K}
    for k in K:
        for i, j in arcs[k]:
            out_arcs[k].setdefault(i, []).append((i, j))
            in_arcs[k].setdefault(j, []).append((i, j))

    b = _Builder()
    for k in K:
        for i, j in arcs[k]:
            b.col(("x", i, j, k), BINARY)
    for k in K:
        for i, j in arcs[k]:
            b.col(("z", i, j, k), CONTINUOUS)
    for c in C:
        for h in H:
            b.col(("y", c, h), BINARY)
    for c in C:
        for h in H:
            b.col(("w", c, h), BINARY, upper=0.0 if scenario.full_home_delivery else 1.0)
    for h in H:
        for k in K2:
            b.col(("q", h, k), BINARY)
    for c in C:
        for k in K2:
            b.col(("s", c, k), BINARY)
    for h in H:
        b.col(("l", h), BINARY)
    for k in K1:
        for o in omegas:
            cap = inst.stop_intervals.intervals[o][0]
            b.col(("f", k, o), CONTINUOUS, upper=math.inf if cap is None else float(cap))

    def x(i, j, k):
        return ("x", i, j, k)

    def z(i, j, k):
        return ("z", i, j, k)

    def assigned(h, scale=1.0):
        for c in C:
            yield ("w", c, h), scale * D[c]
            yield ("y", c, h), scale * D[c]

    # ---- first echelon --------------------------------------------------------
    for k in K1:
        b.row(f"wh_flow_{k}", [(x(*a, k), 1.0) for a in out_arcs[k][0]]
              + [(x(*a, k), -1.0) for a in in_arcs[k][0]], EQ)
    for k in K1:
        b.row(f"wh_once_{k}", [(x(*a, k), 1.0) for a in in_arcs[k][0]], LE, 1.0)
    for h in H:
        for k in K1:
            b.row(f"sat_flow1_{h}_{k}", [(x(*a, k), 1.0) for a in out_arcs[k][h]]
                  + [(x(*a, k), -1.0) for a in in_arcs[k][h]], EQ)
    for h in H:
        b.row(f"sat_open_{h}", [(x(*a, k), 1.0) for k in K1 for a in out_arcs[k][h]] + [(("l", h), -1.0)], GE)
    for h in H:
        b.row(f"sat_cap_{h}", assigned(h), LE, inst.satellite_by_node[h].capacity_kg)
    for h in H:
        b.row(f"sat_load_{h}", [(z(*a, k), 1.0) for k in K1 for a in in_arcs[k][h]]
              + [(z(*a, k), -1.0) for k in K1 for a in out_arcs[k][h]] + list(assigned(h, -1.0)), EQ)
    for h in H:
        for k in K1:
            b.row(f"sat_drop_{h}_{k}", [(z(*a, k), 1.0) for a in in_arcs[k][h]]
                  + [(z(*a, k), -1.0) for a in out_arcs[k][h]], GE)
    b.row("wh_load", [(z(*a, k), 1.0) for k in K1 for a in in_arcs[k][0]]
          + [(z(*a, k), -1.0) for k in K1 for a in out_arcs[k][0]]
          + [t for h in H for t in assigned(h)], EQ)
    for k in K1:
        b.row(f"stops_{k}", [(("f", k, o), 1.0) for o in omegas]
              + [(x(*a, k), -1.0) for h in H for a in out_arcs[k][h]], EQ)
    for h in H:
        for k in K1:
            b.row(f"empty_ret1_{h}_{k}", [(z(h, 0, k), 1.0)], EQ)

    # ---- second echelon -------------------------------------------------------
    for c in C:
        for k in K2:
            b.row(f"cust_flow_{c}_{k}", [(x(*a, k), 1.0) for a in out_arcs[k][c]]
                  + [(x(*a, k), -1.0) for a in in_arcs[k][c]], EQ)
    for c in C:
        b.row(f"cust_visit_{c}", [(x(*a, k), 1.0) for k in K2 for a in in_arcs[k][c]]
              + [(("w", c, h), 1.0) for h in sorted(Hc[c])], EQ, 1.0)
    for c in C:
        for h in H:
            b.row(f"cust_sat_open_{c}_{h}", [(("w", c, h), 1.0), (("y", c, h), 1.0), (("l", h), -1.0)], LE)
    for c in C:
        b.row(f"cust_one_sat_{c}", [(("w", c, h), 1.0) for h in H] + [(("y", c, h), 1.0) for h in H], EQ, 1.0)
    for c in C:
        for h in H:
            for k in K2:
                b.row(f"link_sqy1_{c}_{h}_{k}",
                      [(("s", c, k), 1.0), (("q", h, k), 1.0), (("y", c, h), -1.0)], LE, 1.0)
    for c in C:
        for h in H:
            for k in K2:
                b.row(f"link_sqy2_{c}_{h}_{k}",
                      [(("s", c, k), 1.0), (("q", h, k), -1.0), (("y", c, h), 1.0)], LE, 1.0)
    for c in C:
        b.row(f"one_vehicle_{c}", [(("s", c, k), 1.0) for k in K2] + [(("y", c, h), -1.0) for h in H], EQ)
    for h in H:
        for k in K2:
            b.row(f"sat_flow2_{h}_{k}", [(x(*a, k), 1.0) for a in out_arcs[k][h]]
                  + [(x(*a, k), -1.0) for a in in_arcs[k][h]], EQ)
    for h in H:
        for k in K2:
            b.row(f"sat_visit2_{h}_{k}", [(x(*a, k), 1.0) for a in in_arcs[k][h]] + [(("q", h, k), -1.0)], LE)
    for h in H:
        for k in K2:
            b.row(f"veh_open_{h}_{k}", [(("q", h, k), 1.0), (("l", h), -1.0)], LE)
    for k in K2:
        b.row(f"veh_one_sat_{k}", [(("q", h, k), 1.0) for h in H], LE, 1.0)
    for c in C:
        for k in K2:
            b.row(f"cust_load_{c}_{k}", [(z(*a, k), 1.0) for a in in_arcs[k][c]]
                  + [(z(*a, k), -1.0) for a in out_arcs[k][c]] + [(("s", c, k), -D[c])], EQ)
    for c in C:
        for h in H:
            for k in K2:
                b.row(f"link_route_{c}_{h}_{k}", [(x(*a, k), 1.0) for a in in_arcs[k][c]]
                      + [(x(*a, k), 1.0) for a in out_arcs[k][h]] + [(("s", c, k), -1.0)], LE, 1.0)
    for h in H:
        b.row(f"sat_out_demand_{h}", [(z(h, c, k), 1.0) for k in K2 for c in C]
              + [(("y", c, h), -D[c]) for c in C], EQ)
    for c in C:
        for h in H:
            if h not in Hc[c]:
                b.row(f"no_pickup_{c}_{h}", [(("w", c, h), 1.0)], EQ)
    for c in C:
        for h in H:
            for k in K2:
                b.row(f"empty_ret2_{c}_{h}_{k}", [(z(c, h, k), 1.0)], EQ)
    for k in K:
        q_k = veh[k].capacity_kg
        for i, j in arcs[k]:
            b.row(f"arc_cap_{i}_{j}_{k}", [(z(i, j, k), 1.0), (x(i, j, k), -q_k)], LE)

    # ---- optional strengthening ---------------------------------------------------
    if options.valid_inequalities:
        b.row("vi_sat_cap", [(("l", h), inst.satellite_by_node[h].capacity_kg) for h in H], GE, inst.total_demand)
        for h in H:
            b.row(f"vi_veh_cap_{h}", [(("q", h, k), veh[k].capacity_kg) for k in K2]
                  + [(("y", c, h), -D[c]) for c in C], GE)
        home_only = [c for c in C if scenario.full_home_delivery or not Hc[c]]
        b.row("vi_home_only", [(("q", h, k), veh[k].capacity_kg) for h in H for k in K2], GE,
              math.fsum(D[c] for c in home_only))
    if options.symmetry_breaking:
        classes: dict[tuple, list[int]] = {}
        for k in K2:
            classes.setdefault(veh[k].profile(), []).append(k)
        for members in classes.values():
            for prev, k in zip(members, members[1:]):
                b.row(f"sym_{prev}_{k}", [(("q", h, k), 1.0) for h in H] + [(("q", h, prev), -1.0) for h in H], LE)

    # ---- metric forms and objective ---------------------------------------------
    def emission_terms():
        for k in K:
            v = veh[k]
            e = v.emission_factor_kg_per_km
            for i, j in arcs[k]:
                yield x(i, j, k), e * d(i, j) * v.rho_empty_l_per_km
                yield z(i, j, k), e * d(i, j) * (v.rho_full_l_per_km - v.rho_empty_l_per_km) / v.capacity_kg
        for k in K1:
            for o in omegas:
                yield ("f", k, o), inst.stop_intervals.intervals[o][1]
        for c in C:
            for h in sorted(Hc[c]):
                yield ("w", c, h), customer_trip_emissions(inst.customer_by_node[c], h, inst)

    def company_terms():
        for k in K:
            for i, j in arcs[k]:
                yield x(i, j, k), d(i, j)

    def customer_terms():
        for c in C:
            for h in H:
                yield ("w", c, h), d(c, h)

    forms = {
        EMISSIONS: b.form(emission_terms()),
        TOTAL_DISTANCE: b.form([*company_terms(), *customer_terms()]),
        COMPANY_DISTANCE: b.form(company_terms()),
    }
    obj = dict(forms[scenario.objective])
    keys = tuple(b.keys)
    columns = tuple(
        Column(VariableIndex.name_of(key), kind, lo, up, obj.get(j, 0.0))
        for j, (key, kind, (lo, up)) in enumerate(zip(keys, b.kinds, b.bounds))
    )
    return MilpModel(
        name=sanitize(f"{inst.name}_{scenario.label}"),
        columns=columns, rows=tuple(b.rows), index=VariableIndex(keys),
        objective_metric=scenario.objective, metric_forms=forms,
    )


def add_epsilon_constraint(model: MilpModel, metric: str, bound: float) -> MilpModel:
    """New model with ``metric <= bound`` appended; the objective is unchanged."""
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}")
    if bound < 0:
        raise ValueError("epsilon bound must be non-negative")
    if metric not in model.metric_forms:
        raise ValueError(f"model carries no linear form for {metric!r}")
    taken = {r.name for r in model.rows}
    n = 0
    while f"eps_{metric}_{n}" in taken:
        n += 1
    row = Row(f"eps_{metric}_{n}", model.metric_forms[metric], LE, float(bound))
    return replace(model, rows=model.rows + (row,))


# ---- assignments ---------------------------------------------------------------------

def solution_values(model: MilpModel, instance: Instance, solution: Solution) -> dict[str, float]:
    """Column values (by name) encoding ``solution``; unlisted columns are zero.

    Stop-interval columns receive the canonical cheapest-first fill.
    """
    vals: dict[tuple, float] = {}
    for r in (*solution.first_echelon_routes, *solution.second_echelon_routes):
        for a, b_, load in r.legs():
            if a == b_:
                continue
            vals[("x", a, b_, r.vehicle)] = 1.0
            vals[("z", a, b_, r.vehicle)] = load
    for r in solution.first_echelon_routes:
        for h in r.stops:
            vals[("l", h)] = 1.0
        for o, take in enumerate(instance.stop_intervals.fill(len(r.stops))):
            vals[("f", r.vehicle, o)] = float(take)
    for r in solution.second_echelon_routes:
        if r.stops:
            vals[("q", r.depot, r.vehicle)] = 1.0
        for c in r.stops:
            vals[("s", c, r.vehicle)] = 1.0
    for c, h in solution.pickup.items():
        vals[("w", c, h)] = 1.0
    for c, (h, _) in solution.home.items():
        vals[("y", c, h)] = 1.0
    missing = [k for k in vals if k not in model.index]
    if missing:
        raise KeyError(f"solution uses keys absent from the model: {missing[:5]}")
    return {VariableIndex.name_of(k): v for k, v in vals.items() if v != 0}


def _dense(model: MilpModel, values: Mapping[str, float]) -> list[float]:
    pos = {c.name: j for j, c in enumerate(model.columns)}
    out = [0.0] * len(model.columns)
    for name, v in values.items():
        out[pos[name]] = v
    return out


def linear_value(form: Iterable[tuple[int, float]], dense: list[float]) -> float:
    return math.fsum(coef * dense[j] for j, coef in form)


def objective_value(model: MilpModel, values: Mapping[str, float]) -> float:
    dense = _dense(model, values)
    return math.fsum(c.obj * dense[j] for j, c in enumerate(model.columns) if c.obj)


def metric_value(model: MilpModel, metric: str, values: Mapping[str, float]) -> float:
    return linear_value(model.metric_forms[metric], _dense(model, values))


def row_violations(model: MilpModel, values: Mapping[str, float], tol: float = 1e-6) -> list[str]:
    """Names of rows and column bounds the assignment breaks."""
    dense = _dense(model, values)
    bad = []
    for j, c in enumerate(model.columns):
        v = dense[j]
        if v < c.lower - tol or v > c.upper + tol:
            bad.append(f"bound:{c.name}")
        if c.kind == BINARY and min(abs(v), abs(v - 1)) > tol:
            bad.append(f"integrality:{c.name}")
    for r in model.rows:
        lhs = linear_value(r.coefs, dense)
        if (r.sense == LE and lhs > r.rhs + tol) or (r.sense == GE and lhs < r.rhs - tol) \
                or (r.sense == EQ and abs(lhs - r.rhs) > tol):
            bad.append(r.name)
    return bad


def expected_column_count(n_customers: int, n_satellites: int, n_k1: int, n_k2: int, n_intervals: int) -> int:
    """Closed-form column count implied by the variable index definition."""
    a1 = 2 * n_satellites + n_satellites * (n_satellites - 1)
    n2 = n_customers + n_satellites
    a2 = n2 * (n2 - 1)
    return (2 * n_k1 * a1 + 2 * n_k2 * a2 + 2 * n_customers * n_satellites + n_satellites * n_k2
            + n_customers * n_k2 + n_satellites + n_k1 * n_intervals)


def with_objective(model: MilpModel, metric: str) -> MilpModel:
    """Same rows and columns, objective replaced by the linear form of ``metric``."""
    if metric not in model.metric_forms:
        raise ValueError(f"model carries no linear form for {metric!r}")
    obj = dict(model.metric_forms[metric])
    columns = tuple(replace(c, obj=obj.get(j, 0.0)) for j, c in enumerate(model.columns))
    return replace(model, columns=columns, objective_metric=metric)
