"""Independent feasibility checks and metric evaluation of solutions.

Every reported objective value in the package comes from :func:`evaluate`.
Each metric component is the correctly rounded sum (``math.fsum``) of its
atomic terms; the totals are plain float sums of the rounded components, so the
additivity identities on :class:`Metrics` hold bit for bit.
"""
from __future__ import annotations

import csv
import io
import json
import math
from collections import Counter, defaultdict
from dataclasses import asdict, dataclass, fields

from .core import (
    COMPANY_DISTANCE, EMISSIONS, FIRST, LOAD_TOL, SATELLITE, SECOND, TOTAL_DISTANCE,
    CUSTOMER, Instance, Solution, customer_trip_emissions, demand_sum, is_zero_emission_trip,
    leg_emissions, stop_emissions,
)

# violation codes
UNKNOWN_REFERENCE = "unknown_reference"
UNSERVED_CUSTOMER = "unserved_customer"
DOUBLE_SERVED = "double_served"
INELIGIBLE_PICKUP = "ineligible_pickup"
CAPACITY_EXCEEDED = "capacity_exceeded"
INACTIVE_SATELLITE_USED = "inactive_satellite_used"
VEHICLE_MULTI_SATELLITE = "vehicle_multi_satellite"
VEHICLE_MULTI_ROUTE = "vehicle_multi_route"
WRONG_ECHELON = "wrong_echelon"
MALFORMED_ROUTE = "malformed_route"
DISCONNECTED_ROUTE = "disconnected_route"
HOME_NOT_ROUTED = "home_not_routed"
LOAD_IMBALANCE = "load_imbalance"
NONEMPTY_RETURN = "nonempty_return"


class InfeasibleSolution(ValueError):
    def __init__(self, violations):
        self.violations = list(violations)
        detail = "; ".join(str(v) for v in self.violations[:5])
        super().__init__(f"{len(self.violations)} violation(s): {detail}")


@dataclass(frozen=True)
class Violation:
    code: str
    subject: tuple
    detail: str

    def __str__(self):
        return f"{self.code}{list(self.subject)}: {self.detail}"


def check_feasibility(instance: Instance, solution: Solution) -> list[Violation]:
    out: list[Violation] = []

    def flag(code, subject, detail):
        out.append(Violation(code, tuple(subject), detail))

    kinds = {nd.id: nd.kind for nd in instance.nodes}
    vehicles = instance.vehicle_by_id

    # -- route structure -------------------------------------------------
    seen_vehicles: Counter = Counter()
    routes_ok = []
    for echelon, routes in ((FIRST, solution.first_echelon_routes), (SECOND, solution.second_echelon_routes)):
        for r in routes:
            seen_vehicles[r.vehicle] += 1
            v = vehicles.get(r.vehicle)
            if v is None:
                flag(UNKNOWN_REFERENCE, (r.vehicle,), "route of unknown vehicle")
                continue
            if v.echelon != echelon:
                flag(WRONG_ECHELON, (r.vehicle,), f"{v.echelon}-echelon vehicle listed as {echelon}-echelon route")
                continue
            if len(r.loads) != len(r.stops) + 1:
                flag(MALFORMED_ROUTE, (r.vehicle,), "need one load per leg")
                continue
            depot_kind = "warehouse" if echelon == FIRST else SATELLITE
            stop_kind = SATELLITE if echelon == FIRST else CUSTOMER
            if kinds.get(r.depot) != depot_kind:
                flag(DISCONNECTED_ROUTE, (r.vehicle, r.depot), f"route must start and end at a {depot_kind}")
                continue
            bad = [s for s in r.stops if kinds.get(s) != stop_kind]
            if bad:
                flag(DISCONNECTED_ROUTE, (r.vehicle, *bad), f"{echelon}-echelon routes may only visit {stop_kind}s")
                continue
            if len(set(r.stops)) != len(r.stops):
                flag(DISCONNECTED_ROUTE, (r.vehicle,), "route revisits a node")
                continue
            routes_ok.append((echelon, r, v))
    for vid, n in sorted(seen_vehicles.items()):
        if n > 1:
            kind = VEHICLE_MULTI_SATELLITE if vid in vehicles and vehicles[vid].echelon == SECOND else VEHICLE_MULTI_ROUTE
            flag(kind, (vid,), f"vehicle has {n} routes")

    # -- leg loads -------------------------------------------------------
    delivered_by_k1: dict[int, list[float]] = defaultdict(list)
    on_route: dict[int, tuple[int, int]] = {}
    for echelon, r, v in routes_ok:
        for a, b, load in r.legs():
            if load < -LOAD_TOL:
                flag(LOAD_IMBALANCE, (r.vehicle, a, b), f"negative load {load}")
            if load > v.capacity_kg + LOAD_TOL:
                flag(CAPACITY_EXCEEDED, (r.vehicle, a, b), f"load {load} above capacity {v.capacity_kg}")
        if abs(r.loads[-1]) > LOAD_TOL:
            flag(NONEMPTY_RETURN, (r.vehicle,), f"returns with load {r.loads[-1]}")
        for i, s in enumerate(r.stops):
            drop = r.loads[i] - r.loads[i + 1]
            if echelon == FIRST:
                if drop < -LOAD_TOL:
                    flag(LOAD_IMBALANCE, (r.vehicle, s), "first-echelon vehicle picks up load at a satellite")
                delivered_by_k1[s].append(drop)
            else:
                on_route[s] = (r.depot, r.vehicle)
                demand = instance.customer_by_node[s].demand_kg
                if abs(drop - demand) > LOAD_TOL:
                    flag(LOAD_IMBALANCE, (r.vehicle, s), f"drops {drop} for a demand of {demand}")

    # -- customers --------------------------------------------------------
    for c in solution.pickup.keys() | solution.home.keys():
        if c not in instance.customer_by_node:
            flag(UNKNOWN_REFERENCE, (c,), "assignment of unknown customer")
    for c in instance.customer_nodes:
        in_pick, in_home = c in solution.pickup, c in solution.home
        if not in_pick and not in_home:
            flag(UNSERVED_CUSTOMER, (c,), "customer neither picks up nor receives a home delivery")
        elif in_pick and in_home:
            flag(DOUBLE_SERVED, (c,), "customer both picks up and is delivered at home")
        if in_pick:
            h = solution.pickup[c]
            if h not in instance.eligible(c):
                flag(INELIGIBLE_PICKUP, (c, h), "satellite outside the customer's pickup radius")
        if in_home:
            h, k = solution.home[c]
            if kinds.get(h) != SATELLITE or k not in vehicles:
                flag(UNKNOWN_REFERENCE, (c, h, k), "home delivery references unknown satellite or vehicle")
            elif on_route.get(c) != (h, k):
                flag(HOME_NOT_ROUTED, (c, h, k), f"customer is on route {on_route.get(c)} instead")
    for c, (h, k) in on_route.items():
        if c not in solution.home:
            flag(HOME_NOT_ROUTED, (c, h, k), "routed customer lacks a home-delivery assignment")

    # -- satellites -------------------------------------------------------
    assigned: dict[int, list[int]] = defaultdict(list)
    for c, h in solution.pickup.items():
        assigned[h].append(c)
    for c, (h, _) in solution.home.items():
        assigned[h].append(c)
    visited = set(delivered_by_k1)
    for h in instance.satellite_nodes:
        custs = [c for c in assigned.get(h, []) if c in instance.customer_by_node]
        load = demand_sum(instance, custs)
        cap = instance.satellite_by_node[h].capacity_kg
        if load > cap + LOAD_TOL:
            flag(CAPACITY_EXCEEDED, (h,), f"satellite holds {load} kg above capacity {cap}")
        if custs and h not in visited:
            flag(INACTIVE_SATELLITE_USED, (h,), "customers assigned to a satellite no first-echelon route visits")
        if h in visited:
            got = math.fsum(delivered_by_k1[h])
            if abs(got - load) > LOAD_TOL:
                flag(LOAD_IMBALANCE, (h,), f"first echelon delivers {got} kg, customers need {load} kg")
    return out


@dataclass(frozen=True)
class Metrics:
    e_K1: float
    e_stops: float
    e_K2: float
    e_C: float
    d_K1: float
    d_K2: float
    d_C0: float
    d_C: float
    total_emissions: float
    total_distance: float
    company_distance: float
    active_satellites: int
    active_pickup_only: int
    customers_at_home_pct: float | None
    avg_pickup_dist_em_km: float | None
    avg_pickup_dist_zero_km: float | None
    avg_customers_per_active_satellite: float | None

    @property
    def e_K1_with_stops(self) -> float:
        """First-echelon emissions including stop emissions (three-way breakdown view)."""
        return self.e_K1 + self.e_stops

    def metric(self, name: str) -> float:
        return {EMISSIONS: self.total_emissions, TOTAL_DISTANCE: self.total_distance,
                COMPANY_DISTANCE: self.company_distance}[name]

    def to_dict(self) -> dict:
        out = asdict(self)
        out["e_K1_with_stops"] = self.e_K1_with_stops
        return out


METRIC_COLUMNS = [f.name for f in fields(Metrics)] + ["e_K1_with_stops"]


def combine_totals(e_K1, e_stops, e_K2, e_C, d_K1, d_K2, d_C0, d_C) -> tuple[float, float, float]:
    """(total emissions, total distance, company distance) from rounded components."""
    return e_K1 + e_K2 + e_C + e_stops, d_K1 + d_K2 + d_C0 + d_C, d_K1 + d_K2


def evaluate(instance: Instance, solution: Solution, check: bool = True) -> Metrics:
    if check:
        violations = check_feasibility(instance, solution)
        if violations:
            raise InfeasibleSolution(violations)
    vehicles = instance.vehicle_by_id
    d = instance.d

    def route_terms(routes):
        em, dist = [], []
        for r in routes:
            v = vehicles[r.vehicle]
            for a, b, load in r.legs():
                em.append(leg_emissions(v, d(a, b), max(load, 0.0)))
                dist.append(d(a, b))
        return math.fsum(em), math.fsum(dist)

    e_K1, d_K1 = route_terms(solution.first_echelon_routes)
    e_K2, d_K2 = route_terms(solution.second_echelon_routes)
    e_stops = math.fsum(
        stop_emissions(len(r.stops), instance.stop_intervals) for r in solution.first_echelon_routes
    )
    by_node = instance.customer_by_node
    e_terms, zero_d, em_d = [], [], []
    for c, h in sorted(solution.pickup.items()):
        cust = by_node[c]
        dist = d(c, h)
        e_terms.append(customer_trip_emissions(cust, h, instance))
        (zero_d if is_zero_emission_trip(cust, dist) else em_d).append(dist)
    e_C, d_C0, d_C = math.fsum(e_terms), math.fsum(zero_d), math.fsum(em_d)
    total_e, total_d, company_d = combine_totals(e_K1, e_stops, e_K2, e_C, d_K1, d_K2, d_C0, d_C)

    active = {s for r in solution.first_echelon_routes for s in r.stops}
    with_route = {r.depot for r in solution.second_echelon_routes if r.stops}
    n_cust = len(instance.customers)
    n_assigned = sum(1 for c in by_node if c in solution.pickup or c in solution.home)
    return Metrics(
        e_K1=e_K1, e_stops=e_stops, e_K2=e_K2, e_C=e_C,
        d_K1=d_K1, d_K2=d_K2, d_C0=d_C0, d_C=d_C,
        total_emissions=total_e, total_distance=total_d, company_distance=company_d,
        active_satellites=len(active),
        active_pickup_only=len(active - with_route),
        customers_at_home_pct=100.0 * len(solution.home) / n_cust if n_cust else None,
        avg_pickup_dist_em_km=math.fsum(em_d) / len(em_d) if em_d else None,
        avg_pickup_dist_zero_km=math.fsum(zero_d) / len(zero_d) if zero_d else None,
        avg_customers_per_active_satellite=n_assigned / len(active) if active else None,
    )


# ---- serialization ----------------------------------------------------------

def metrics_to_json(metrics: Metrics) -> str:
    return json.dumps(metrics.to_dict(), indent=1, sort_keys=True)


def metrics_to_csv(rows: list[tuple[dict, Metrics]]) -> str:
    """CSV with caller-supplied key columns followed by every metric column."""
    buf = io.StringIO()
    keys = list(rows[0][0]) if rows else []
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(keys + METRIC_COLUMNS)
    for key, m in rows:
        md = m.to_dict()
        writer.writerow([key[k] for k in keys] + ["" if md[c] is None else repr(md[c]) for c in METRIC_COLUMNS])
    return buf.getvalue()
