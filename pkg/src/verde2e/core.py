"""Domain types and elementary formulas for the two-echelon location-routing
problem with eco-conscious customers.

Units are kilometres and kilograms throughout. Node ids are dense integers with
the warehouse at id 0; vehicle ids are independent of node ids.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

SCHEMA = "2elrp-1"

# slack used for every distance-threshold and capacity comparison
DIST_TOL = 1e-9
LOAD_TOL = 1e-6

WAREHOUSE, SATELLITE, CUSTOMER = "warehouse", "satellite", "customer"
FIRST, SECOND = "first", "second"
SIZE_CLASSES = ("extra_small", "small", "medium", "large")
HOME_ONLY_CLASSES = ("extra_small", "large")

EMISSIONS, TOTAL_DISTANCE, COMPANY_DISTANCE = "emissions", "total_distance", "company_distance"
METRICS = (EMISSIONS, TOTAL_DISTANCE, COMPANY_DISTANCE)
HIGH_CAPACITY, LOW_CAPACITY = "high_capacity", "low_capacity"


class InstanceError(ValueError):
    """Raised for malformed or inconsistent instance data."""


class InfeasibleError(RuntimeError):
    """The instance (or a constrained subproblem) has no feasible solution."""


class BudgetExceeded(RuntimeError):
    """Instance too large for exhaustive enumeration."""


@dataclass(frozen=True)
class Node:
    id: int
    kind: str
    position: tuple[float, float] | None = None


@dataclass(frozen=True)
class Customer:
    node: int
    demand_kg: float
    d_max_km: float
    d_green_km: float
    size_class: str | None = None

    def __post_init__(self):
        if not self.demand_kg > 0:
            raise InstanceError(f"customer {self.node}: demand must be positive")
        if self.d_green_km < 0 or self.d_max_km < 0:
            raise InstanceError(f"customer {self.node}: negative distance threshold")
        if self.d_green_km > self.d_max_km:
            raise InstanceError(f"customer {self.node}: d_green exceeds d_max")
        if self.size_class is not None:
            if self.size_class not in SIZE_CLASSES:
                raise InstanceError(f"customer {self.node}: unknown size class {self.size_class!r}")
            if self.size_class in HOME_ONLY_CLASSES and self.d_max_km != 0:
                raise InstanceError(f"customer {self.node}: {self.size_class} parcels are home-delivery only")


@dataclass(frozen=True)
class Satellite:
    node: int
    capacity_kg: float

    def __post_init__(self):
        if not self.capacity_kg > 0:
            raise InstanceError(f"satellite {self.node}: capacity must be positive")


@dataclass(frozen=True)
class Vehicle:
    id: int
    echelon: str
    capacity_kg: float
    emission_factor_kg_per_km: float
    rho_empty_l_per_km: float
    rho_full_l_per_km: float
    # reduced capacity used by the low-capacity fleet variant (green vans only)
    low_capacity_kg: float | None = None

    def __post_init__(self):
        if self.echelon not in (FIRST, SECOND):
            raise InstanceError(f"vehicle {self.id}: echelon must be 'first' or 'second'")
        if not self.capacity_kg > 0:
            raise InstanceError(f"vehicle {self.id}: capacity must be positive")
        if self.emission_factor_kg_per_km < 0 or self.rho_empty_l_per_km < 0:
            raise InstanceError(f"vehicle {self.id}: negative emission parameter")
        if self.rho_full_l_per_km < self.rho_empty_l_per_km:
            raise InstanceError(f"vehicle {self.id}: rho_full below rho_empty")
        if self.low_capacity_kg is not None and not 0 < self.low_capacity_kg <= self.capacity_kg:
            raise InstanceError(f"vehicle {self.id}: low capacity must lie in (0, capacity]")

    @property
    def load_slope(self) -> float:
        return (self.rho_full_l_per_km - self.rho_empty_l_per_km) / self.capacity_kg

    def profile(self) -> tuple[float, float, float, float]:
        """Attributes that make two vehicles interchangeable."""
        return (self.capacity_kg, self.emission_factor_kg_per_km,
                self.rho_empty_l_per_km, self.rho_full_l_per_km)


@dataclass(frozen=True)
class EmissionIntervals:
    """Piecewise stop-emission schedule as (stops in interval, kg CO2 per stop).

    ``None`` as the stop count marks the unbounded last interval.
    """

    intervals: tuple[tuple[int | None, float], ...]

    def __post_init__(self):
        if not self.intervals:
            raise InstanceError("at least one stop interval is required")
        rates = [r for _, r in self.intervals]
        if any(r < 0 for r in rates):
            raise InstanceError("stop emission rates must be non-negative")
        if any(b < a for a, b in zip(rates, rates[1:])):
            raise InstanceError("stop emission rates must be non-decreasing")
        for i, (cap, _) in enumerate(self.intervals):
            if cap is None and i != len(self.intervals) - 1:
                raise InstanceError("only the last stop interval may be unbounded")
            if cap is not None and cap < 1:
                raise InstanceError("interval stop counts must be positive")

    @classmethod
    def default(cls) -> "EmissionIntervals":
        return cls(((1, 0.10), (3, 0.15), (None, 0.30)))

    def __len__(self):
        return len(self.intervals)

    def fill(self, n_stops: int) -> list[int]:
        """Stops charged in each interval, cheapest interval first."""
        out = []
        remaining = n_stops
        for cap, _ in self.intervals:
            take = remaining if cap is None else min(remaining, cap)
            out.append(take)
            remaining -= take
        if remaining:
            raise ValueError(f"{n_stops} stops exceed the bounded stop schedule")
        return out


@dataclass(frozen=True)
class Scenario:
    objective: str = EMISSIONS
    green_fleet_variant: str = HIGH_CAPACITY
    full_home_delivery: bool = False

    def __post_init__(self):
        if self.objective not in METRICS:
            raise ValueError(f"unknown objective {self.objective!r}")
        if self.green_fleet_variant not in (HIGH_CAPACITY, LOW_CAPACITY):
            raise ValueError(f"unknown fleet variant {self.green_fleet_variant!r}")

    @classmethod
    def named(cls, name: str, full_home_delivery: bool = False) -> "Scenario":
        """EHC, ELC, TD or CD (case-insensitive); a ``-hd`` suffix enables full home delivery."""
        key = name.lower()
        if key.endswith("-hd"):
            key, full_home_delivery = key[:-3], True
        table = {
            "ehc": (EMISSIONS, HIGH_CAPACITY),
            "elc": (EMISSIONS, LOW_CAPACITY),
            "td": (TOTAL_DISTANCE, HIGH_CAPACITY),
            "cd": (COMPANY_DISTANCE, HIGH_CAPACITY),
        }
        if key not in table:
            raise ValueError(f"unknown scenario {name!r}")
        objective, variant = table[key]
        return cls(objective, variant, full_home_delivery)

    @property
    def label(self) -> str:
        if self.objective == EMISSIONS:
            base = "EHC" if self.green_fleet_variant == HIGH_CAPACITY else "ELC"
        elif self.objective == TOTAL_DISTANCE:
            base = "TD"
        else:
            base = "CD"
        return base + ("-HD" if self.full_home_delivery else "")


@dataclass(frozen=True)
class Instance:
    nodes: tuple[Node, ...]
    customers: tuple[Customer, ...]
    satellites: tuple[Satellite, ...]
    vehicles: tuple[Vehicle, ...]
    distance_km: tuple[tuple[float, ...], ...]
    customer_emission_factor_kg_per_km: float = 0.15
    stop_intervals: EmissionIntervals = field(default_factory=EmissionIntervals.default)
    name: str = "instance"
    distance_mode: str = "matrix"

    def __post_init__(self):
        self._validate()

    def _validate(self):
        n = len(self.nodes)
        if [nd.id for nd in self.nodes] != list(range(n)):
            raise InstanceError("node ids must be dense 0..|V|-1 in order")
        kinds = [nd.kind for nd in self.nodes]
        if kinds.count(WAREHOUSE) != 1 or kinds[0] != WAREHOUSE:
            raise InstanceError("exactly one warehouse, with id 0, is required")
        for nd in self.nodes:
            if nd.kind not in (WAREHOUSE, SATELLITE, CUSTOMER):
                raise InstanceError(f"node {nd.id}: unknown kind {nd.kind!r}")
        if sorted(c.node for c in self.customers) != [i for i, k in enumerate(kinds) if k == CUSTOMER]:
            raise InstanceError("customer records must match customer nodes one-to-one")
        if sorted(h.node for h in self.satellites) != [i for i, k in enumerate(kinds) if k == SATELLITE]:
            raise InstanceError("satellite records must match satellite nodes one-to-one")
        ids = [v.id for v in self.vehicles]
        if len(set(ids)) != len(ids):
            raise InstanceError("vehicle ids must be unique")
        if len(self.distance_km) != n or any(len(row) != n for row in self.distance_km):
            raise InstanceError("distance matrix must be |V| x |V|")
        for i, row in enumerate(self.distance_km):
            if row[i] != 0:
                raise InstanceError("distance matrix must have a zero diagonal")
            if any(not (d >= 0 and math.isfinite(d)) for d in row):
                raise InstanceError("distances must be finite and non-negative")
        if self.customer_emission_factor_kg_per_km < 0:
            raise InstanceError("customer emission factor must be non-negative")
        d = np.asarray(self.distance_km, dtype=float)
        if n:
            slack = 1e-9 * max(1.0, float(d.max()))
            for k in range(n):
                if np.any(d > d[:, k, None] + d[None, k, :] + slack):
                    i, j = map(int, np.argwhere(d > d[:, k, None] + d[None, k, :] + slack)[0])
                    raise InstanceError(f"triangle inequality violated on ({i},{j}) via {k}")

    # ---- lookups -----------------------------------------------------------

    def d(self, i: int, j: int) -> float:
        return self.distance_km[i][j]

    @cached_property
    def customer_by_node(self) -> dict[int, Customer]:
        return {c.node: c for c in self.customers}

    @cached_property
    def satellite_by_node(self) -> dict[int, Satellite]:
        return {h.node: h for h in self.satellites}

    @cached_property
    def vehicle_by_id(self) -> dict[int, Vehicle]:
        return {v.id: v for v in self.vehicles}

    @property
    def customer_nodes(self) -> list[int]:
        return sorted(c.node for c in self.customers)

    @property
    def satellite_nodes(self) -> list[int]:
        return sorted(h.node for h in self.satellites)

    @property
    def first_echelon(self) -> list[Vehicle]:
        return sorted((v for v in self.vehicles if v.echelon == FIRST), key=lambda v: v.id)

    @property
    def second_echelon(self) -> list[Vehicle]:
        return sorted((v for v in self.vehicles if v.echelon == SECOND), key=lambda v: v.id)

    @cached_property
    def _eligible(self) -> dict[int, tuple[int, ...]]:
        return {c.node: tuple(sorted(eligible_satellites(c, self))) for c in self.customers}

    def eligible(self, customer_node: int) -> tuple[int, ...]:
        """Sorted eligible pickup satellites of a customer."""
        return self._eligible[customer_node]

    @property
    def total_demand(self) -> float:
        return math.fsum(c.demand_kg for c in sorted(self.customers, key=lambda c: c.node))

    def with_fleet(self, variant: str) -> "Instance":
        """Instance whose green vans carry the capacity of the requested fleet variant."""
        if variant == HIGH_CAPACITY:
            return self
        if variant != LOW_CAPACITY:
            raise ValueError(f"unknown fleet variant {variant!r}")
        vehicles = tuple(
            replace(v, capacity_kg=v.low_capacity_kg, low_capacity_kg=None)
            if v.low_capacity_kg is not None else v
            for v in self.vehicles
        )
        return replace(self, vehicles=vehicles)

    # ---- serialization -------------------------------------------------------

    def to_dict(self) -> dict:
        out = {
            "schema": SCHEMA,
            "name": self.name,
            "distance_mode": self.distance_mode,
            "nodes": [_node_dict(nd) for nd in self.nodes],
            "customers": [
                {"node": c.node, "demand_kg": c.demand_kg, "d_max_km": c.d_max_km,
                 "d_green_km": c.d_green_km, "size_class": c.size_class}
                for c in self.customers
            ],
            "satellites": [{"node": h.node, "capacity_kg": h.capacity_kg} for h in self.satellites],
            "vehicles": [_vehicle_dict(v) for v in self.vehicles],
            "customer_emission_factor_kg_per_km": self.customer_emission_factor_kg_per_km,
            "stop_intervals": [
                {"max_stops": cap, "rate_kg_per_stop": rate} for cap, rate in self.stop_intervals.intervals
            ],
        }
        if self.distance_mode == "matrix":
            out["distance_km"] = [list(row) for row in self.distance_km]
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())


def _node_dict(nd: Node) -> dict:
    out = {"id": nd.id, "kind": nd.kind}
    if nd.position is not None:
        out["x_km"], out["y_km"] = nd.position
    return out


def _vehicle_dict(v: Vehicle) -> dict:
    out = {
        "id": v.id, "echelon": v.echelon, "capacity_kg": v.capacity_kg,
        "emission_factor_kg_per_km": v.emission_factor_kg_per_km,
        "rho_empty_l_per_km": v.rho_empty_l_per_km, "rho_full_l_per_km": v.rho_full_l_per_km,
    }
    if v.low_capacity_kg is not None:
        out["low_capacity_kg"] = v.low_capacity_kg
    return out


def euclidean_matrix(positions: Sequence[tuple[float, float]]) -> tuple[tuple[float, ...], ...]:
    return tuple(
        tuple(0.0 if i == j else math.hypot(a[0] - b[0], a[1] - b[1]) for j, b in enumerate(positions))
        for i, a in enumerate(positions)
    )


def instance_from_dict(data: Mapping) -> Instance:
    if data.get("schema") != SCHEMA:
        raise InstanceError(f"unsupported schema {data.get('schema')!r}, expected {SCHEMA!r}")
    try:
        nodes = []
        for nd in data["nodes"]:
            pos = (float(nd["x_km"]), float(nd["y_km"])) if "x_km" in nd else None
            nodes.append(Node(int(nd["id"]), nd["kind"], pos))
        mode = data.get("distance_mode", "matrix")
        if mode == "euclidean":
            if any(nd.position is None for nd in nodes):
                raise InstanceError("euclidean distance mode requires coordinates on every node")
            dist = euclidean_matrix([nd.position for nd in nodes])
        elif mode == "matrix":
            dist = tuple(tuple(float(x) for x in row) for row in data["distance_km"])
        else:
            raise InstanceError(f"unknown distance_mode {mode!r}")
        customers = tuple(
            Customer(int(c["node"]), float(c["demand_kg"]), float(c["d_max_km"]),
                     float(c["d_green_km"]), c.get("size_class"))
            for c in data["customers"]
        )
        satellites = tuple(Satellite(int(h["node"]), float(h["capacity_kg"])) for h in data["satellites"])
        vehicles = tuple(
            Vehicle(int(v["id"]), v["echelon"], float(v["capacity_kg"]),
                    float(v["emission_factor_kg_per_km"]), float(v["rho_empty_l_per_km"]),
                    float(v["rho_full_l_per_km"]),
                    float(v["low_capacity_kg"]) if v.get("low_capacity_kg") is not None else None)
            for v in data["vehicles"]
        )
        if "stop_intervals" in data:
            intervals = EmissionIntervals(tuple(
                (None if iv["max_stops"] is None else int(iv["max_stops"]), float(iv["rate_kg_per_stop"]))
                for iv in data["stop_intervals"]
            ))
        else:
            intervals = EmissionIntervals.default()
    except (KeyError, TypeError) as exc:
        raise InstanceError(f"malformed instance record: {exc!r}") from exc
    return Instance(
        nodes=tuple(nodes), customers=customers, satellites=satellites, vehicles=vehicles,
        distance_km=dist,
        customer_emission_factor_kg_per_km=float(data.get("customer_emission_factor_kg_per_km", 0.15)),
        stop_intervals=intervals, name=str(data.get("name", "instance")), distance_mode=mode,
    )


def load_instance(path) -> Instance:
    with open(path, encoding="utf-8") as fh:
        return instance_from_dict(json.load(fh))


# ---- elementary formulas ----------------------------------------------------

def eligible_satellites(customer: Customer, instance: Instance) -> set[int]:
    """Satellites within the customer's pickup radius (boundary inclusive)."""
    if customer.d_max_km == 0:
        return set()
    return {
        h.node for h in instance.satellites
        if instance.d(customer.node, h.node) <= customer.d_max_km + DIST_TOL
    }


def is_zero_emission_trip(customer: Customer, distance_km: float) -> bool:
    return distance_km <= customer.d_green_km + DIST_TOL


def customer_trip_emissions(customer: Customer, satellite: int, instance: Instance) -> float:
    """One-way CO2 of a customer travelling to an eligible pickup satellite."""
    if satellite not in instance.eligible(customer.node):
        raise ValueError(f"satellite {satellite} is outside the pickup radius of customer {customer.node}")
    dist = instance.d(customer.node, satellite)
    if is_zero_emission_trip(customer, dist):
        return 0.0
    return instance.customer_emission_factor_kg_per_km * dist


def fcr(vehicle: Vehicle, load_kg: float, traversed: bool = True) -> float:
    """Fuel consumption rate on a leg, affine in the carried load."""
    if load_kg < -LOAD_TOL or load_kg > vehicle.capacity_kg + LOAD_TOL:
        raise ValueError(f"load {load_kg} outside [0, {vehicle.capacity_kg}] for vehicle {vehicle.id}")
    if not traversed:
        return 0.0
    return vehicle.rho_empty_l_per_km + vehicle.load_slope * load_kg


def leg_emissions(vehicle: Vehicle, distance_km: float, load_kg: float) -> float:
    return vehicle.emission_factor_kg_per_km * distance_km * fcr(vehicle, load_kg)


def stop_emissions(n_stops: int, intervals: EmissionIntervals) -> float:
    """CO2 of a first-echelon tour with ``n_stops`` satellite stops (marginal fill)."""
    if n_stops < 0:
        raise ValueError("stop count must be non-negative")
    takes = intervals.fill(n_stops)
    return math.fsum(t * rate for t, (_, rate) in zip(takes, intervals.intervals))


def suffix_loads(drops: Sequence[float]) -> tuple[float, ...]:
    """Leg loads of a tour delivering ``drops`` in order and returning empty."""
    return tuple(math.fsum(drops[i:]) for i in range(len(drops) + 1))


def demand_sum(instance: Instance, customers: Iterable[int]) -> float:
    by_node = instance.customer_by_node
    return math.fsum(by_node[c].demand_kg for c in sorted(customers))


# ---- solutions -------------------------------------------------------------

@dataclass(frozen=True)
class Route:
    """One vehicle tour: depot -> stops... -> depot with a load on every leg.

    ``loads[i]`` is carried on the leg arriving at ``stops[i]``; the final
    entry is the load on the return leg.
    """

    vehicle: int
    depot: int
    stops: tuple[int, ...]
    loads: tuple[float, ...]

    def legs(self) -> list[tuple[int, int, float]]:
        path = (self.depot, *self.stops, self.depot)
        return [(path[i], path[i + 1], self.loads[i]) for i in range(len(self.stops) + 1)]


@dataclass(frozen=True)
class Solution:
    first_echelon_routes: tuple[Route, ...] = ()
    second_echelon_routes: tuple[Route, ...] = ()
    pickup: Mapping[int, int] = field(default_factory=dict)
    home: Mapping[int, tuple[int, int]] = field(default_factory=dict)

    def to_dict(self) -> dict:
        def route(r: Route) -> dict:
            return {"vehicle": r.vehicle, "depot": r.depot, "stops": list(r.stops), "loads": list(r.loads)}

        return {
            "first_echelon_routes": [route(r) for r in self.first_echelon_routes],
            "second_echelon_routes": [route(r) for r in self.second_echelon_routes],
            "pickup": {str(c): h for c, h in sorted(self.pickup.items())},
            "home": {str(c): list(hk) for c, hk in sorted(self.home.items())},
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "Solution":
        def route(r: Mapping) -> Route:
            return Route(int(r["vehicle"]), int(r["depot"]), tuple(int(s) for s in r["stops"]),
                         tuple(float(x) for x in r["loads"]))

        return cls(
            tuple(route(r) for r in data.get("first_echelon_routes", [])),
            tuple(route(r) for r in data.get("second_echelon_routes", [])),
            {int(c): int(h) for c, h in data.get("pickup", {}).items()},
            {int(c): (int(hk[0]), int(hk[1])) for c, hk in data.get("home", {}).items()},
        )
