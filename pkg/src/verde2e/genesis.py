"""Seeded synthetic instance generator.

All randomness comes from one ``random.Random(seed)`` (Mersenne Twister) and
only its ``random()`` method is used, so a seed yields the same instance on
every platform and Python version.
"""
from __future__ import annotations

import json
import math
import random
from dataclasses import asdict, dataclass, field, fields

from .core import (
    CUSTOMER, FIRST, HOME_ONLY_CLASSES, SATELLITE, SECOND, SIZE_CLASSES, WAREHOUSE,
    Customer, Instance, InstanceError, Node, Satellite, Vehicle, euclidean_matrix,
)


@dataclass(frozen=True)
class SizeClass:
    name: str
    max_kg: float
    probability: float


# upper weight and frequency of each order size; lower bound of a class is the
# previous class maximum (extra_small starts at MIN_DEMAND_KG)
DEFAULT_SIZES = (
    SizeClass("extra_small", 0.35, 0.30),
    SizeClass("small", 2.0, 0.40),
    SizeClass("medium", 5.0, 0.25),
    SizeClass("large", 30.0, 0.05),
)
MIN_DEMAND_KG = 0.05


@dataclass(frozen=True)
class VehicleProfile:
    emission_factor_kg_per_km: float
    rho_empty_l_per_km: float
    rho_full_l_per_km: float
    capacity_packages: float
    low_capacity_packages: float | None = None


@dataclass(frozen=True)
class GenConfig:
    n_customers: int = 5
    n_satellites: int = 3
    area_extent_km: tuple[float, float] = (3.0, 3.0)
    warehouse_offset_km: float = 5.0
    seed: int = 0
    d_max_menu_m: tuple[float, ...] = (0, 500, 1000, 1500, 2000)
    d_green_menu_m: tuple[float, ...] = (0, 500)
    size_distribution: tuple[SizeClass, ...] = DEFAULT_SIZES
    truck: VehicleProfile = VehicleProfile(0.38, 0.30, 0.80, 400)
    van: VehicleProfile = VehicleProfile(0.30, 0.15, 0.35, 80)
    green_van: VehicleProfile = VehicleProfile(0.0, 0.0, 0.0, 50, 25)
    satellite_capacity_packages: float = 15
    satellite_jitter: float = 0.25
    customer_emission_factor_kg_per_km: float = 0.15
    # explicit (trucks, vans, green vans); None sizes each type as ceil(demand / Q) + 1
    fleet_counts: tuple[int, int, int] | None = None
    name: str | None = None

    def __post_init__(self):
        if self.n_customers < 1 or self.n_satellites < 1:
            raise InstanceError("need at least one customer and one satellite")
        if len(self.area_extent_km) != 2 or min(self.area_extent_km) <= 0:
            raise InstanceError("area extent must be two positive lengths")
        if self.warehouse_offset_km < 0:
            raise InstanceError("warehouse offset must be non-negative")
        if not 0 <= self.satellite_jitter < 1:
            raise InstanceError("satellite jitter must lie in [0, 1)")
        probs = [s.probability for s in self.size_distribution]
        if any(p < 0 for p in probs) or abs(math.fsum(probs) - 1.0) > 1e-9:
            raise InstanceError("size class probabilities must be non-negative and sum to 1")
        maxes = [s.max_kg for s in self.size_distribution]
        if maxes[0] <= MIN_DEMAND_KG or any(b <= a for a, b in zip(maxes, maxes[1:])):
            raise InstanceError("size class maxima must increase")
        if not self.valid_pairs():
            raise InstanceError("menus admit no (d_green, d_max) pair with d_green <= d_max")
        if any(m < 0 for m in (*self.d_max_menu_m, *self.d_green_menu_m)):
            raise InstanceError("menu radii must be non-negative")
        if self.fleet_counts is not None and (len(self.fleet_counts) != 3 or self.fleet_counts[0] < 1
                                              or self.fleet_counts[1] + self.fleet_counts[2] < 1):
            raise InstanceError("fleet counts need at least one truck and one second-echelon vehicle")

    def valid_pairs(self) -> list[tuple[float, float]]:
        """(d_green, d_max) pairs in metres with d_green <= d_max."""
        return [(g, m) for m in self.d_max_menu_m for g in self.d_green_menu_m if g <= m]

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "GenConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise InstanceError(f"unknown config keys: {sorted(unknown)}")
        kw = dict(data)
        if "size_distribution" in kw:
            kw["size_distribution"] = tuple(SizeClass(**s) for s in kw["size_distribution"])
        for key in ("truck", "van", "green_van"):
            if key in kw:
                kw[key] = VehicleProfile(**kw[key])
        for key in ("area_extent_km", "d_max_menu_m", "d_green_menu_m", "fleet_counts"):
            if kw.get(key) is not None:
                kw[key] = tuple(kw[key])
        try:
            return cls(**kw)
        except TypeError as exc:
            raise InstanceError(str(exc)) from exc


def load_config(path) -> GenConfig:
    with open(path, encoding="utf-8") as fh:
        return GenConfig.from_dict(json.load(fh))


def expected_package_kg(config: GenConfig) -> float:
    """Mean order weight with every class represented by its range midpoint."""
    lower = MIN_DEMAND_KG
    total = 0.0
    for s in config.size_distribution:
        total += s.probability * (lower + s.max_kg) / 2
        lower = s.max_kg
    return total


@dataclass(frozen=True)
class SampledCustomer:
    position: tuple[float, float]
    size_class: str
    demand_kg: float
    d_green_km: float
    d_max_km: float


def _categorical(u: float, probs) -> int:
    acc = 0.0
    for i, p in enumerate(probs):
        acc += p
        if u < acc:
            return i
    return len(probs) - 1


def sample_customers(config: GenConfig, rng: random.Random, n: int | None = None) -> list[SampledCustomer]:
    """Draw customer positions, sizes, demands and radii in a fixed order."""
    width, height = config.area_extent_km
    classes = config.size_distribution
    probs = [s.probability for s in classes]
    pairs = config.valid_pairs()
    out = []
    for _ in range(config.n_customers if n is None else n):
        x = width * rng.random()
        y = height * rng.random()
        ci = _categorical(rng.random(), probs)
        lo = MIN_DEMAND_KG if ci == 0 else classes[ci - 1].max_kg
        hi = classes[ci].max_kg
        # 1 - u lies in (0, 1], giving a demand in (lo, hi]
        demand = lo + (hi - lo) * (1.0 - rng.random())
        g, m = pairs[min(int(rng.random() * len(pairs)), len(pairs) - 1)]
        name = classes[ci].name
        if name in HOME_ONLY_CLASSES:
            g = m = 0
        out.append(SampledCustomer((x, y), name, demand, g / 1000.0, m / 1000.0))
    return out


def zone_grid(n: int, width: float, height: float) -> tuple[int, int]:
    """(columns, rows) of an exact n-zone tiling, longer side split more often."""
    rows = max(r for r in range(1, int(math.isqrt(n)) + 1) if n % r == 0)
    cols = n // rows
    return (cols, rows) if width >= height else (rows, cols)


def generate(config: GenConfig) -> Instance:
    rng = random.Random(config.seed)
    width, height = config.area_extent_km
    cols, rows = zone_grid(config.n_satellites, width, height)
    zw, zh = width / cols, height / rows
    sat_pos = []
    for r in range(rows):
        for c in range(cols):
            jx = (2 * rng.random() - 1) * config.satellite_jitter * zw / 2
            jy = (2 * rng.random() - 1) * config.satellite_jitter * zh / 2
            sat_pos.append(((c + 0.5) * zw + jx, (r + 0.5) * zh + jy))
    sampled = sample_customers(config, rng)

    positions = [(width + config.warehouse_offset_km, height), *sat_pos, *(s.position for s in sampled)]
    n_sat = len(sat_pos)
    nodes = [Node(0, WAREHOUSE, positions[0])]
    nodes += [Node(1 + i, SATELLITE, p) for i, p in enumerate(sat_pos)]
    nodes += [Node(1 + n_sat + i, CUSTOMER, s.position) for i, s in enumerate(sampled)]
    customers = tuple(
        Customer(1 + n_sat + i, s.demand_kg, s.d_max_km, s.d_green_km, s.size_class)
        for i, s in enumerate(sampled)
    )
    pkg = expected_package_kg(config)
    satellites = tuple(Satellite(1 + i, config.satellite_capacity_packages * pkg) for i in range(n_sat))

    demand = math.fsum(s.demand_kg for s in sampled)
    profiles = ((FIRST, config.truck), (SECOND, config.van), (SECOND, config.green_van))
    vehicles = []
    for t, (echelon, p) in enumerate(profiles):
        cap = p.capacity_packages * pkg
        low = None if p.low_capacity_packages is None else p.low_capacity_packages * pkg
        if config.fleet_counts is not None:
            count = config.fleet_counts[t]
        else:
            count = math.ceil(demand / (cap if low is None else low)) + 1
        for _ in range(count):
            vehicles.append(Vehicle(len(vehicles), echelon, cap, p.emission_factor_kg_per_km,
                                    p.rho_empty_l_per_km, p.rho_full_l_per_km, low))
    return Instance(
        nodes=tuple(nodes), customers=customers, satellites=satellites, vehicles=tuple(vehicles),
        distance_km=euclidean_matrix(positions),
        customer_emission_factor_kg_per_km=config.customer_emission_factor_kg_per_km,
        name=config.name or f"gen_c{config.n_customers}_h{config.n_satellites}_s{config.seed}",
        distance_mode="euclidean",
    )
