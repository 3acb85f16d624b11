"""Exact solver for desk-scale instances by structured enumeration.

The search has four layers: customer service mode and satellite, the split of
home-delivery customers among second-echelon vehicles, the visiting order of
every route, and the split of active satellites among first-echelon vehicles.
Second- and first-echelon subproblems depend only on the home partition and on
the per-satellite demand vector, so both are memoised and reduced to their
Pareto sets in exact arithmetic before being combined.

Every float term is converted to an integer multiple of 2**-1074, so sums of
terms are exact and rounding happens once, the same way ``math.fsum`` does in
:func:`verde2e.validate.evaluate`.  Reported objective values therefore match
the evaluator bit for bit.

Solutions are canonical: every active satellite is served by exactly one
first-echelon tour, and satellites without assigned customers are not visited.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace
from typing import Mapping

from .core import (
    COMPANY_DISTANCE, EMISSIONS, LOAD_TOL, METRICS, TOTAL_DISTANCE,
    BudgetExceeded, InfeasibleError, Instance, Route, Scenario, Solution, customer_trip_emissions,
    demand_sum, is_zero_emission_trip, leg_emissions, stop_emissions, suffix_loads,
)
from .validate import combine_totals, evaluate

__all__ = ["EnumerationBudget", "Solution", "Route", "solve_exact", "enumerate_feasible_points",
           "canonical_labels"]

_SCALE = 1 << 1074
_PICK, _HOME = 0, 1


def _exact(v: float) -> int:
    n, d = v.as_integer_ratio()
    return n * (_SCALE // d)


def _round(n: int) -> float:
    return n / _SCALE


@dataclass(frozen=True)
class EnumerationBudget:
    max_customers: int = 6
    max_satellites: int = 3
    max_vehicles_per_echelon: int = 2

    def check(self, instance: Instance) -> None:
        problems = []
        if len(instance.customers) > self.max_customers:
            problems.append(f"{len(instance.customers)} customers > {self.max_customers}")
        if len(instance.satellites) > self.max_satellites:
            problems.append(f"{len(instance.satellites)} satellites > {self.max_satellites}")
        for name, fleet in (("first", instance.first_echelon), ("second", instance.second_echelon)):
            if len(fleet) > self.max_vehicles_per_echelon:
                problems.append(f"{len(fleet)} {name}-echelon vehicles > {self.max_vehicles_per_echelon}")
        if problems:
            raise BudgetExceeded("enumeration budget exceeded: " + ", ".join(problems))


def _pareto(cands, dims: int):
    """Drop candidates weakly dominated on their first ``dims`` entries; earlier wins ties."""
    keep = []
    for c in cands:
        key = c[:dims]
        if any(all(k[i] <= key[i] for i in range(dims)) for k in keep):
            continue
        keep = [k for k in keep if not all(key[i] <= k[i] for i in range(dims))]
        keep.append(c)
    return keep


class _Enumerator:
    """Shared machinery for the optimiser and the exhaustive image."""

    def __init__(self, instance: Instance, full_home_delivery: bool, exhaustive: bool):
        self.inst = instance
        self.exhaustive = exhaustive
        self.customers = instance.customer_nodes
        self.sats = instance.satellite_nodes
        self.k1 = instance.first_echelon
        self.k2 = instance.second_echelon
        by_node = instance.customer_by_node
        self.options = {}
        self.trip = {}
        for c in self.customers:
            opts = []
            if not full_home_delivery:
                for h in instance.eligible(c):
                    opts.append((_PICK, h))
                    dist = instance.d(c, h)
                    e = _exact(customer_trip_emissions(by_node[c], h, instance))
                    zero = is_zero_emission_trip(by_node[c], dist)
                    self.trip[c, h] = (e, _exact(dist) if zero else 0, 0 if zero else _exact(dist))
            opts.extend((_HOME, h) for h in self.sats)
            self.options[c] = opts
        self._route2 = {}
        self._route1 = {}
        self._k2 = {}
        self._k1 = {}

    # -- routes ------------------------------------------------------------

    def _tours(self, vehicle, depot, stops, drops_of):
        """(exact emissions, exact distance, order) for every visiting order."""
        d = self.inst.d
        out = []
        for order in itertools.permutations(stops):
            loads = suffix_loads([drops_of[s] for s in order])
            path = (depot, *order, depot)
            e = dist = 0
            for i in range(len(path) - 1):
                leg = d(path[i], path[i + 1])
                e += _exact(leg_emissions(vehicle, leg, loads[i]))
                dist += _exact(leg)
            out.append((e, dist, order))
        return out

    def route2(self, k: int, h: int, custs: tuple[int, ...]):
        key = (k, h, custs)
        if key not in self._route2:
            drops = {c: self.inst.customer_by_node[c].demand_kg for c in custs}
            tours = self._tours(self.k2[k], h, custs, drops)
            self._route2[key] = self._reduce(tours, 2)
        return self._route2[key]

    def route1(self, k: int, sats: tuple[int, ...], drops: Mapping[int, float]):
        key = (k, tuple((h, drops[h]) for h in sats))
        if key not in self._route1:
            stop_e = _exact(stop_emissions(len(sats), self.inst.stop_intervals))
            tours = [(e, stop_e, dist, order) for e, dist, order in self._tours(self.k1[k], 0, sats, drops)]
            self._route1[key] = self._reduce(tours, 3)
        return self._route1[key]

    def _reduce(self, cands, dims):
        if self.exhaustive:
            seen = {}
            for c in cands:
                seen.setdefault(c[:dims], c)
            return list(seen.values())
        return _pareto(cands, dims)

    # -- echelon subproblems ------------------------------------------------------------

    def second_echelon(self, homes: tuple[tuple[int, tuple[int, ...]], ...]):
        """Candidates (e, d, plan) with plan = ((k_index, satellite, order), ...)."""
        if homes in self._k2:
            return self._k2[homes]
        inst = self.inst
        sat_of = {c: h for h, custs in homes for c in custs}
        flat = sorted(sat_of)
        cands = []
        if not flat:
            cands = [(0, 0, ())]
        elif self.k2:
            for assign in itertools.product(range(len(self.k2)), repeat=len(flat)):
                groups: dict[int, list[int]] = {}
                ok = True
                for c, k in zip(flat, assign):
                    g = groups.setdefault(k, [])
                    if g and sat_of[g[0]] != sat_of[c]:
                        ok = False
                        break
                    g.append(c)
                if not ok:
                    continue
                if any(demand_sum(inst, g) > self.k2[k].capacity_kg + LOAD_TOL for k, g in groups.items()):
                    continue
                partial = [(0, 0, ())]
                for k in sorted(groups):
                    custs = tuple(groups[k])
                    h = sat_of[custs[0]]
                    partial = self._reduce(
                        [(pe + e, pd + dd, plan + ((k, h, order),))
                         for pe, pd, plan in partial for e, dd, order in self.route2(k, h, custs)], 2)
                cands.extend(partial)
            cands = self._reduce(cands, 2)
        self._k2[homes] = cands
        return cands

    def first_echelon(self, drops: tuple[tuple[int, float], ...]):
        """Candidates (e, stop_e, d, plan) with plan = ((k_index, order), ...)."""
        if drops in self._k1:
            return self._k1[drops]
        sats = [h for h, _ in drops]
        drop_of = dict(drops)
        cands = []
        if not sats:
            cands = [(0, 0, 0, ())]
        elif self.k1:
            for assign in itertools.product(range(len(self.k1)), repeat=len(sats)):
                groups: dict[int, list[int]] = {}
                for h, k in zip(sats, assign):
                    groups.setdefault(k, []).append(h)
                if any(math.fsum([drop_of[h] for h in g]) > self.k1[k].capacity_kg + LOAD_TOL
                       for k, g in groups.items()):
                    continue
                partial = [(0, 0, 0, ())]
                for k in sorted(groups):
                    tours = self.route1(k, tuple(groups[k]), drop_of)
                    partial = self._reduce(
                        [(pe + e, ps + s, pd + dd, plan + ((k, order),))
                         for pe, ps, pd, plan in partial for e, s, dd, order in tours], 3)
                cands.extend(partial)
            cands = self._reduce(cands, 3)
        self._k1[drops] = cands
        return cands

    # -- customer layer ------------------------------------------------------

    def leaves(self, prune=None):
        """Yield (choices, customer-part exact components) for capacity-feasible assignments.

        ``prune(eC, dC0, dC)`` may return True to cut a partial assignment.
        """
        inst = self.inst
        caps = {h: inst.satellite_by_node[h].capacity_kg for h in self.sats}
        demand = {c: inst.customer_by_node[c].demand_kg for c in self.customers}
        n = len(self.customers)
        choice: list = [None] * n
        load = {h: 0.0 for h in self.sats}

        def rec(i, eC, dC0, dC):
            if prune is not None and prune(eC, dC0, dC):
                return
            if i == n:
                by_sat: dict[int, list[int]] = {}
                for c, (_, h) in zip(self.customers, choice):
                    by_sat.setdefault(h, []).append(c)
                if all(demand_sum(inst, cs) <= caps[h] + LOAD_TOL for h, cs in by_sat.items()):
                    yield tuple(choice), (eC, dC0, dC)
                return
            c = self.customers[i]
            for mode, h in self.options[c]:
                if load[h] + demand[c] > caps[h] + 2 * LOAD_TOL:
                    continue
                load[h] += demand[c]
                choice[i] = (mode, h)
                if mode == _PICK:
                    e, z, m = self.trip[c, h]
                    yield from rec(i + 1, eC + e, dC0 + z, dC + m)
                else:
                    yield from rec(i + 1, eC, dC0, dC)
                load[h] -= demand[c]
            choice[i] = None

        yield from rec(0, 0, 0, 0)

    def split(self, choices):
        homes: dict[int, list[int]] = {}
        assigned: dict[int, list[int]] = {}
        for c, (mode, h) in zip(self.customers, choices):
            assigned.setdefault(h, []).append(c)
            if mode == _HOME:
                homes.setdefault(h, []).append(c)
        homes_key = tuple((h, tuple(cs)) for h, cs in sorted(homes.items()))
        drops_key = tuple((h, demand_sum(self.inst, cs)) for h, cs in sorted(assigned.items()))
        return homes_key, drops_key

    def build(self, choices, plan2, plan1, drops_key) -> Solution:
        inst = self.inst
        pickup = {c: h for c, (mode, h) in zip(self.customers, choices) if mode == _PICK}
        home = {}
        routes2 = []
        for k, h, order in plan2:
            vid = self.k2[k].id
            loads = suffix_loads([inst.customer_by_node[c].demand_kg for c in order])
            routes2.append(Route(vid, h, tuple(order), loads))
            for c in order:
                home[c] = (h, vid)
        drop_of = dict(drops_key)
        routes1 = [Route(self.k1[k].id, 0, tuple(order), suffix_loads([drop_of[h] for h in order]))
                   for k, order in plan1]
        return canonical_labels(inst, Solution(tuple(routes1), tuple(routes2), pickup, home))


def canonical_labels(instance: Instance, solution: Solution) -> Solution:
    """Relabel vehicles inside each interchangeable class so the lowest ids are used first."""
    mapping: dict[int, int] = {}
    for fleet, routes in ((instance.first_echelon, solution.first_echelon_routes),
                          (instance.second_echelon, solution.second_echelon_routes)):
        used = {r.vehicle for r in routes if r.stops}
        classes: dict[tuple, list[int]] = {}
        for v in fleet:
            classes.setdefault((v.echelon, v.profile()), []).append(v.id)
        for ids in classes.values():
            in_use = [i for i in ids if i in used]
            mapping.update(zip(in_use, ids[:len(in_use)]))

    def relabel(routes):
        return tuple(sorted((replace(r, vehicle=mapping.get(r.vehicle, r.vehicle)) for r in routes if r.stops),
                            key=lambda r: r.vehicle))

    return Solution(
        relabel(solution.first_echelon_routes),
        relabel(solution.second_echelon_routes),
        dict(solution.pickup),
        {c: (h, mapping.get(k, k)) for c, (h, k) in solution.home.items()},
    )


def _metric_values(k1c, k2c, cust):
    e1, st, d1 = k1c
    e2, d2 = k2c
    eC, dC0, dC = cust
    em, td, cd = combine_totals(_round(e1), _round(st), _round(e2), _round(eC),
                                _round(d1), _round(d2), _round(dC0), _round(dC))
    return {EMISSIONS: em, TOTAL_DISTANCE: td, COMPANY_DISTANCE: cd}


def solve_exact(
    instance: Instance,
    scenario: Scenario = Scenario(),
    objective_override: str | None = None,
    bounds: Mapping[str, float] | None = None,
    budget: EnumerationBudget = EnumerationBudget(),
) -> tuple[Solution, float]:
    """Optimal canonical solution of ``instance`` under ``scenario``.

    ``bounds`` maps metric names to upper limits (epsilon constraints). The
    objective value returned is the evaluator's value for the returned solution.
    """
    objective = objective_override or scenario.objective
    if objective not in METRICS:
        raise ValueError(f"unknown objective {objective!r}")
    bounds = dict(bounds or {})
    for m in bounds:
        if m not in METRICS:
            raise ValueError(f"unknown bounded metric {m!r}")
    inst = instance.with_fleet(scenario.green_fleet_variant)
    budget.check(inst)
    en = _Enumerator(inst, scenario.full_home_delivery, exhaustive=False)

    best = None
    best_val = float("inf")

    def partial_values(eC, dC0, dC):
        return _metric_values((0, 0, 0), (0, 0), (eC, dC0, dC))

    def prune(eC, dC0, dC):
        vals = partial_values(eC, dC0, dC)
        if vals[objective] > best_val:
            return True
        return any(vals[m] > b for m, b in bounds.items())

    for choices, cust in en.leaves(prune):
        homes_key, drops_key = en.split(choices)
        k2 = en.second_echelon(homes_key)
        if not k2:
            continue
        k1 = en.first_echelon(drops_key)
        for c1 in k1:
            for c2 in k2:
                vals = _metric_values(c1[:3], c2[:2], cust)
                if any(vals[m] > b for m, b in bounds.items()):
                    continue
                if vals[objective] < best_val:
                    best_val = vals[objective]
                    best = (choices, c2[2], c1[3], drops_key)
    if best is None:
        raise InfeasibleError("no feasible solution" + (" within the given bounds" if bounds else ""))
    solution = en.build(*best)
    return solution, evaluate(inst, solution).metric(objective)


def enumerate_feasible_points(
    instance: Instance,
    full_home_delivery: bool = False,
    budget: EnumerationBudget = EnumerationBudget(),
    tol: float = 1e-9,
) -> list[tuple[float, float]]:
    """(total emissions, total distance) of every canonical feasible solution, deduplicated."""
    budget.check(instance)
    en = _Enumerator(instance, full_home_delivery, exhaustive=True)
    points = set()
    for choices, cust in en.leaves():
        homes_key, drops_key = en.split(choices)
        k2 = en.second_echelon(homes_key)
        if not k2:
            continue
        for c1 in en.first_echelon(drops_key):
            for c2 in k2:
                vals = _metric_values(c1[:3], c2[:2], cust)
                points.add((vals[EMISSIONS], vals[TOTAL_DISTANCE]))
    kept: list[tuple[float, float]] = []
    for p in sorted(points):
        j = len(kept) - 1
        dup = False
        while j >= 0 and p[0] - kept[j][0] <= tol:
            if abs(p[1] - kept[j][1]) <= tol:
                dup = True
                break
            j -= 1
        if not dup:
            kept.append(p)
    return kept
