"""Epsilon-constraint frontier of total emissions against total distance."""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Sequence

from .core import EMISSIONS, TOTAL_DISTANCE, Instance, Scenario, Solution
from .oracle import EnumerationBudget, solve_exact
from .validate import Metrics, check_feasibility, evaluate, InfeasibleSolution

DOMINANCE_TOL = 1e-6
LEX_TOL = 1e-6
BACKENDS = ("oracle", "external")


@dataclass(frozen=True)
class FrontierPoint:
    emissions_kg: float
    total_distance_km: float
    solution: Solution
    epsilon_used: float | None
    metrics: Metrics | None = None

    def __iter__(self):
        # lets a point stand in for its (emissions, distance) pair
        return iter((self.emissions_kg, self.total_distance_km))


def _coords(p) -> tuple[float, float]:
    e, d = p
    return float(e), float(d)


def filter_dominated(points: Sequence, tol: float = DOMINANCE_TOL) -> list:
    """Points not weakly dominated by another, in input order; duplicates keep the first."""
    pts = [_coords(p) for p in points]
    kept = []
    for i, (e, d) in enumerate(pts):
        beaten = False
        for j, (e2, d2) in enumerate(pts):
            if i == j or e2 > e + tol or d2 > d + tol:
                continue
            if e2 < e - tol or d2 < d - tol or j < i:
                beaten = True
                break
        if not beaten:
            kept.append(points[i])
    return kept


def knee_point(frontier: Sequence) -> int | None:
    """Index of the interior point farthest from the chord joining the extremes."""
    if len(frontier) < 3:
        return None
    (x1, y1), (xn, yn) = _coords(frontier[0]), _coords(frontier[-1])
    chord = math.hypot(xn - x1, yn - y1)
    if chord == 0:
        return None
    best, best_d = None, -1.0
    for i in range(1, len(frontier) - 1):
        xi, yi = _coords(frontier[i])
        d = abs((xn - x1) * (y1 - yi) - (x1 - xi) * (yn - y1)) / chord
        # relative slack keeps ties stable under rescaling of both axes
        if best is None or d > best_d + 1e-9 * max(best_d, 1e-12 * chord):
            best, best_d = i, d
    return best


def _solver(backend: str):
    if backend == "oracle":
        return solve_exact
    if backend == "external":
        from .external import solve_external
        return solve_external
    raise ValueError(f"unknown backend {backend!r}; expected one of {BACKENDS}")


def _solve(backend, instance, scenario, objective, bounds, budget):
    if backend == "oracle":
        return solve_exact(instance, scenario, objective, bounds, budget)
    return _solver(backend)(instance, scenario, objective, bounds)


def _lexicographic(backend, instance, scenario, primary, secondary, bounds, budget):
    """Minimise ``primary``, then ``secondary`` with primary held within LEX_TOL."""
    _, best = _solve(backend, instance, scenario, primary, bounds, budget)
    held = dict(bounds)
    held[primary] = min(held.get(primary, math.inf), best + LEX_TOL)
    solution, _ = _solve(backend, instance, scenario, secondary, held, budget)
    return solution


def _point(instance, scenario, solution, eps) -> FrontierPoint:
    inst = instance.with_fleet(scenario.green_fleet_variant)
    violations = check_feasibility(inst, solution)
    if violations:
        raise InfeasibleSolution(violations)
    m = evaluate(inst, solution, check=False)
    return FrontierPoint(m.total_emissions, m.total_distance, solution, eps, m)


def _eps_task(args):
    backend, instance, scenario, eps, budget = args
    from .core import InfeasibleError
    try:
        sol = _lexicographic(backend, instance, scenario, EMISSIONS, TOTAL_DISTANCE, {TOTAL_DISTANCE: eps}, budget)
    except InfeasibleError:
        return None
    return _point(instance, scenario, sol, eps)


def sweep(
    instance: Instance,
    n_points: int | None = 10,
    backend: str = "oracle",
    scenario: Scenario = Scenario(),
    budget: EnumerationBudget = EnumerationBudget(),
    workers: int = 1,
) -> list[FrontierPoint]:
    """Frontier from the two lexicographic extremes and an epsilon grid on distance.

    With ``n_points=None`` the sweep is adaptive: each step bounds the distance
    just below the previous point, which enumerates the whole frontier.
    """
    if n_points is not None and n_points < 2:
        raise ValueError("n_points must be at least 2")
    _solver(backend)
    low_e = _point(instance, scenario, _lexicographic(
        backend, instance, scenario, EMISSIONS, TOTAL_DISTANCE, {}, budget), None)
    low_d = _point(instance, scenario, _lexicographic(
        backend, instance, scenario, TOTAL_DISTANCE, EMISSIONS, {}, budget), None)
    points = [low_e, low_d]
    d_hi, d_lo = low_e.total_distance_km, low_d.total_distance_km

    if n_points is None:
        current = low_e
        while current.total_distance_km > d_lo + DOMINANCE_TOL:
            eps = current.total_distance_km - DOMINANCE_TOL
            nxt = _eps_task((backend, instance, scenario, eps, budget))
            if nxt is None:
                break
            points.append(nxt)
            current = nxt
    elif n_points > 2 and d_hi > d_lo:
        grid = [d_lo + (d_hi - d_lo) * i / (n_points - 1) for i in range(1, n_points - 1)]
        tasks = [(backend, instance, scenario, eps, budget) for eps in grid]
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                found = list(pool.map(_eps_task, tasks))
        else:
            found = [_eps_task(t) for t in tasks]
        points.extend(p for p in found if p is not None)

    # sort first so filtering keeps the same representative whatever the merge order
    points.sort(key=lambda p: (p.emissions_kg, p.total_distance_km))
    return filter_dominated(points)


def frontier_csv(frontier: Sequence[FrontierPoint]) -> str:
    knee = knee_point(frontier)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["emissions_kg", "total_distance_km", "epsilon", "is_knee"])
    for i, p in enumerate(frontier):
        w.writerow([repr(p.emissions_kg), repr(p.total_distance_km),
                    "" if p.epsilon_used is None else repr(p.epsilon_used), int(i == knee)])
    return buf.getvalue()
