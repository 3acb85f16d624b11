"""Solve a :class:`MilpModel` with the HiGHS MILP solver.

The solver's reported objective is never trusted: its column values are
imported back into a :class:`Solution`, validated and re-evaluated.
"""
from __future__ import annotations

import math
from typing import Mapping

import highspy
import numpy as np

from .core import InfeasibleError, Instance, Route, Scenario, Solution, demand_sum, suffix_loads
from .model import BINARY, EQ, GE, LE, BuildOptions, MilpModel, add_epsilon_constraint, build_model, with_objective
from .mps import import_solution
from .validate import InfeasibleSolution, check_feasibility, evaluate

# tighter than the HiGHS defaults (1e-6/1e-7) so epsilon bounds are not overrun
TOLERANCES = {
    "mip_feasibility_tolerance": 1e-9,
    "primal_feasibility_tolerance": 1e-9,
    "mip_rel_gap": 0.0,
    "mip_abs_gap": 0.0,
}


class ExternalSolverError(RuntimeError):
    pass


def solve_milp(model: MilpModel, time_limit: float | None = None) -> dict[str, float] | None:
    """Optimal column values by name, or None when the model is infeasible."""
    n = len(model.columns)
    lp = highspy.HighsLp()
    lp.num_col_ = n
    lp.num_row_ = len(model.rows)
    lp.col_cost_ = np.array([c.obj for c in model.columns], dtype=float)
    lp.col_lower_ = np.array([c.lower for c in model.columns], dtype=float)
    lp.col_upper_ = np.array([c.upper for c in model.columns], dtype=float)
    lp.row_lower_ = np.array([r.rhs if r.sense in (EQ, GE) else -math.inf for r in model.rows], dtype=float)
    lp.row_upper_ = np.array([r.rhs if r.sense in (EQ, LE) else math.inf for r in model.rows], dtype=float)
    starts, index, value = [0], [], []
    for r in model.rows:
        for j, v in r.coefs:
            index.append(j)
            value.append(v)
        starts.append(len(index))
    lp.a_matrix_.format_ = highspy.MatrixFormat.kRowwise
    lp.a_matrix_.start_ = np.array(starts, dtype=np.int32)
    lp.a_matrix_.index_ = np.array(index, dtype=np.int32)
    lp.a_matrix_.value_ = np.array(value, dtype=float)
    lp.a_matrix_.num_col_ = n
    lp.a_matrix_.num_row_ = len(model.rows)
    lp.integrality_ = [highspy.HighsVarType.kInteger if c.kind == BINARY else highspy.HighsVarType.kContinuous
                       for c in model.columns]

    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.setOptionValue("threads", 1)
    for key, val in TOLERANCES.items():
        h.setOptionValue(key, val)
    if time_limit is not None:
        h.setOptionValue("time_limit", float(time_limit))
    h.passModel(lp)
    h.run()
    status = h.getModelStatus()
    if status == highspy.HighsModelStatus.kInfeasible:
        return None
    if status != highspy.HighsModelStatus.kOptimal:
        raise ExternalSolverError(f"HiGHS stopped without a proven optimum: {h.modelStatusToString(status)}")
    x = h.getSolution().col_value
    return {c.name: float(v) for c, v in zip(model.columns, x) if v != 0}


def polish_loads(instance: Instance, solution: Solution) -> Solution:
    """Replace solver-noisy leg loads by the exact loads implied by the routes.

    Second-echelon routes carry the remaining customer demand. A satellite
    served by a single first-echelon route receives exactly its assigned demand;
    split deliveries keep the solver's drops.
    """
    assigned: dict[int, list[int]] = {}
    for c, h in solution.pickup.items():
        assigned.setdefault(h, []).append(c)
    for c, (h, _) in solution.home.items():
        assigned.setdefault(h, []).append(c)
    visits: dict[int, int] = {}
    for r in solution.first_echelon_routes:
        for h in r.stops:
            visits[h] = visits.get(h, 0) + 1
    by_node = instance.customer_by_node

    def second(r: Route) -> Route:
        if not all(c in by_node for c in r.stops):
            return r
        return Route(r.vehicle, r.depot, r.stops, suffix_loads([by_node[c].demand_kg for c in r.stops]))

    def first(r: Route) -> Route:
        if any(visits.get(h) != 1 for h in r.stops):
            return r
        drops = [demand_sum(instance, assigned.get(h, [])) for h in r.stops]
        return Route(r.vehicle, r.depot, r.stops, suffix_loads(drops))

    return Solution(tuple(first(r) for r in solution.first_echelon_routes),
                    tuple(second(r) for r in solution.second_echelon_routes),
                    solution.pickup, solution.home)


def solve_external(
    instance: Instance,
    scenario: Scenario = Scenario(),
    objective_override: str | None = None,
    bounds: Mapping[str, float] | None = None,
    options: BuildOptions = BuildOptions(valid_inequalities=True, symmetry_breaking=True),
    time_limit: float | None = None,
) -> tuple[Solution, float]:
    """Counterpart of ``oracle.solve_exact`` backed by the MILP model."""
    inst = instance.with_fleet(scenario.green_fleet_variant)
    model = build_model(instance, scenario, options)
    objective = objective_override or scenario.objective
    if objective != model.objective_metric:
        model = with_objective(model, objective)
    for metric, b in (bounds or {}).items():
        model = add_epsilon_constraint(model, metric, b)
    values = solve_milp(model, time_limit)
    if values is None:
        raise InfeasibleError("no feasible solution" + (" within the given bounds" if bounds else ""))
    solution = polish_loads(inst, import_solution(values, model, inst))
    violations = check_feasibility(inst, solution)
    if violations:
        raise InfeasibleSolution(violations)
    return solution, evaluate(inst, solution).metric(objective)
