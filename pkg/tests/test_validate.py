import json
import math

import pytest

from verde2e.core import FIRST, SECOND, Route, Scenario, Solution, Vehicle
from verde2e.oracle import solve_exact
from verde2e.validate import (
    CAPACITY_EXCEEDED, DISCONNECTED_ROUTE, INACTIVE_SATELLITE_USED, INELIGIBLE_PICKUP, LOAD_IMBALANCE,
    METRIC_COLUMNS, NONEMPTY_RETURN, UNSERVED_CUSTOMER, VEHICLE_MULTI_SATELLITE,
    InfeasibleSolution, check_feasibility, evaluate, metrics_to_csv, metrics_to_json,
)

from instances import t1_instance

TRUCK_ROUTE = Route(0, 0, (1,), (2.0, 0.0))
PICKUP = Solution((TRUCK_ROUTE,), (), {2: 1}, {})
HOME = Solution((TRUCK_ROUTE,), (Route(1, 1, (2,), (2.0, 0.0)),), {}, {2: (1, 1)})


def codes(inst, sol):
    return {v.code for v in check_feasibility(inst, sol)}


def test_empty_solution_leaves_customer_unserved(t1):
    assert codes(t1, Solution()) == {UNSERVED_CUSTOMER}


def test_pickup_beyond_d_max(t1):
    far = t1_instance(customers=(t1.customers[0].__class__(2, 2.0, 0.3, 0.0, "small"),))
    assert INELIGIBLE_PICKUP in codes(far, PICKUP)


def test_both_t1_solutions_feasible(t1):
    assert check_feasibility(t1, PICKUP) == []
    assert check_feasibility(t1, HOME) == []


def test_pickup_at_unvisited_satellite(t1):
    assert INACTIVE_SATELLITE_USED in codes(t1, Solution((), (), {2: 1}, {}))


def test_load_imbalance(t1):
    assert codes(t1, Solution((Route(0, 0, (1,), (3.0, 0.0)),), (), {2: 1}, {})) == {LOAD_IMBALANCE}
    assert codes(t1, Solution((Route(0, 0, (1,), (3.0, 1.0)),), (), {2: 1}, {})) == {NONEMPTY_RETURN}


def test_vehicle_capacity_exceeded(t1):
    small = t1_instance(vehicles=(Vehicle(0, FIRST, 1.0, 0.38, 0.3, 0.8), Vehicle(1, SECOND, 50.0, 0.0, 0.0, 0.0)))
    assert CAPACITY_EXCEEDED in codes(small, PICKUP)


def test_broken_route_depot(t1):
    sol = Solution((TRUCK_ROUTE,), (Route(1, 0, (2,), (2.0, 0.0)),), {}, {2: (1, 1)})
    found = codes(t1, sol)
    assert found & {DISCONNECTED_ROUTE, VEHICLE_MULTI_SATELLITE}


def test_t1_pickup_metrics(t1):
    m = evaluate(t1, PICKUP)
    assert m.total_emissions == pytest.approx(2.418, abs=1e-12)
    assert (m.d_C0, m.d_C, m.e_C) == (pytest.approx(0.4), 0.0, 0.0)
    assert m.company_distance == 20.0
    assert m.e_stops == pytest.approx(0.10)
    assert m.e_K1_with_stops == pytest.approx(2.418)


def test_zero_emission_van_counts_distance_only(t1):
    m = evaluate(t1, HOME)
    assert m.e_K2 == 0.0
    assert m.d_K2 == pytest.approx(0.8)
    assert m.customers_at_home_pct == 100.0
    assert m.avg_pickup_dist_em_km is None


def test_active_pickup_only(t1):
    assert evaluate(t1, PICKUP).active_pickup_only == 1
    assert evaluate(t1, HOME).active_pickup_only == 0


def test_infeasible_rejected(t1):
    with pytest.raises(InfeasibleSolution):
        evaluate(t1, Solution())


@pytest.mark.parametrize("i", range(15))
def test_additivity(suite, i):
    sol, _ = solve_exact(suite[i], Scenario.named("td"))
    m = evaluate(suite[i], sol)
    assert m.total_emissions == m.e_K1 + m.e_K2 + m.e_C + m.e_stops
    assert m.total_distance == m.d_K1 + m.d_K2 + m.d_C0 + m.d_C
    assert m.company_distance == m.d_K1 + m.d_K2
    assert all(v >= 0 for v in (m.e_K1, m.e_K2, m.e_C, m.e_stops, m.d_K1, m.d_K2, m.d_C0, m.d_C))


def test_relabel_identical_vehicles():
    twin = (Vehicle(0, FIRST, 100.0, 0.38, 0.3, 0.8), Vehicle(1, SECOND, 50.0, 0.3, 0.15, 0.35),
            Vehicle(2, SECOND, 50.0, 0.3, 0.15, 0.35))
    inst = t1_instance(vehicles=twin)
    a = Solution((TRUCK_ROUTE,), (Route(1, 1, (2,), (2.0, 0.0)),), {}, {2: (1, 1)})
    b = Solution((TRUCK_ROUTE,), (Route(2, 1, (2,), (2.0, 0.0)),), {}, {2: (1, 2)})
    assert evaluate(inst, a) == evaluate(inst, b)


def test_serialization_columns(t1):
    m = evaluate(t1, PICKUP)
    data = json.loads(metrics_to_json(m))
    assert set(data) == set(METRIC_COLUMNS)
    header = metrics_to_csv([({"instance": "T1"}, m)]).splitlines()[0].split(",")
    assert header[-len(METRIC_COLUMNS):] == METRIC_COLUMNS
    assert math.isclose(data["total_emissions"], 2.418)
