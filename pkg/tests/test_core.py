import json
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from verde2e.core import (
    CUSTOMER, DIST_TOL, FIRST, SATELLITE, SECOND, WAREHOUSE,
    Customer, EmissionIntervals, Instance, InstanceError, Node, Satellite, Scenario, Vehicle,
    customer_trip_emissions, eligible_satellites, euclidean_matrix, fcr, instance_from_dict,
    is_zero_emission_trip, load_instance, stop_emissions,
)

from instances import t1_instance, tiny_instance


def line_instance(sat_km, d_max, d_green=0.0):
    """Customer at the origin, satellites on the x axis, warehouse far away."""
    pos = [(50.0, 0.0), *[(x, 0.0) for x in sat_km], (0.0, 0.0)]
    n_h = len(sat_km)
    nodes = (Node(0, WAREHOUSE, pos[0]), *(Node(1 + i, SATELLITE, pos[1 + i]) for i in range(n_h)),
             Node(1 + n_h, CUSTOMER, pos[-1]))
    return Instance(
        nodes, (Customer(1 + n_h, 1.0, d_max, d_green),), tuple(Satellite(1 + i, 10.0) for i in range(n_h)),
        (Vehicle(0, FIRST, 10.0, 0.38, 0.3, 0.8), Vehicle(1, SECOND, 10.0, 0.0, 0.0, 0.0)),
        euclidean_matrix(pos),
    )


def test_eligibility_zero_radius():
    inst = line_instance([0.5], 0.0)
    assert eligible_satellites(inst.customers[0], inst) == set()


def test_eligibility_threshold():
    inst = line_instance([0.5, 1.5, 2.5], 2.0)
    assert eligible_satellites(inst.customers[0], inst) == {1, 2}


def test_eligibility_boundary_inclusive():
    inst = line_instance([2.0], 2.0)
    assert eligible_satellites(inst.customers[0], inst) == {1}


@given(st.lists(st.floats(0.0, 5.0), min_size=1, max_size=4), st.floats(0.0, 3.0), st.floats(0.0, 3.0))
def test_eligibility_monotone_in_radius(sats, r1, r2):
    lo, hi = sorted((r1, r2))
    small = line_instance(sats, lo)
    large = line_instance(sats, hi)
    assert eligible_satellites(small.customers[0], small) <= eligible_satellites(large.customers[0], large)


def test_trip_inside_green_radius_is_free():
    inst = line_instance([0.3], 2.0, d_green=0.5)
    assert customer_trip_emissions(inst.customers[0], 1, inst) == 0.0


def test_trip_emissions_one_way():
    inst = line_instance([1.2], 2.0, d_green=0.5)
    assert customer_trip_emissions(inst.customers[0], 1, inst) == pytest.approx(0.18, abs=1e-12)


def test_trip_to_ineligible_satellite_rejected():
    inst = line_instance([2.5], 2.0, d_green=0.5)
    with pytest.raises(ValueError):
        customer_trip_emissions(inst.customers[0], 1, inst)


@given(st.lists(st.floats(0.0, 3.0), min_size=1, max_size=4), st.floats(0.0, 3.0), st.floats(0.0, 3.0))
def test_trip_free_iff_within_green(sats, a, b):
    d_green, d_max = sorted((a, b))
    inst = line_instance(sats, d_max, d_green)
    c = inst.customers[0]
    for h in inst.eligible(c.node):
        dist = inst.d(c.node, h)
        zero = is_zero_emission_trip(c, dist)
        assert zero == (dist <= d_green + DIST_TOL)
        assert customer_trip_emissions(c, h, inst) == (0.0 if zero else 0.15 * dist)


VAN = Vehicle(1, SECOND, 100.0, 0.3, 0.2, 0.7)


def test_fcr_examples():
    assert fcr(VAN, 0.0) == 0.2
    assert fcr(VAN, 100.0) == pytest.approx(0.7, abs=1e-15)
    assert fcr(VAN, 50.0) == pytest.approx(0.45, abs=1e-15)
    assert fcr(VAN, 50.0, traversed=False) == 0.0


def test_fcr_rejects_overload():
    with pytest.raises(ValueError):
        fcr(VAN, 100.5)


@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0), st.floats(1.0, 500.0), st.floats(0.0, 1.0))
def test_fcr_affine_and_bounded(r1, r2, q, frac):
    lo, hi = sorted((r1, r2))
    v = Vehicle(0, SECOND, q, 0.3, lo, hi)
    load = q * frac
    val = fcr(v, load)
    assert lo - 1e-12 <= val <= hi + 1e-12
    mid = (fcr(v, 0.0) + fcr(v, q)) / 2
    assert fcr(v, q / 2) == pytest.approx(mid, abs=1e-12)


@pytest.mark.parametrize("n, expected", [(0, 0.0), (1, 0.10), (3, 0.40), (6, 1.15)])
def test_stop_emissions_marginal_fill(n, expected):
    assert stop_emissions(n, EmissionIntervals.default()) == pytest.approx(expected, abs=1e-12)


rates = st.lists(st.floats(0.0, 2.0), min_size=1, max_size=4).map(sorted)


@given(rates, st.lists(st.integers(1, 4), min_size=4, max_size=4), st.integers(0, 20))
def test_stop_marginals_non_decreasing(rs, caps, n):
    iv = EmissionIntervals(tuple((caps[i] if i < len(rs) - 1 else None, r) for i, r in enumerate(rs)))
    a, b, c = (stop_emissions(k, iv) for k in (n, n + 1, n + 2))
    assert b >= a - 1e-12
    assert c - b >= b - a - 1e-12


@given(st.floats(0.0, 2.0), st.integers(0, 30))
def test_equal_rates_are_linear(r, n):
    iv = EmissionIntervals(((1, r), (3, r), (None, r)))
    assert stop_emissions(n, iv) == pytest.approx(n * r, abs=1e-9)


def test_interval_invariants():
    with pytest.raises(InstanceError):
        EmissionIntervals(((1, 0.3), (None, 0.1)))
    with pytest.raises(InstanceError):
        EmissionIntervals(((None, 0.1), (2, 0.3)))


def test_customer_invariants():
    with pytest.raises(InstanceError):
        Customer(1, 1.0, 0.5, 1.0)
    with pytest.raises(InstanceError):
        Customer(1, 0.0, 0.5, 0.0)
    with pytest.raises(InstanceError):
        Customer(1, 1.0, 0.5, 0.0, "large")


def test_vehicle_invariants():
    with pytest.raises(InstanceError):
        Vehicle(0, FIRST, 10.0, 0.38, 0.8, 0.3)
    with pytest.raises(InstanceError):
        Vehicle(0, "third", 10.0, 0.38, 0.3, 0.8)


def test_triangle_inequality_enforced():
    inst = t1_instance()
    bad = [list(r) for r in inst.distance_km]
    bad[0][1] = bad[1][0] = 30.0
    with pytest.raises(InstanceError, match="triangle"):
        t1_instance(distance_km=tuple(tuple(r) for r in bad))


def test_warehouse_must_be_node_zero():
    inst = t1_instance()
    nodes = (Node(0, SATELLITE, (0, 0)), Node(1, WAREHOUSE, (10, 0)), inst.nodes[2])
    with pytest.raises(InstanceError):
        t1_instance(nodes=nodes, satellites=(Satellite(0, 10.0),))


@pytest.mark.parametrize("seed", range(5))
def test_json_round_trip(tmp_path, seed):
    inst = tiny_instance(seed)
    path = tmp_path / "inst.json"
    inst.save(path)
    back = load_instance(path)
    assert back.to_json() == inst.to_json()
    assert back.distance_km == inst.distance_km


def test_matrix_mode_round_trip():
    inst = t1_instance(distance_mode="matrix")
    data = json.loads(inst.to_json())
    assert "distance_km" in data
    assert instance_from_dict(data).distance_km == inst.distance_km


def test_schema_version_checked():
    data = json.loads(t1_instance().to_json())
    data["schema"] = "other"
    with pytest.raises(InstanceError):
        instance_from_dict(data)


@pytest.mark.parametrize("name, objective, variant", [
    ("ehc", "emissions", "high_capacity"),
    ("ELC", "emissions", "low_capacity"),
    ("td", "total_distance", "high_capacity"),
    ("cd", "company_distance", "high_capacity"),
])
def test_scenario_names(name, objective, variant):
    s = Scenario.named(name)
    assert (s.objective, s.green_fleet_variant, s.full_home_delivery) == (objective, variant, False)
    assert Scenario.named(name + "-hd").full_home_delivery


def test_low_capacity_fleet_swaps_green_capacity():
    inst = t1_instance(vehicles=(Vehicle(0, FIRST, 100.0, 0.38, 0.3, 0.8),
                                 Vehicle(1, SECOND, 50.0, 0.0, 0.0, 0.0, low_capacity_kg=25.0)))
    low = inst.with_fleet("low_capacity")
    assert low.vehicle_by_id[1].capacity_kg == 25.0
    assert low.vehicle_by_id[0].capacity_kg == 100.0
    assert math.isclose(inst.vehicle_by_id[1].capacity_kg, 50.0)
