import pytest

from verde2e.core import Scenario
from verde2e.oracle import solve_exact
from verde2e.report import (
    DEFAULT_PAIRS, breakdown, customer_stats, make_row, rows_from_csv, rows_to_csv, satellite_frequency,
    variation, variations,
)
from verde2e.validate import evaluate


def test_variation_formula():
    assert variation(4.0, 5.0) == 25.0
    assert variation(8.0, 6.0) == -25.0
    assert variation(0.0, 3.0) is None
    assert variation(None, 3.0) is None


def rows_for(insts, names=("ehc", "elc", "td", "cd", "ehc-hd", "td-hd")):
    rows = []
    for k, inst in enumerate(insts):
        for name in names:
            sc = Scenario.named(name)
            sol, _ = solve_exact(inst, sc)
            active = {h for r in sol.first_echelon_routes for h in r.stops}
            rows.append(make_row(f"i{k}", sc.label, evaluate(inst.with_fleet(sc.green_fleet_variant), sol), active))
    return rows


def test_hand_made_pair():
    rows = [
        {"instance": "a", "scenario": "EHC", "total_emissions": 2.0, "total_distance": 10.0,
         "company_distance": 8.0, "e_C": 0.0, "customers_at_home_pct": 50.0},
        {"instance": "a", "scenario": "ELC", "total_emissions": 3.0, "total_distance": 9.0,
         "company_distance": 8.0, "e_C": 0.5, "customers_at_home_pct": 25.0},
    ]
    (v,) = variations(rows)
    assert (v["from"], v["to"]) == ("EHC", "ELC")
    assert v["total_emissions"] == 50.0
    assert v["total_distance"] == -10.0
    assert v["company_distance"] == 0.0
    assert v["e_C"] is None
    assert v["customers_at_home_pct"] == -50.0


def test_tables_from_rows(suite):
    rows = rows_for(suite[:3])
    assert {r["scenario"] for r in rows} == {"EHC", "ELC", "TD", "CD", "EHC-HD", "TD-HD"}
    b = {r["scenario"]: r for r in breakdown(rows)}
    assert b["EHC"]["instances"] == 3
    ehc = [r for r in rows if r["scenario"] == "EHC"]
    assert b["EHC"]["total_emissions"] == pytest.approx(sum(r["total_emissions"] for r in ehc) / 3)
    assert len(variations(rows)) == 3 * len(DEFAULT_PAIRS)
    freq = satellite_frequency(rows)
    assert sum(f["activations"] for f in freq) == sum(r["active_satellites"] for r in rows)
    assert all(s["customers_at_home_pct"] is not None for s in customer_stats(rows))


def test_csv_round_trip_rederives_tables(suite):
    rows = rows_for(suite[:2], ("ehc", "td"))
    back = rows_from_csv(rows_to_csv(rows))
    assert breakdown(back) == breakdown(rows)
    assert customer_stats(back) == customer_stats(rows)
    assert variations(back) == variations(rows)
    assert satellite_frequency(back) == satellite_frequency(rows)


def test_empty_rows():
    assert breakdown([]) == [] and variations([]) == [] and satellite_frequency([]) == []
