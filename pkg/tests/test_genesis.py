import json
import math
import random
from collections import Counter
from dataclasses import replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from verde2e.core import FIRST, InstanceError, load_instance
from verde2e.genesis import (
    DEFAULT_SIZES, GenConfig, SizeClass, expected_package_kg, generate, load_config, sample_customers, zone_grid,
)


def test_same_seed_same_bytes():
    cfg = GenConfig(n_customers=12, n_satellites=4, seed=42)
    assert generate(cfg).to_json() == generate(cfg).to_json()
    assert generate(cfg).to_json() != generate(replace(cfg, seed=43)).to_json()


def test_nine_default_pairs():
    assert len(GenConfig().valid_pairs()) == 9


def test_expected_package_weight():
    assert expected_package_kg(GenConfig()) == pytest.approx(2.28)
    inst = generate(GenConfig())
    assert inst.satellites[0].capacity_kg == pytest.approx(15 * 2.28)


def test_large_sample_statistics():
    sample = sample_customers(GenConfig(), random.Random(7), 10_000)
    freq = Counter(s.size_class for s in sample)
    for cls in DEFAULT_SIZES:
        assert abs(100 * freq[cls.name] / 10_000 - 100 * cls.probability) <= 2
    mean = math.fsum(s.demand_kg for s in sample) / len(sample)
    assert mean == pytest.approx(2.28, rel=0.05)


def test_demands_within_class_range():
    bounds = {"extra_small": (0.05, 0.35), "small": (0.35, 2.0), "medium": (2.0, 5.0), "large": (5.0, 30.0)}
    for s in sample_customers(GenConfig(), random.Random(1), 2_000):
        lo, hi = bounds[s.size_class]
        assert lo < s.demand_kg <= hi


def test_home_only_classes_forced():
    sample = sample_customers(GenConfig(), random.Random(3), 5_000)
    for s in sample:
        if s.size_class in ("extra_small", "large"):
            assert s.d_max_km == 0 and s.d_green_km == 0
        assert s.d_green_km <= s.d_max_km
    assert any(s.d_max_km > 0 for s in sample)


@settings(max_examples=25)
@given(st.integers(1, 12), st.integers(1, 6), st.integers(0, 2**63 - 1))
def test_generated_instances_valid(n_c, n_h, seed):
    inst = generate(GenConfig(n_customers=n_c, n_satellites=n_h, seed=seed))
    assert len(inst.customers) == n_c and len(inst.satellites) == n_h
    w, h = GenConfig().area_extent_km
    for c in inst.customers:
        x, y = inst.nodes[c.node].position
        assert 0 <= x <= w and 0 <= y <= h


def test_satellites_inside_their_zones():
    cfg = GenConfig(n_satellites=6, area_extent_km=(6.0, 4.0))
    cols, rows = zone_grid(6, 6.0, 4.0)
    assert (cols, rows) == (3, 2)
    inst = generate(cfg)
    for i, s in enumerate(inst.satellites):
        x, y = inst.nodes[s.node].position
        assert int(x // 2.0) == i % 3 and int(y // 2.0) == i // 3


def test_fleet_sizing():
    inst = generate(GenConfig(n_customers=20))
    trucks = [v for v in inst.vehicles if v.echelon == FIRST]
    demand = inst.total_demand
    assert len(trucks) == math.ceil(demand / (400 * 2.28)) + 1
    greens = [v for v in inst.vehicles if v.low_capacity_kg is not None]
    assert len(greens) == math.ceil(demand / (25 * 2.28)) + 1


def test_fleet_override():
    inst = generate(GenConfig(fleet_counts=(1, 0, 2)))
    assert [v.echelon for v in inst.vehicles].count(FIRST) == 1
    assert len(inst.vehicles) == 3


def test_warehouse_outside_area():
    inst = generate(GenConfig(warehouse_offset_km=2.0))
    assert inst.nodes[0].position == (5.0, 3.0)


@pytest.mark.parametrize("bad", [
    dict(n_customers=0),
    dict(n_satellites=0),
    dict(size_distribution=(SizeClass("a", 1.0, 0.5), SizeClass("b", 2.0, 0.4))),
    dict(d_max_menu_m=(0,), d_green_menu_m=(500,)),
    dict(fleet_counts=(0, 1, 1)),
])
def test_invalid_config(bad):
    with pytest.raises(InstanceError):
        GenConfig(**bad)


def test_config_file_round_trip(tmp_path):
    cfg = GenConfig(n_customers=7, seed=11)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg.to_dict()))
    assert load_config(path) == cfg
    out = tmp_path / "inst.json"
    generate(cfg).save(out)
    assert load_instance(out).to_json() == generate(cfg).to_json()


def test_unknown_config_key():
    with pytest.raises(InstanceError):
        GenConfig.from_dict({"n_customer": 3})
