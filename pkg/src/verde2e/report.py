"""Batch report tables derived from stored per-instance rows.

A row is a flat mapping with ``instance``, ``scenario``, ``active_satellite_nodes``
(space separated node ids) and every metric column. Every table here is a pure
function of the rows, so a report can be rebuilt from ``metrics.csv`` alone.
"""
from __future__ import annotations

import csv
import io
import json
import math
from collections import defaultdict
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .validate import METRIC_COLUMNS, Metrics

KEY_COLUMNS = ["instance", "scenario", "active_satellite_nodes"]
BREAKDOWN_COLUMNS = ["e_K1_with_stops", "e_K1", "e_stops", "e_K2", "e_C", "total_emissions",
                     "d_K1", "d_K2", "d_C0", "d_C", "total_distance", "company_distance"]
CUSTOMER_COLUMNS = ["customers_at_home_pct", "avg_pickup_dist_em_km", "avg_pickup_dist_zero_km",
                    "active_satellites", "active_pickup_only", "avg_customers_per_active_satellite"]
VARIATION_METRICS = ["total_emissions", "total_distance", "company_distance", "e_C", "customers_at_home_pct"]
DEFAULT_PAIRS = [("EHC", "ELC"), ("EHC", "TD"), ("EHC", "CD"), ("EHC", "EHC-HD"), ("TD", "TD-HD")]


def make_row(instance: str, scenario: str, metrics: Metrics, active_nodes: Iterable[int]) -> dict:
    row = {"instance": instance, "scenario": scenario,
           "active_satellite_nodes": " ".join(str(h) for h in sorted(active_nodes))}
    row.update(metrics.to_dict())
    return row


def variation(f_a: float | None, f_b: float | None) -> float | None:
    """Percentage change from A to B, (f_B - f_A) / f_A * 100; undefined when f_A is 0."""
    if f_a is None or f_b is None or f_a == 0:
        return None
    return (f_b - f_a) / f_a * 100.0


def _mean(values) -> float | None:
    vals = [v for v in values if v is not None]
    return math.fsum(vals) / len(vals) if vals else None


def _scenarios(rows) -> list[str]:
    return sorted({r["scenario"] for r in rows})


def breakdown(rows: Sequence[Mapping]) -> list[dict]:
    """Mean emission and distance components per scenario."""
    out = []
    for sc in _scenarios(rows):
        sub = [r for r in rows if r["scenario"] == sc]
        out.append({"scenario": sc, "instances": len(sub),
                    **{c: _mean(r[c] for r in sub) for c in BREAKDOWN_COLUMNS}})
    return out


def customer_stats(rows: Sequence[Mapping]) -> list[dict]:
    """Mean customer and satellite statistics per scenario; empty averages are skipped."""
    out = []
    for sc in _scenarios(rows):
        sub = [r for r in rows if r["scenario"] == sc]
        out.append({"scenario": sc, "instances": len(sub),
                    **{c: _mean(r[c] for r in sub) for c in CUSTOMER_COLUMNS}})
    return out


def satellite_frequency(rows: Sequence[Mapping]) -> list[dict]:
    """How many instances activate each satellite node, per scenario."""
    counts: dict[tuple[str, int], int] = defaultdict(int)
    nodes = set()
    for r in rows:
        for tok in str(r["active_satellite_nodes"]).split():
            counts[(r["scenario"], int(tok))] += 1
            nodes.add(int(tok))
    return [{"scenario": sc, "satellite": h, "activations": counts[(sc, h)]}
            for sc in _scenarios(rows) for h in sorted(nodes)]


def variations(rows: Sequence[Mapping], pairs=DEFAULT_PAIRS, metrics=VARIATION_METRICS) -> list[dict]:
    by_key = {(r["instance"], r["scenario"]): r for r in rows}
    out = []
    for inst in sorted({r["instance"] for r in rows}):
        for a, b in pairs:
            ra, rb = by_key.get((inst, a)), by_key.get((inst, b))
            if ra is None or rb is None:
                continue
            row = {"instance": inst, "from": a, "to": b}
            for m in metrics:
                row[m] = variation(ra[m], rb[m])
            out.append(row)
    return out


def _csv(rows: Sequence[Mapping], columns: Sequence[str] | None = None) -> str:
    buf = io.StringIO()
    cols = list(columns) if columns is not None else (list(rows[0]) if rows else [])
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow(["" if r[c] is None else (repr(r[c]) if isinstance(r[c], float) else r[c]) for c in cols])
    return buf.getvalue()


def rows_to_csv(rows: Sequence[Mapping]) -> str:
    return _csv(rows, KEY_COLUMNS + METRIC_COLUMNS)


def rows_from_csv(text: str) -> list[dict]:
    ints = {"active_satellites", "active_pickup_only"}
    out = []
    for rec in csv.DictReader(io.StringIO(text)):
        row = {k: rec[k] for k in KEY_COLUMNS}
        for c in METRIC_COLUMNS:
            v = rec[c]
            row[c] = None if v == "" else (int(v) if c in ints else float(v))
        out.append(row)
    return out


def build_report(rows: Sequence[Mapping], failures: Sequence[Mapping] = ()) -> dict:
    return {
        "rows": list(rows),
        "breakdown": breakdown(rows),
        "customer_stats": customer_stats(rows),
        "satellite_frequency": satellite_frequency(rows),
        "variations": variations(rows),
        "failures": list(failures),
    }


def write_report(rows: Sequence[Mapping], out_dir, failures: Sequence[Mapping] = ()) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report = build_report(rows, failures)
    (out / "metrics.csv").write_text(rows_to_csv(rows))
    tables = {
        "breakdown": ["scenario", "instances", *BREAKDOWN_COLUMNS],
        "customer_stats": ["scenario", "instances", *CUSTOMER_COLUMNS],
        "satellite_frequency": ["scenario", "satellite", "activations"],
        "variations": ["instance", "from", "to", *VARIATION_METRICS],
    }
    for name, cols in tables.items():
        (out / f"{name}.csv").write_text(_csv(report[name], cols))
    (out / "failures.csv").write_text(_csv(report["failures"], ["instance", "scenario", "error"]))
    (out / "report.json").write_text(json.dumps(report, indent=1, sort_keys=True) + "\n")
    return report
