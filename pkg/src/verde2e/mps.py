"""Fixed-format MPS export/import and name/value solution files."""
from __future__ import annotations

import math
from pathlib import Path
from typing import Mapping

from .core import FIRST, Instance, Route, Solution
from .model import BINARY, CONTINUOUS, EQ, GE, LE, Column, MilpModel, Row, VariableIndex

OBJ = "OBJ"
RHS_SET = "RHS"
BND_SET = "BND"
BINARY_TOL = 1e-6

# start columns (1-based) of the six fixed-MPS fields
_FIELD_STARTS = (2, 5, 15, 25, 40, 50)
_SECTIONS = ("NAME", "ROWS", "COLUMNS", "RHS", "BOUNDS", "ENDATA")
_OPTIONAL = {"BOUNDS"}


class MpsError(ValueError):
    pass


class SolutionImportError(ValueError):
    pass


def _num(v: float) -> str:
    return format(v, ".12g")


def _line(*fields: str) -> str:
    """Place fields at the fixed starts, pushing right when a name overflows."""
    out = ""
    for start, text in zip(_FIELD_STARTS, fields):
        if not text:
            continue
        col = start - 1
        if out and len(out) >= col:
            col = len(out) + 1
        out = out.ljust(col) + text
    return out


def write_mps(model: MilpModel) -> str:
    lines = [f"NAME          {model.name}".rstrip() if model.name else "NAME"]
    lines.append("ROWS")
    empty = not model.columns and not model.rows
    if not empty:
        lines.append(_line("N", OBJ))
    for r in model.rows:
        lines.append(_line(r.sense, r.name))

    lines.append("COLUMNS")
    by_col: list[list[tuple[str, float]]] = [[] for _ in model.columns]
    for r in model.rows:
        for j, v in r.coefs:
            by_col[j].append((r.name, v))
    in_int = False
    for j, c in enumerate(model.columns):
        if (c.kind == BINARY) != in_int:
            tag = "'INTEND'" if in_int else "'INTORG'"
            lines.append(_line("", "MARKER", "'MARKER'", "", tag))
            in_int = not in_int
        entries = ([(OBJ, c.obj)] if c.obj else []) + by_col[j]
        if not entries:
            entries = [(OBJ, 0.0)]
        for row_name, v in entries:
            lines.append(_line("", c.name, row_name, _num(v)))
    if in_int:
        lines.append(_line("", "MARKER", "'MARKER'", "", "'INTEND'"))

    lines.append("RHS")
    for r in model.rows:
        if r.rhs != 0:
            lines.append(_line("", RHS_SET, r.name, _num(r.rhs)))

    bounds = []
    for c in model.columns:
        if c.lower == c.upper:
            bounds.append(_line("FX", BND_SET, c.name, _num(c.lower)))
            continue
        if c.lower != 0:
            bounds.append(_line("MI" if c.lower == -math.inf else "LO", BND_SET, c.name,
                                "" if c.lower == -math.inf else _num(c.lower)))
        if c.kind == BINARY or c.upper != math.inf:
            bounds.append(_line("UP", BND_SET, c.name, _num(c.upper)))
    if bounds:
        lines.append("BOUNDS")
        lines.extend(bounds)
    lines.append("ENDATA")
    return "\n".join(lines) + "\n"


def parse_mps(text: str) -> MilpModel:
    """Parse the dialect written by :func:`write_mps`."""
    section = None
    order = iter(_SECTIONS)
    seen: list[str] = []
    name = ""
    row_defs: dict[str, str] = {}
    row_order: list[str] = []
    obj_row = None
    cols: dict[str, dict] = {}
    col_order: list[str] = []
    rhs: dict[str, float] = {}
    in_int = False

    for lineno, raw in enumerate(text.splitlines(), 1):
        if not raw.strip() or raw.startswith("*"):
            continue
        if not raw[0].isspace():
            head = raw.split()[0]
            if head not in _SECTIONS:
                raise MpsError(f"line {lineno}: unknown section {head!r}")
            # advance through the fixed section order, skipping optional ones only
            for expected in order:
                if expected == head:
                    break
                if expected not in _OPTIONAL:
                    raise MpsError(f"line {lineno}: section {head} before required section {expected}")
            else:
                raise MpsError(f"line {lineno}: section {head} out of order")
            section = head
            seen.append(head)
            if head == "NAME":
                name = raw[4:].strip()
            if head == "ENDATA":
                break
            continue
        parts = raw.split()
        if section == "ROWS":
            sense, rname = parts
            if rname in row_defs or rname == obj_row:
                raise MpsError(f"line {lineno}: duplicate row {rname}")
            if sense == "N":
                obj_row = rname
            elif sense in (LE, EQ, GE):
                row_defs[rname] = sense
                row_order.append(rname)
            else:
                raise MpsError(f"line {lineno}: bad row type {sense!r}")
        elif section == "COLUMNS":
            if len(parts) == 3 and parts[1] == "'MARKER'":
                in_int = parts[2] == "'INTORG'"
                continue
            cname, pairs = parts[0], parts[1:]
            if cname not in cols:
                cols[cname] = {"kind": BINARY if in_int else CONTINUOUS, "obj": 0.0, "coefs": {}}
                col_order.append(cname)
            elif col_order[-1] != cname:
                raise MpsError(f"line {lineno}: duplicate column {cname}")
            entry = cols[cname]
            for rname, val in zip(pairs[::2], pairs[1::2]):
                if rname == obj_row:
                    entry["obj"] = float(val)
                elif rname in row_defs:
                    if rname in entry["coefs"]:
                        raise MpsError(f"line {lineno}: repeated entry {cname}/{rname}")
                    entry["coefs"][rname] = float(val)
                else:
                    raise MpsError(f"line {lineno}: unknown row {rname!r} in COLUMNS")
        elif section == "RHS":
            for rname, val in zip(parts[1::2], parts[2::2]):
                if rname not in row_defs:
                    raise MpsError(f"line {lineno}: unknown row {rname!r} in RHS")
                rhs[rname] = float(val)
        elif section == "BOUNDS":
            kind, _, cname = parts[:3]
            if cname not in cols:
                raise MpsError(f"line {lineno}: bound on unknown column {cname!r}")
            entry = cols[cname]
            val = float(parts[3]) if len(parts) > 3 else None
            if kind == "UP":
                entry["upper"] = val
            elif kind == "LO":
                entry["lower"] = val
            elif kind == "FX":
                entry["lower"] = entry["upper"] = val
            elif kind == "MI":
                entry["lower"] = -math.inf
            else:
                raise MpsError(f"line {lineno}: unsupported bound type {kind!r}")
        else:
            raise MpsError(f"line {lineno}: data outside a section")

    for required in _SECTIONS:
        if required not in _OPTIONAL and required not in seen:
            raise MpsError(f"missing section {required}")

    columns = []
    keys = []
    for cname in col_order:
        e = cols[cname]
        upper = e.get("upper", 1.0 if e["kind"] == BINARY else math.inf)
        columns.append(Column(cname, e["kind"], e.get("lower", 0.0), upper, e["obj"]))
        try:
            keys.append(VariableIndex.key_of(cname))
        except ValueError:
            keys.append((cname,))
    pos = {c: j for j, c in enumerate(col_order)}
    row_coefs: dict[str, list[tuple[int, float]]] = {r: [] for r in row_order}
    for cname in col_order:
        for rname, v in cols[cname]["coefs"].items():
            row_coefs[rname].append((pos[cname], v))
    rows = tuple(Row(r, tuple(row_coefs[r]), row_defs[r], rhs.get(r, 0.0)) for r in row_order)
    return MilpModel(name=name, columns=tuple(columns), rows=rows, index=VariableIndex(tuple(keys)))


# ---- solution files ---------------------------------------------------------------

def write_solution_file(values: Mapping[str, float]) -> str:
    return "".join(f"{n} {v!r}\n" for n, v in values.items())


def read_solution_file(text: str) -> dict[str, float]:
    out: dict[str, float] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise SolutionImportError(f"line {lineno}: expected 'name value'")
        if parts[0] in out:
            raise SolutionImportError(f"line {lineno}: duplicate variable {parts[0]}")
        try:
            out[parts[0]] = float(parts[1])
        except ValueError:
            raise SolutionImportError(f"line {lineno}: bad value {parts[1]!r}") from None
    return out


def import_solution(file, model: MilpModel, instance: Instance) -> Solution:
    """Rebuild a :class:`Solution` from column values.

    ``file`` is a path, solution-file text or a name/value mapping. The result
    is not validated here; callers pass it through ``check_feasibility``.
    """
    if isinstance(file, Mapping):
        values = dict(file)
    elif isinstance(file, Path):
        values = read_solution_file(file.read_text())
    else:
        values = read_solution_file(file)
    kinds = {c.name: c.kind for c in model.columns}
    by_key: dict[tuple, float] = {}
    for n, v in values.items():
        if n not in kinds:
            raise SolutionImportError(f"unknown variable {n!r}")
        if kinds[n] == BINARY:
            r = round(v)
            if r not in (0, 1) or abs(v - r) > BINARY_TOL:
                raise SolutionImportError(f"binary {n} has fractional value {v}")
            v = float(r)
        by_key[VariableIndex.key_of(n)] = v

    arcs: dict[int, dict[int, int]] = {}
    for key, v in by_key.items():
        if key[0] == "x" and v == 1.0:
            _, i, j, k = key
            succ = arcs.setdefault(k, {})
            if i in succ:
                raise SolutionImportError(f"vehicle {k} leaves node {i} twice")
            succ[i] = j

    first, second = [], []
    on_route: dict[int, int] = {}
    vehicles = instance.vehicle_by_id
    sats = set(instance.satellite_nodes)
    for k in sorted(arcs):
        succ = arcs[k]
        if vehicles[k].echelon == FIRST:
            depot = 0
        else:
            starts = sorted(n for n in succ if n in sats)
            if not starts:
                raise SolutionImportError(f"vehicle {k} has arcs but leaves no satellite")
            depot = starts[0]
        if depot not in succ:
            raise SolutionImportError(f"vehicle {k} never leaves its depot {depot}")
        stops, node = [], succ[depot]
        while node != depot:
            if node in stops:
                raise SolutionImportError(f"vehicle {k} revisits node {node}")
            stops.append(node)
            if node not in succ:
                raise SolutionImportError(f"vehicle {k}: arcs form an open path ending at {node}")
            node = succ[node]
        if len(stops) + 1 != len(succ):
            raise SolutionImportError(f"vehicle {k}: arcs do not form a single closed walk")
        path = [depot, *stops, depot]
        loads = tuple(by_key.get(("z", path[i], path[i + 1], k), 0.0) for i in range(len(path) - 1))
        route = Route(k, depot, tuple(stops), loads)
        (first if vehicles[k].echelon == FIRST else second).append(route)
        if vehicles[k].echelon != FIRST:
            for c in stops:
                on_route[c] = k

    pickup: dict[int, int] = {}
    home: dict[int, tuple[int, int]] = {}
    serving: dict[int, int] = {}
    for key, v in sorted(by_key.items()):
        if v != 1.0:
            continue
        if key[0] == "w":
            pickup[key[1]] = key[2]
        elif key[0] == "s":
            serving.setdefault(key[1], key[2])
    for key, v in sorted(by_key.items()):
        if key[0] == "y" and v == 1.0:
            c, h = key[1], key[2]
            home[c] = (h, serving.get(c, on_route.get(c, -1)))
    return Solution(tuple(first), tuple(second), pickup, home)
