"""Command-line entry point: ``verde2e {generate,solve,batch,pareto}``.

Exit codes: 0 success, 2 bad input or configuration, 3 infeasible instance,
4 enumeration budget exceeded, 5 imported solution failed validation.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

from .core import BudgetExceeded, InfeasibleError, InstanceError, Scenario, Solution, load_instance
from .genesis import GenConfig, generate, load_config
from .model import BuildOptions, build_model
from .mps import MpsError, SolutionImportError, import_solution, write_mps
from .oracle import solve_exact
from .pareto import frontier_csv, knee_point, sweep
from .report import make_row, write_report
from .validate import check_feasibility, evaluate, metrics_to_json

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_BUDGET, EXIT_INVALID = 0, 2, 3, 4, 5
SCENARIOS = ("ehc", "elc", "td", "cd")


class ConfigError(Exception):
    pass


def _scenario(args) -> Scenario:
    return Scenario.named(args.scenario, full_home_delivery=args.full_home_delivery)


def _solver(backend: str):
    if backend == "oracle":
        return solve_exact
    from .external import solve_external
    return solve_external


def _write(path, text: str) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


# ---- generate ----------------------------------------------------------------------

def cmd_generate(args) -> int:
    cfg = load_config(args.config) if args.config else GenConfig()
    overrides = {}
    for flag, field_name in (("customers", "n_customers"), ("satellites", "n_satellites"),
                             ("seed", "seed"), ("warehouse_offset", "warehouse_offset_km")):
        if getattr(args, flag) is not None:
            overrides[field_name] = getattr(args, flag)
    if args.area is not None:
        overrides["area_extent_km"] = tuple(args.area)
    if args.fleet is not None:
        overrides["fleet_counts"] = tuple(args.fleet)
    cfg = replace(cfg, **overrides)
    if args.count == 1:
        generate(cfg).save(args.out)
        return EXIT_OK
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for i in range(args.count):
        sub = replace(cfg, seed=cfg.seed + i, name=None)
        inst = generate(sub)
        inst.save(out / f"{inst.name}.json")
    return EXIT_OK


# ---- solve -----------------------------------------------------------------------------

def cmd_solve(args) -> int:
    inst = load_instance(args.instance)
    scenario = _scenario(args)
    options = BuildOptions(args.valid_inequalities, args.symmetry_breaking)
    scored = inst.with_fleet(scenario.green_fleet_variant)

    if args.import_file:
        model = build_model(inst, scenario, options)
        try:
            solution = import_solution(Path(args.import_file), model, inst)
        except SolutionImportError as exc:
            print(f"import failed: {exc}", file=sys.stderr)
            return EXIT_INVALID
        violations = check_feasibility(scored, solution)
        if violations:
            for v in violations:
                print(v, file=sys.stderr)
            return EXIT_INVALID
        _emit(args, scored, solution)
        return EXIT_OK

    if args.backend == "export":
        text = write_mps(build_model(inst, scenario, options))
        _write(args.out or Path(args.instance).with_suffix(".mps"), text)
        return EXIT_OK
    solution, _ = _solver(args.backend)(inst, scenario)
    _emit(args, scored, solution)
    return EXIT_OK


def _emit(args, instance, solution: Solution) -> None:
    if args.out:
        Path(args.out).write_text(json.dumps(solution.to_dict(), indent=1, sort_keys=True) + "\n")
    print(metrics_to_json(evaluate(instance, solution)))


# ---- batch -------------------------------------------------------------------------------

def _batch_task(task):
    path, scenario_name, backend = task
    name = Path(path).stem
    try:
        inst = load_instance(path)
        scenario = Scenario.named(scenario_name)
        solution, _ = _solver(backend)(inst, scenario)
        scored = inst.with_fleet(scenario.green_fleet_variant)
        active = {h for r in solution.first_echelon_routes for h in r.stops}
        return make_row(name, scenario.label, evaluate(scored, solution), active), None
    except (InfeasibleError, BudgetExceeded, InstanceError, ValueError, RuntimeError) as exc:
        return None, {"instance": name, "scenario": scenario_name.upper(), "error": f"{type(exc).__name__}: {exc}"}


def threads() -> int:
    raw = os.environ.get("VERDE2E_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"VERDE2E_THREADS must be an integer, got {raw!r}") from None


def cmd_batch(args) -> int:
    paths = sorted(Path(args.instances).glob("*.json"))
    scenarios = [s.strip() for s in args.scenarios.split(",") if s.strip()]
    for s in scenarios:
        Scenario.named(s)
    tasks = [(str(p), s, args.backend) for p in paths for s in scenarios]
    n = threads()
    if n > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=n) as pool:
            results = list(pool.map(_batch_task, tasks))
    else:
        results = [_batch_task(t) for t in tasks]
    rows = [r for r, _ in results if r is not None]
    failures = [f for _, f in results if f is not None]
    write_report(rows, args.out, failures)
    for f in failures:
        print(f"{f['instance']} {f['scenario']}: {f['error']}", file=sys.stderr)
    return EXIT_OK


# ---- pareto ------------------------------------------------------------------------------

def cmd_pareto(args) -> int:
    inst = load_instance(args.instance)
    scenario = Scenario.named("ehc", full_home_delivery=args.full_home_delivery)
    n_points = args.n_points if args.n_points > 0 else None
    frontier = sweep(inst, n_points, backend=args.backend, scenario=scenario)
    _write(args.out, frontier_csv(frontier))
    knee = knee_point(frontier)
    print(f"{len(frontier)} frontier point(s); knee: {'none' if knee is None else knee}", file=sys.stderr)
    return EXIT_OK


# ---- parser ------------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="verde2e", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic instance (or a directory of them)")
    g.add_argument("--config", help="GenConfig JSON file")
    g.add_argument("--customers", type=int)
    g.add_argument("--satellites", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--area", type=float, nargs=2, metavar=("WIDTH", "HEIGHT"))
    g.add_argument("--warehouse-offset", type=float)
    g.add_argument("--fleet", type=int, nargs=3, metavar=("TRUCKS", "VANS", "GREEN"))
    g.add_argument("--count", type=int, default=1, help="instances with consecutive seeds; --out is a directory")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("solve", help="solve, export or score one instance")
    s.add_argument("--instance", required=True)
    s.add_argument("--scenario", choices=SCENARIOS, default="ehc")
    s.add_argument("--full-home-delivery", action="store_true")
    s.add_argument("--backend", choices=("oracle", "external", "export"), default="oracle")
    s.add_argument("--valid-inequalities", action="store_true")
    s.add_argument("--symmetry-breaking", action="store_true")
    s.add_argument("--import", dest="import_file", help="score an external 'name value' solution file")
    s.add_argument("--out", help="solution JSON (or MPS file with --backend export)")
    s.set_defaults(func=cmd_solve)

    b = sub.add_parser("batch", help="solve every instance of a directory under several scenarios")
    b.add_argument("--instances", required=True)
    b.add_argument("--scenarios", default="ehc,elc,td,cd")
    b.add_argument("--backend", choices=("oracle", "external"), default="oracle")
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_batch)

    f = sub.add_parser("pareto", help="emissions versus total distance frontier")
    f.add_argument("--instance", required=True)
    f.add_argument("--n-points", type=int, default=10, help="grid size; 0 runs the adaptive exhaustive sweep")
    f.add_argument("--backend", choices=("oracle", "external"), default="oracle")
    f.add_argument("--full-home-delivery", action="store_true")
    f.add_argument("--out", help="frontier CSV (stdout when omitted)")
    f.set_defaults(func=cmd_pareto)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except BudgetExceeded as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (ConfigError, InstanceError, MpsError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
