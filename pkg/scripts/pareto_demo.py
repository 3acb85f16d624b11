"""Print the exact emissions/distance frontier of one generated instance.

Usage: python3 scripts/pareto_demo.py [--seed 8] [--customers 5]
"""
import argparse

from verde2e.genesis import GenConfig, generate
from verde2e.pareto import knee_point, sweep


def main(argv=None) -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--seed", type=int, default=8)
    p.add_argument("--customers", type=int, default=5)
    args = p.parse_args(argv)
    inst = generate(GenConfig(n_customers=args.customers, seed=args.seed, fleet_counts=(1, 1, 1)))
    front = sweep(inst, None)
    knee = knee_point(front)
    print(f"{inst.name}: {len(front)} frontier point(s)")
    for i, pt in enumerate(front):
        mark = "  <- knee" if i == knee else ""
        print(f"  {pt.emissions_kg:10.4f} kg CO2  {pt.total_distance_km:10.4f} km{mark}")


if __name__ == "__main__":
    main()
