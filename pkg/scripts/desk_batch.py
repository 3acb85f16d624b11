"""Generate a desk-scale batch and run every scenario on it.

Usage: python3 scripts/desk_batch.py OUT_DIR [--count 20] [--customers 5] [--satellites 3]
"""
import argparse
import sys
from pathlib import Path

from verde2e.cli import main as cli


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("out")
    p.add_argument("--count", type=int, default=20)
    p.add_argument("--customers", type=int, default=5)
    p.add_argument("--satellites", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)
    out = Path(args.out)
    # one vehicle per type keeps the exact oracle within its enumeration budget
    code = cli(["generate", "--customers", str(args.customers), "--satellites", str(args.satellites),
                "--seed", str(args.seed), "--fleet", "1", "1", "1", "--count", str(args.count),
                "--out", str(out / "instances")])
    if code:
        return code
    return cli(["batch", "--instances", str(out / "instances"),
                "--scenarios", "ehc,elc,td,cd,ehc-hd,td-hd", "--out", str(out / "report")])


if __name__ == "__main__":
    sys.exit(main())
