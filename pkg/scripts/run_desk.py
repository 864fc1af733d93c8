"""Run the desk-scale grid and print the score tables.

    python scripts/run_desk.py --out results/desk [--parallelism 4] [--set grid.seeds=[1,2]]
"""

import argparse
import sys

from oblesa.cli import main


def parse():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", default="results/desk")
    p.add_argument("--parallelism", type=int, default=1)
    p.add_argument("--set", action="append", default=[])
    return p.parse_args()


if __name__ == "__main__":
    args = parse()
    argv = ["run", "--preset", "desk", "--out", args.out, "--force", "--parallelism", str(args.parallelism)]
    for item in args.set:
        argv += ["--set", item]
    code = main(argv)
    if code == 0:
        code = main(["stats", f"{args.out}/records.csv"])
    sys.exit(code)
