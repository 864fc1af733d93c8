"""Directional trend at 20D/40D: does OBLESA's mean rank score match or beat
both baselines per (optimizer, dimension)?

    python scripts/trend_check.py --out results/trend --seeds 1 2 3 4 5
"""

import argparse
import sys

from oblesa.cli import main
from oblesa.harness import read_records
from oblesa.stats import score_table


def parse():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", default="results/trend")
    p.add_argument("--seeds", type=int, nargs="+", default=[1, 2, 3, 4, 5])
    p.add_argument("--dims", type=int, nargs="+", default=[20, 40])
    p.add_argument("--parallelism", type=int, default=1)
    return p.parse_args()


def check(records, dims):
    wins = 0
    for opt in sorted({r.optimizer for r in records}):
        for dim in dims:
            t = score_table(records, opt, dim)
            mean = {s: v / len(t.seeds) for s, v in t.sums.items()}
            ok = mean["oblesa"] >= max(v for s, v in mean.items() if s != "oblesa")
            wins += ok
            shown = "  ".join(f"{s}={v:.2f}" for s, v in mean.items())
            print(f"{opt:5s} {dim:3d}D  {shown}  {'lead/tie' if ok else 'behind'}")
    return wins


if __name__ == "__main__":
    args = parse()
    argv = ["run", "--preset", "desk", "--out", args.out, "--force", "-q",
            "--parallelism", str(args.parallelism),
            "--set", f"grid.dimensions={args.dims}", "--set", f"grid.seeds={args.seeds}"]
    if main(argv) != 0:
        sys.exit(1)
    wins = check(read_records(f"{args.out}/records.csv"), args.dims)
    print(f"OBLESA leads or ties in {wins} cells")
