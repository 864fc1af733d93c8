"""Command-line entry point: ``oblesa run | report | stats | demo-esa``.

Exit codes: 0 success, 2 usage or configuration error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, load_config, resolved
from .core import Bounds, RandomSource
from .esa import EsaParams, run_agents
from .harness import cell_streams, fraction_solved, read_records, run_grid, write_records
from .neighbors import NeighborIndex
from .stats import analyze, format_table, stats_csv

EXIT_OK, EXIT_USAGE, EXIT_IO = 0, 2, 3

log = logging.getLogger("oblesa")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _source_hash() -> str:
    h = hashlib.sha256()
    for path in sorted(Path(__file__).parent.glob("*.py")):
        h.update(path.name.encode())
        h.update(path.read_bytes())
    return h.hexdigest()


def _manifest(cfg, config_text: str, records) -> dict:
    streams = {}
    for alg in cfg.optimizers:
        for _, _, spec, seed in {(None, alg, c[2], c[3]) for c in cfg.cells()}:
            init, opt = cell_streams(seed, alg, spec)
            key = f"seed={seed}|{alg.value}|{spec.function_id}|i{spec.instance}|d{spec.dimension}"
            streams[key] = {"init": list(init.seed), "optim": list(opt.seed)}
    failures = [
        {"key": list(r.key), "error": r.error} for r in records if r.error is not None
    ]
    return {
        "version": __version__,
        "source_sha256": _source_hash(),
        "config_sha256": hashlib.sha256(config_text.encode()).hexdigest(),
        "config": resolved(cfg),
        "n_records": len(records),
        "failures": failures,
        "streams": dict(sorted(streams.items())),
    }


def cmd_run(args) -> int:
    if args.config is None and args.preset is None:
        print("error: run needs --config or --preset", file=sys.stderr)
        return EXIT_USAGE
    overrides = list(args.set or [])
    if args.parallelism is not None:
        overrides.append(f"grid.parallelism={args.parallelism}")
    if args.exact_knn:
        overrides.append("esa.exact_knn=true")
    try:
        cfg = load_config(args.config, args.preset, overrides)
        config_text = Path(args.config).read_text(encoding="utf-8") if args.config else ""
    except FileNotFoundError as exc:
        print(f"error: config not found: {exc.filename}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"error: bad config: {exc}", file=sys.stderr)
        return EXIT_USAGE
    out = Path(args.out)
    records_path = out / "records.csv"
    if records_path.exists() and not args.force:
        print(f"error: {records_path} exists; use --force to overwrite", file=sys.stderr)
        return EXIT_USAGE
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"error: cannot create {out}: {exc}", file=sys.stderr)
        return EXIT_IO

    def progress(done, total):
        if not args.quiet and (done == total or done % max(1, total // 20) == 0):
            print(f"  {done}/{total} cells", file=sys.stderr)

    records = run_grid(cfg, progress=progress)
    try:
        write_records(records, records_path)
        manifest = _manifest(cfg, config_text, records)
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    except OSError as exc:
        print(f"error: cannot write results: {exc}", file=sys.stderr)
        return EXIT_IO
    failed = sum(r.error is not None for r in records)
    if failed:
        print(f"warning: {failed} of {len(records)} cells failed (recorded as unsolved)", file=sys.stderr)
    print(f"wrote {len(records)} records to {records_path}")
    return EXIT_OK


def _load_records(path):
    try:
        return read_records(path), None
    except FileNotFoundError:
        print(f"error: records file not found: {path}", file=sys.stderr)
        return None, EXIT_USAGE
    except ValueError as exc:
        print(f"error: malformed records CSV {path}: {exc}", file=sys.stderr)
        return None, EXIT_USAGE
    except OSError as exc:
        print(f"error: cannot read {path}: {exc}", file=sys.stderr)
        return None, EXIT_IO


def _write_outputs(out_dir: Path, files: dict[str, str]) -> int:
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        for name, text in files.items():
            with open(out_dir / name, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
    except OSError as exc:
        print(f"error: cannot write to {out_dir}: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def cmd_report(args) -> int:
    records, code = _load_records(args.records)
    if records is None:
        return code
    keys = ("strategy", "optimizer", "dim") + (("function",) if args.per_function else ())
    frac = fraction_solved(records, keys + ("seed",))
    groups: dict[tuple, list[float]] = {}
    for key, value in frac.items():
        groups.setdefault(key[:-1], []).append(value)
    header = ",".join(keys) + ",mean_fraction,n_seeds"
    lines = [header] + [
        ",".join(map(str, k)) + f",{float(np.mean(v))!r},{len(v)}" for k, v in sorted(groups.items())
    ]
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    out = Path(args.out) if args.out else Path(args.records).parent
    return _write_outputs(out, {"fractions.csv": text})


def cmd_stats(args) -> int:
    records, code = _load_records(args.records)
    if records is None:
        return code
    try:
        results = analyze(records)
    except ValueError as exc:
        print(f"error: cannot score records: {exc}", file=sys.stderr)
        return EXIT_USAGE
    text = "\n".join(format_table(opt, rows) for opt, rows in results.items())
    sys.stdout.write(text)
    out = Path(args.out) if args.out else Path(args.records).parent
    return _write_outputs(out, {"stats.txt": text, "stats.csv": stats_csv(results)})


def demo_dataset(kind: str, dim: int, n_points: int, n_agents: int, rng: RandomSource):
    """(points, agent starts, default k) for the unit-box ESA demos."""
    if kind == "uniform":
        return rng.random((n_points, dim)), rng.random((n_agents, dim)), None
    if kind == "ring":
        theta = 2.0 * np.pi * np.arange(n_points) / n_points
        pts = np.full((n_points, dim), 0.5)
        pts[:, 0] += 0.3 * np.cos(theta)
        pts[:, 1] += 0.3 * np.sin(theta)
        return pts, np.full((1, dim), 0.5), n_points
    if kind == "corner":
        # dense cluster in the low corner; agents start just outside it and
        # feel the whole cluster (k = n_points)
        pts = 0.2 * rng.random((n_points, dim))
        starts = 0.2 + 0.03 * rng.random((n_agents, dim))
        return pts, starts, n_points
    raise ValueError(kind)


def cmd_demo_esa(args) -> int:
    if args.dim not in (2, 3):
        print("error: demo-esa supports --dim 2 or 3", file=sys.stderr)
        return EXIT_USAGE
    if args.points < 1 or args.agents < 1:
        print("error: --points and --agents must be positive", file=sys.stderr)
        return EXIT_USAGE
    rng = RandomSource(args.seed)
    pts, starts, k = demo_dataset(args.dataset, args.dim, args.points, args.agents, rng)
    params = EsaParams(k=args.k if args.k is not None else k, n_steps=args.steps, exact_knn=True)
    bounds = Bounds.cube(0.0, 1.0, args.dim)
    agents = run_agents(NeighborIndex(pts, exact=True), bounds, params, starts, record_trajectory=True)
    cols = [f"x{i}" for i in range(args.dim)]
    lines = ["kind,step," + ",".join(cols)]
    fmt = lambda row: ",".join(repr(float(v)) for v in row)
    lines += [f"data,0,{fmt(p)}" for p in pts]
    for a in agents:
        lines += [f"trajectory,{i},{fmt(p)}" for i, p in enumerate(a.trajectory)]
    for a in agents:
        lines.append(f"final,{a.steps_taken},{fmt(a.position)}")
    try:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        print(f"error: cannot write {args.out}: {exc}", file=sys.stderr)
        return EXIT_IO
    statuses = {}
    for a in agents:
        statuses[a.status.value] = statuses.get(a.status.value, 0) + 1
    print(f"wrote {args.out}: {len(pts)} points, {len(agents)} agents {statuses}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="oblesa", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="run the experiment grid")
    r.add_argument("--config", help="YAML/JSON grid config")
    r.add_argument("--preset", choices=["full", "desk"])
    r.add_argument("--out", required=True, help="output directory")
    r.add_argument("--force", action="store_true", help="overwrite existing records.csv")
    r.add_argument("--parallelism", type=int)
    r.add_argument("--exact-knn", action="store_true", help="exact neighbour search in every dimension")
    r.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE", help="config override")
    r.add_argument("-q", "--quiet", action="store_true")
    r.set_defaults(func=cmd_run)

    rep = sub.add_parser("report", help="fraction of targets reached, averaged over seeds")
    rep.add_argument("records")
    rep.add_argument("--out", help="directory for fractions.csv (default: next to records)")
    rep.add_argument("--per-function", action="store_true")
    rep.set_defaults(func=cmd_report)

    st = sub.add_parser("stats", help="rank scores, ANOVA and post-hoc tables")
    st.add_argument("records")
    st.add_argument("--out", help="directory for stats.txt/stats.csv (default: next to records)")
    st.set_defaults(func=cmd_stats)

    d = sub.add_parser("demo-esa", help="dump ESA trajectories on a toy dataset as CSV")
    d.add_argument("--dim", type=int, default=2)
    d.add_argument("--points", type=int, default=40)
    d.add_argument("--agents", type=int, default=10)
    d.add_argument("--dataset", choices=["uniform", "ring", "corner"], default="corner")
    d.add_argument("--k", type=int)
    d.add_argument("--steps", type=int, default=200)
    d.add_argument("--seed", type=int, default=1)
    d.add_argument("--out", default="esa_demo.csv")
    d.set_defaults(func=cmd_demo_esa)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
