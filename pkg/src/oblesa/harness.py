"""Experiment grid: strategy x optimizer x dimension x (function, instance) x seed.

Each cell derives its random streams from the global seed and the cell key
only, so results do not depend on scheduling. Initialization and optimizer
streams deliberately leave the strategy out of their key: for a given seed all
three strategies start from the same uniform draws and share the optimizer's
random numbers, which keeps the per-seed strategy ranking a paired comparison.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from typing import Iterable, Optional, Sequence

import numpy as np

from . import optim
from .benchmarks import DIMENSIONS, BenchmarkSpec, SuiteConfig, make_problem, suite
from .core import RandomSource
from .esa import EsaParams
from .initialization import InitConfig, Strategy, initialize
from .optim import Algorithm, OptimizerConfig

log = logging.getLogger(__name__)

CSV_HEADER = ["strategy", "optimizer", "function", "instance", "dim", "seed", "solved", "evals", "best_fitness"]
KEY_FIELDS = ("strategy", "optimizer", "function", "instance", "dimension", "seed")


@dataclass(frozen=True)
class RunRecord:
    strategy: str
    optimizer: str
    function_id: str
    instance: int
    dimension: int
    seed: int
    reached_target: bool
    evals_used: int
    best_fitness: float
    error: Optional[str] = None

    @property
    def key(self) -> tuple:
        return (self.strategy, self.optimizer, self.function_id, self.instance, self.dimension, self.seed)

    def csv_row(self) -> list[str]:
        return [
            self.strategy,
            self.optimizer,
            self.function_id,
            str(self.instance),
            str(self.dimension),
            str(self.seed),
            "1" if self.reached_target else "0",
            str(self.evals_used),
            repr(float(self.best_fitness)),
        ]


@dataclass
class GridConfig:
    dimensions: list[int] = field(default_factory=lambda: list(DIMENSIONS))
    seeds: list[int] = field(default_factory=lambda: list(range(1, 11)))
    strategies: list[Strategy] = field(default_factory=lambda: list(Strategy))
    optimizers: list[Algorithm] = field(default_factory=lambda: list(Algorithm))
    suite: SuiteConfig = field(default_factory=SuiteConfig)
    n_pop: int = 100
    esa: EsaParams = field(default_factory=EsaParams)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    parallelism: int = 1

    def __post_init__(self):
        self.strategies = [Strategy(s) for s in self.strategies]
        self.optimizers = [Algorithm(a) for a in self.optimizers]
        for name in ("dimensions", "seeds", "strategies", "optimizers"):
            if not getattr(self, name):
                raise ValueError(f"{name} must not be empty")
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError("seeds must be distinct")
        bad = [d for d in self.dimensions if d not in DIMENSIONS]
        if bad:
            raise ValueError(f"unsupported dimensions {bad}")
        if self.n_pop < 4:
            raise ValueError("n_pop must be >= 4 (DE needs four distinct members)")
        if self.parallelism < 1:
            raise ValueError("parallelism must be >= 1")

    def cells(self) -> list[tuple]:
        out = []
        for strategy in self.strategies:
            for algorithm in self.optimizers:
                for dim in self.dimensions:
                    for spec in suite(dim, self.suite):
                        for seed in self.seeds:
                            out.append((strategy, algorithm, spec, seed))
        return out

    def groups(self) -> list[tuple]:
        """(strategy, spec, seed) triples; each covers every optimizer."""
        return [
            (strategy, spec, seed)
            for strategy in self.strategies
            for dim in self.dimensions
            for spec in suite(dim, self.suite)
            for seed in self.seeds
        ]


def cell_streams(seed: int, algorithm: Algorithm, spec: BenchmarkSpec) -> tuple[RandomSource, RandomSource]:
    """(initialization stream, optimizer stream) for one grid cell."""
    root = RandomSource(seed)
    where = (spec.function_id, spec.instance, spec.dimension)
    return root.derive("init", *where), root.derive("optim", Algorithm(algorithm).value, *where)


def _failed(base: dict, evals: int, exc: Exception) -> RunRecord:
    log.warning("cell %s failed: %s", base, exc)
    return RunRecord(**base, reached_target=False, evals_used=evals,
                     best_fitness=math.nan, error=f"{type(exc).__name__}: {exc}")


def run_group(strategy, spec: BenchmarkSpec, seed: int, algorithms: Sequence, cfg: GridConfig) -> list[RunRecord]:
    """All optimizer cells sharing (strategy, spec, seed).

    The initialization stream does not depend on the optimizer, so the initial
    population is built once and each optimizer continues from a copy of the
    post-initialization problem state. Records equal those of :func:`run_cell`.
    """
    base = dict(strategy=Strategy(strategy).value, function_id=spec.function_id,
                instance=spec.instance, dimension=spec.dimension, seed=seed)
    problem = make_problem(spec)
    try:
        init_rng, _ = cell_streams(seed, Algorithm.DE, spec)
        pop = initialize(problem, InitConfig(cfg.n_pop, strategy, cfg.esa), init_rng)
    except Exception as exc:  # failures are data, never abort the sweep
        return [_failed({**base, "optimizer": Algorithm(a).value}, problem.evals_used, exc) for a in algorithms]

    out = []
    for algorithm in algorithms:
        cell = {**base, "optimizer": Algorithm(algorithm).value}
        prob = replace(problem)
        try:
            _, opt_rng = cell_streams(seed, algorithm, spec)
            result = optim.run(prob, pop, _with_algorithm(cfg.optimizer, algorithm), opt_rng)
            if not math.isfinite(result.best_fitness):
                raise FloatingPointError(f"non-finite best fitness {result.best_fitness}")
        except Exception as exc:
            out.append(_failed(cell, prob.evals_used, exc))
            continue
        out.append(RunRecord(**cell, reached_target=bool(result.reached_target),
                             evals_used=prob.evals_used, best_fitness=float(result.best_fitness)))
    return out


def run_cell(cell: tuple, cfg: GridConfig) -> RunRecord:
    """Run one (strategy, algorithm, spec, seed) cell on its own."""
    strategy, algorithm, spec, seed = cell
    return run_group(strategy, spec, seed, [algorithm], cfg)[0]


def _with_algorithm(cfg: OptimizerConfig, algorithm) -> OptimizerConfig:
    kw = {f.name: getattr(cfg, f.name) for f in fields(cfg)}
    kw["algorithm"] = Algorithm(algorithm)
    return OptimizerConfig(**kw)


def _run_chunk(args):
    groups, cfg = args
    out = []
    for strategy, spec, seed in groups:
        out.extend(run_group(strategy, spec, seed, cfg.optimizers, cfg))
    return out


def run_grid(cfg: GridConfig, progress=None) -> list[RunRecord]:
    """Run every cell and return records in canonical (sorted-key) order."""
    groups = cfg.groups()
    total = len(groups) * len(cfg.optimizers)
    records: list[RunRecord] = []
    if cfg.parallelism == 1:
        for g in groups:
            records.extend(_run_chunk(([g], cfg)))
            if progress:
                progress(len(records), total)
    else:
        # small chunks so long groups (OBLESA, high d) spread across workers
        size = max(1, len(groups) // (cfg.parallelism * 8))
        chunks = [(groups[i : i + size], cfg) for i in range(0, len(groups), size)]
        with ProcessPoolExecutor(max_workers=cfg.parallelism) as pool:
            for part in pool.map(_run_chunk, chunks):
                records.extend(part)
                if progress:
                    progress(len(records), total)
    return sorted(records, key=lambda r: r.key)


def records_to_csv(records: Iterable[RunRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in records:
        writer.writerow(r.csv_row())
    return buf.getvalue()


def write_records(records: Iterable[RunRecord], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(records_to_csv(records))


def read_records(path) -> list[RunRecord]:
    """Parse a records CSV; raises ``ValueError`` on a malformed file."""
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != CSV_HEADER:
            raise ValueError(f"unexpected header {header}")
        out = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(CSV_HEADER):
                raise ValueError(f"line {lineno}: expected {len(CSV_HEADER)} fields, got {len(row)}")
            try:
                solved = {"1": True, "0": False}[row[6]]
                out.append(RunRecord(row[0], row[1], row[2], int(row[3]), int(row[4]), int(row[5]),
                                     solved, int(row[7]), float(row[8])))
            except (KeyError, ValueError) as exc:
                raise ValueError(f"line {lineno}: {exc}") from None
    return out


GROUP_FIELDS = {
    "strategy": "strategy",
    "optimizer": "optimizer",
    "function": "function_id",
    "instance": "instance",
    "dim": "dimension",
    "dimension": "dimension",
    "seed": "seed",
}
DEFAULT_GROUP = ("strategy", "optimizer", "dim", "seed")


def fraction_solved(records: Sequence[RunRecord], group_by: Sequence[str] = DEFAULT_GROUP) -> dict[tuple, float]:
    """Share of records that reached the target, per group (sorted by group key).

    Adding ``"function"`` to ``group_by`` gives a per-function breakdown instead
    of pooling all (function, instance) cells.
    """
    if not records:
        raise ValueError("no records")
    return {g: s / t for g, (s, t) in solved_totals(records, group_by).items() if t}


def solved_totals(records: Sequence[RunRecord], group_by: Sequence[str] = DEFAULT_GROUP) -> dict[tuple, tuple[int, int]]:
    attrs = [GROUP_FIELDS[g] for g in group_by]
    counts: dict[tuple, list[int]] = defaultdict(lambda: [0, 0])
    for r in records:
        c = counts[tuple(getattr(r, a) for a in attrs)]
        c[0] += bool(r.reached_target)
        c[1] += 1
    return {g: (s, t) for g, (s, t) in sorted(counts.items())}
