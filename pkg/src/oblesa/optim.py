"""Differential evolution (rand/1/bin) and grey-wolf optimization driven by a
shared :class:`~oblesa.core.Problem` budget.

Both optimizers stop the moment an evaluation reaches the target value. Every
generation is evaluated as one ordered batch; only the counted prefix of the
batch is committed.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .core import BudgetExhausted, Population, Problem, RandomSource, clamp


class Algorithm(str, enum.Enum):
    DE = "de"
    EGWO = "egwo"


def linear_schedule(iteration: int, max_iterations: int) -> float:
    """Control parameter ``a`` decaying linearly from 2 to 0."""
    return 2.0 * (1.0 - iteration / max_iterations)


@dataclass
class OptimizerConfig:
    algorithm: Algorithm = Algorithm.DE
    max_iterations: int = 500
    de_f: float = 0.5
    de_cr: float = 0.7
    de_retries: int = 10
    # swap in a non-linear decay here for enhanced GWO variants
    a_schedule: Callable[[int, int], float] = field(default=linear_schedule, repr=False)

    def __post_init__(self):
        self.algorithm = Algorithm(self.algorithm)
        if not 0 < self.de_f <= 2:
            raise ValueError("de_f must lie in (0, 2]")
        if not 0 <= self.de_cr <= 1:
            raise ValueError("de_cr must lie in [0, 1]")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.de_retries < 0:
            raise ValueError("de_retries must be >= 0")


@dataclass
class OptResult:
    best_position: np.ndarray
    best_fitness: float
    evals_used: int
    reached_target: bool
    iterations_run: int


def _commit(pop: Population, problem: Problem, positions: np.ndarray, greedy: bool) -> Population:
    """Evaluate ``positions`` in order and build the next generation.

    Rows past the counted prefix keep their current position and fitness.
    """
    values = problem.evaluate_many(positions, stop_at_target=True)
    m = values.size
    nxt = pop.copy()
    if greedy:
        better = values <= pop.fitness[:m]
        idx = np.flatnonzero(better)
        nxt.positions[idx] = positions[idx]
        nxt.fitness[idx] = values[idx]
    else:
        nxt.positions[:m] = positions[:m]
        nxt.fitness[:m] = values
    if m < len(pop) and not problem.solved:
        raise BudgetExhausted("budget ran out mid-generation", population=nxt)
    return nxt


def _distinct_triples(n: int, rng: RandomSource) -> np.ndarray:
    """For each row i, three distinct indices all different from i."""
    keys = rng.random((n, n))
    np.fill_diagonal(keys, np.inf)
    return np.argsort(keys, axis=1)[:, :3]


def de_step(pop: Population, problem: Problem, cfg: OptimizerConfig, rng: RandomSource) -> Population:
    """One synchronous DE/rand/1/bin generation with greedy replacement.

    Mutants leaving the box are re-drawn up to ``cfg.de_retries`` times before
    being clamped.
    """
    n, d = pop.positions.shape
    if n < 4:
        raise ValueError("DE needs a population of at least 4")
    if not pop.evaluated:
        raise ValueError("population must be fully evaluated")
    x = pop.positions
    bounds = problem.bounds

    r = _distinct_triples(n, rng)
    mutant = x[r[:, 0]] + cfg.de_f * (x[r[:, 1]] - x[r[:, 2]])
    for _ in range(cfg.de_retries):
        bad = np.flatnonzero(~bounds.contains(mutant))
        if bad.size == 0:
            break
        r = _distinct_triples(n, rng)[bad]
        mutant[bad] = x[r[:, 0]] + cfg.de_f * (x[r[:, 1]] - x[r[:, 2]])
    mutant = clamp(mutant, bounds)

    cross = rng.random((n, d)) < cfg.de_cr
    cross[np.arange(n), rng.integers(0, d, size=n)] = True
    trial = np.where(cross, mutant, x)
    return _commit(pop, problem, trial, greedy=True)


def _leaders(pop: Population) -> np.ndarray:
    order = np.argsort(pop.fitness, kind="stable")[:3]
    if order.size < 3:
        order = np.resize(order, 3)
    return pop.positions[order]


def egwo_step(
    pop: Population,
    problem: Problem,
    iteration: int,
    cfg: OptimizerConfig,
    rng: RandomSource,
    leaders: Optional[np.ndarray] = None,
    horizon: Optional[int] = None,
) -> Population:
    """Move every wolf to the mean of the alpha/beta/delta-guided positions.

    ``leaders`` is a ``(3, d)`` array (alpha, beta, delta); by default the
    three fittest members of ``pop``. ``horizon`` is the iteration count the
    ``a`` schedule decays over (``cfg.max_iterations`` if unset). ``rng`` is only asked for
    ``random(shape)`` draws, so a stub returning constants can pin ``A``/``C``.
    """
    if not pop.evaluated:
        raise ValueError("population must be fully evaluated")
    n, d = pop.positions.shape
    lead = _leaders(pop) if leaders is None else np.asarray(leaders, dtype=float)
    a = cfg.a_schedule(iteration, cfg.max_iterations if horizon is None else horizon)
    x = pop.positions
    r1 = np.asarray(rng.random((3, n, d)))
    r2 = np.asarray(rng.random((3, n, d)))
    A = 2.0 * a * r1 - a
    C = 2.0 * r2
    guided = lead[:, None, :] - A * np.abs(C * lead[:, None, :] - x[None, :, :])
    new = clamp(guided.mean(axis=0), problem.bounds)
    return _commit(pop, problem, new, greedy=False)


def _merge_leaders(archive: Optional[Population], pop: Population) -> Population:
    if archive is None:
        pool = pop
    else:
        pool = Population(
            np.vstack([archive.positions, pop.positions]),
            pop.bounds,
            np.concatenate([archive.fitness, pop.fitness]),
        )
    order = np.argsort(pool.fitness, kind="stable")[:3]
    return Population(pool.positions[order], pop.bounds, pool.fitness[order])


def run(problem: Problem, initial: Population, cfg: OptimizerConfig, rng: RandomSource) -> OptResult:
    """Evaluate what is missing from ``initial`` and iterate until the target is
    hit, the budget is spent or ``cfg.max_iterations`` generations have run.

    Grey-wolf leaders are kept as an elitist archive of the best three points
    seen so far, and ``a`` decays over the iterations the remaining budget can
    actually pay for, so a budget-capped run still ends in exploitation.
    """
    if not np.all(problem.bounds.contains(initial.positions)):
        raise ValueError("initial population must be feasible")
    pop = initial.copy()
    iterations = 0

    todo = np.flatnonzero(np.isnan(pop.fitness))
    if todo.size and not problem.exhausted:
        values = problem.evaluate_many(pop.positions[todo], stop_at_target=True)
        pop.fitness[todo[: values.size]] = values

    done = np.flatnonzero(~np.isnan(pop.fitness))
    if done.size and (problem.solved or problem.exhausted or done.size < len(pop)):
        return _result(problem, pop, iterations)
    if done.size == 0:
        return OptResult(pop.positions[0].copy(), np.inf, problem.evals_used, False, 0)

    archive = _merge_leaders(None, pop)
    best = pop.best()
    horizon = max(1, min(cfg.max_iterations, problem.remaining // len(pop)))
    for it in range(cfg.max_iterations):
        if problem.solved or problem.exhausted:
            break
        try:
            if cfg.algorithm is Algorithm.DE:
                pop = de_step(pop, problem, cfg, rng)
            else:
                pop = egwo_step(pop, problem, it, cfg, rng, leaders=archive.positions, horizon=horizon)
        except BudgetExhausted as exc:
            pop = exc.population
        iterations += 1
        archive = _merge_leaders(archive, pop)
        cand = pop.best()
        if cand.fitness < best.fitness:
            best = cand
    return OptResult(best.position, best.fitness, problem.evals_used, best.fitness <= problem.target_value, iterations)


def _result(problem: Problem, pop: Population, iterations: int) -> OptResult:
    best = pop.best()
    return OptResult(best.position, best.fitness, problem.evals_used, best.fitness <= problem.target_value, iterations)
