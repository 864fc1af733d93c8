"""Initial-population strategies: uniform random, OBL and OBLESA."""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field

import numpy as np

from .core import Bounds, BudgetExhausted, Population, Problem, RandomSource, _check_dim
from .esa import AgentStatus, EsaParams, run_agents
from .neighbors import NeighborIndex

log = logging.getLogger(__name__)


class Strategy(str, enum.Enum):
    RANDOM = "random"
    OBL = "obl"
    OBLESA = "oblesa"


@dataclass
class InitConfig:
    n_pop: int = 100
    strategy: Strategy = Strategy.OBLESA
    esa_params: EsaParams = field(default_factory=EsaParams)

    def __post_init__(self):
        self.strategy = Strategy(self.strategy)
        if self.n_pop < 2:
            raise ValueError("n_pop must be >= 2")


def uniform_points(bounds: Bounds, n: int, rng: RandomSource) -> np.ndarray:
    return bounds.lower + rng.random((n, bounds.dim)) * bounds.width


def random_init(bounds: Bounds, n: int, rng: RandomSource) -> Population:
    """``n`` uniform points, left unevaluated."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return Population(uniform_points(bounds, n, rng), bounds)


def opposite(position: np.ndarray, bounds: Bounds) -> np.ndarray:
    """Reflect through the box centre: ``a_i + b_i - x_i``."""
    x = _check_dim(position, bounds)
    a, b = bounds.lower, bounds.upper
    # a + b - x can miss a bound by one ulp; pin the endpoints and clip the rest
    y = np.clip(a + b - x, a, b)
    y = np.where(x == a, b, y)
    return np.where(x == b, a, y)


def _select_best(problem: Problem, candidates: np.ndarray, n: int) -> Population:
    # stable sort keeps the earlier block first on ties
    fit = problem.evaluate_many(candidates)
    if fit.size < len(candidates):
        raise BudgetExhausted("budget ran out during initialization")
    order = np.argsort(fit, kind="stable")[:n]
    return Population(candidates[order], problem.bounds, fit[order])


def obl_init(problem: Problem, n: int, rng: RandomSource) -> Population:
    """Random points plus their opposites; keep the ``n`` fittest of the ``2n``."""
    if problem.remaining < 2 * n:
        raise BudgetExhausted(f"OBL needs {2 * n} evaluations, {problem.remaining} left")
    pts = uniform_points(problem.bounds, n, rng)
    return _select_best(problem, np.vstack([pts, opposite(pts, problem.bounds)]), n)


def esa_points(
    dataset: np.ndarray, bounds: Bounds, params: EsaParams, n_agents: int, rng: RandomSource
) -> np.ndarray:
    """Final positions of ``n_agents`` ESA agents launched at random over ``dataset``."""
    starts = uniform_points(bounds, n_agents, rng)
    index = NeighborIndex(dataset, exact=params.exact_knn, rng=rng.derive("ann"))
    agents = run_agents(index, bounds, params, starts)
    failed = sum(a.status is AgentStatus.FAILED for a in agents)
    if failed:
        log.warning("%d of %d ESA agents failed and kept their start", failed, n_agents)
    return np.array([a.position for a in agents])


def oblesa_initialize(problem: Problem, config: InitConfig, rng: RandomSource) -> Population:
    """Random + opposite points form the dataset; ``n_pop`` ESA agents search its
    empty regions; the best third of the tripled pool is returned.

    The first ``n_pop`` draws from ``rng`` are exactly those :func:`obl_init`
    would make, so with the same stream the OBL pool is a subset of this one.
    """
    n = config.n_pop
    if problem.remaining < 3 * n:
        raise BudgetExhausted(f"OBLESA needs {3 * n} evaluations, {problem.remaining} left")
    bounds = problem.bounds
    pts = uniform_points(bounds, n, rng)
    data = np.vstack([pts, opposite(pts, bounds)])
    agents = esa_points(data, bounds, config.esa_params, n, rng)
    return _select_best(problem, np.vstack([data, agents]), n)


def initialize(problem: Problem, config: InitConfig, rng: RandomSource) -> Population:
    """Dispatch on ``config.strategy``."""
    if config.strategy is Strategy.RANDOM:
        return random_init(problem.bounds, config.n_pop, rng)
    if config.strategy is Strategy.OBL:
        return obl_init(problem, config.n_pop, rng)
    return oblesa_initialize(problem, config, rng)
