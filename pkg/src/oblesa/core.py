"""Shared domain types, random streams and evaluation-budget accounting.

All objectives are minimized. Positions are float64 numpy vectors; populations
are stored as ``(n, d)`` arrays rather than lists of objects so the optimizers
can stay vectorized.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

Objective = Callable[[np.ndarray], np.ndarray]


class BudgetExhausted(Exception):
    """Raised when the evaluation budget runs out.

    Optimizer steps that are cut short attach the partially updated
    population as ``population``.
    """

    def __init__(self, message: str = "", population=None):
        super().__init__(message)
        self.population = population


@dataclass(frozen=True)
class Bounds:
    """Axis-aligned box ``[lower_i, upper_i]``."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.atleast_1d(np.asarray(self.lower, dtype=float)).copy()
        upper = np.atleast_1d(np.asarray(self.upper, dtype=float)).copy()
        if lower.ndim != 1 or lower.shape != upper.shape or lower.size < 1:
            raise ValueError("lower and upper must be 1-d vectors of equal length >= 1")
        if not np.all(lower < upper):
            raise ValueError("every lower bound must be strictly below its upper bound")
        lower.setflags(write=False)
        upper.setflags(write=False)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @classmethod
    def cube(cls, low: float, high: float, dim: int) -> "Bounds":
        return cls(np.full(dim, float(low)), np.full(dim, float(high)))

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower

    @property
    def diagonal(self) -> float:
        return float(np.linalg.norm(self.width))

    def contains(self, x: np.ndarray) -> np.ndarray:
        """Componentwise feasibility; works on a vector or an ``(n, d)`` array."""
        x = np.asarray(x, dtype=float)
        return np.all((x >= self.lower) & (x <= self.upper), axis=-1)

    def shifted(self, offset: np.ndarray) -> "Bounds":
        return Bounds(self.lower + offset, self.upper + offset)


def _check_dim(x: np.ndarray, bounds: Bounds) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1:] != (bounds.dim,):
        raise ValueError(f"position has dimension {x.shape[-1:]} but bounds have {bounds.dim}")
    return x


def clamp(position: np.ndarray, bounds: Bounds) -> np.ndarray:
    """Clip ``position`` (vector or rows of a matrix) into ``bounds``."""
    x = _check_dim(position, bounds)
    return np.clip(x, bounds.lower, bounds.upper)


@dataclass
class Individual:
    position: np.ndarray
    fitness: Optional[float] = None


@dataclass
class Population:
    """A set of candidate solutions sharing one box.

    ``positions`` is ``(n, d)``; ``fitness`` is ``(n,)`` with NaN for members
    that have not been evaluated yet.
    """

    positions: np.ndarray
    bounds: Bounds
    fitness: np.ndarray = None

    def __post_init__(self):
        self.positions = np.atleast_2d(np.asarray(self.positions, dtype=float))
        n, d = self.positions.shape
        if n == 0:
            raise ValueError("population must not be empty")
        if d != self.bounds.dim:
            raise ValueError("population dimension does not match bounds")
        if self.fitness is None:
            self.fitness = np.full(n, np.nan)
        else:
            self.fitness = np.asarray(self.fitness, dtype=float).reshape(n)

    def __len__(self) -> int:
        return self.positions.shape[0]

    @property
    def size(self) -> int:
        return len(self)

    @property
    def evaluated(self) -> bool:
        return not np.isnan(self.fitness).any()

    @property
    def members(self) -> list[Individual]:
        return [
            Individual(p.copy(), None if np.isnan(f) else float(f))
            for p, f in zip(self.positions, self.fitness)
        ]

    def best(self) -> Individual:
        i = int(np.nanargmin(self.fitness))
        return Individual(self.positions[i].copy(), float(self.fitness[i]))

    def copy(self) -> "Population":
        return Population(self.positions.copy(), self.bounds, self.fitness.copy())


@dataclass
class Problem:
    """Objective + box + target threshold + evaluation budget.

    The objective takes an ``(n, d)`` array and returns ``(n,)`` values. Every
    row that is *counted* costs one evaluation; :meth:`evaluate_many` may
    compute a few extra rows past the stopping point but never counts them,
    which is observationally identical to evaluating one point at a time.
    """

    objective: Objective
    bounds: Bounds
    target_value: float
    budget: int
    evals_used: int = 0
    name: str = ""
    optimum: Optional[np.ndarray] = None
    best_fitness: float = field(default=np.inf)

    @property
    def remaining(self) -> int:
        return self.budget - self.evals_used

    @property
    def exhausted(self) -> bool:
        return self.evals_used >= self.budget

    @property
    def solved(self) -> bool:
        return self.best_fitness <= self.target_value

    def evaluate(self, position: np.ndarray) -> float:
        x = _check_dim(position, self.bounds)
        if self.exhausted:
            raise BudgetExhausted(f"budget of {self.budget} evaluations used up")
        value = float(self.objective(x.reshape(1, -1))[0])
        self.evals_used += 1
        if value < self.best_fitness:
            self.best_fitness = value
        return value

    def evaluate_many(self, positions: np.ndarray, stop_at_target: bool = False) -> np.ndarray:
        """Evaluate rows in order; return the prefix that was actually counted.

        The prefix is shorter than the input when the budget runs out or, with
        ``stop_at_target``, right after the first row reaching the target.
        """
        x = np.atleast_2d(_check_dim(positions, self.bounds))
        if x.shape[0] == 0:
            return np.empty(0)
        if self.exhausted:
            raise BudgetExhausted(f"budget of {self.budget} evaluations used up")
        x = x[: self.remaining]
        values = np.asarray(self.objective(x), dtype=float).reshape(x.shape[0])
        if stop_at_target:
            hits = np.flatnonzero(values <= self.target_value)
            if hits.size:
                values = values[: hits[0] + 1]
        self.evals_used += values.size
        finite = values[~np.isnan(values)]
        if finite.size:
            self.best_fitness = min(self.best_fitness, float(finite.min()))
        return values


class RandomSource:
    """Seeded random stream built on numpy's PCG64 and ``SeedSequence``.

    Children are derived with :meth:`derive`, which hashes a key into the
    seed sequence entropy, so a child stream depends only on the parent seed
    and the key (never on how many draws the parent has made or on thread
    scheduling).
    """

    def __init__(self, seed: int | np.random.SeedSequence = 0):
        if isinstance(seed, np.random.SeedSequence):
            self._seq = seed
        else:
            self._seq = np.random.SeedSequence(int(seed))
        self.generator = np.random.Generator(np.random.PCG64(self._seq))

    @property
    def seed(self):
        return self._seq.entropy

    def derive(self, *key) -> "RandomSource":
        """Independent child stream keyed by ``key`` (any str()-able values)."""
        words = _hash_words("|".join(map(str, key)))
        entropy = self._seq.entropy
        entropy = list(entropy) if isinstance(entropy, (list, tuple)) else [int(entropy)]
        return RandomSource(np.random.SeedSequence(entropy + words))

    # thin forwarding so callers can treat this like a numpy Generator
    def random(self, size=None) -> np.ndarray:
        return self.generator.random(size)

    def uniform(self, low, high, size=None) -> np.ndarray:
        return self.generator.uniform(low, high, size)

    def integers(self, low, high=None, size=None) -> np.ndarray:
        return self.generator.integers(low, high, size)

    def normal(self, loc=0.0, scale=1.0, size=None) -> np.ndarray:
        return self.generator.normal(loc, scale, size)

    def permutation(self, x):
        return self.generator.permutation(x)


def _hash_words(text: str) -> list[int]:
    digest = hashlib.blake2b(text.encode("utf-8"), digest_size=16).digest()
    return [int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4)]
