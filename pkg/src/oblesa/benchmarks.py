"""BBOB-style noiseless test functions with shifted optima.

Each base function is written in shifted coordinates ``z = x - shift`` and is
vectorized over rows. An instance draws the optimum location uniformly in
``[-4, 4]^d`` (instance 0 keeps the unshifted base optimum). The objective is
offset so that the optimum value is exactly 0, which makes the target simply
``target_precision``. Rotations are not used.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .core import Bounds, Problem, RandomSource

DIMENSIONS = (2, 3, 5, 10, 20, 40)
DOMAIN = (-5.0, 5.0)
SHIFT_RANGE = (-4.0, 4.0)


def _cond(d: int, exponent: float) -> np.ndarray:
    """Per-coordinate weights ``10**(exponent * i / (d - 1))``."""
    if d == 1:
        return np.array([10.0 ** exponent])
    return 10.0 ** (exponent * np.arange(d) / (d - 1))


def sphere(z):
    return np.sum(z**2, axis=1)


def ellipsoid(z):
    return np.sum(_cond(z.shape[1], 6.0) * z**2, axis=1)


def rastrigin(z):
    d = z.shape[1]
    return 10.0 * d + np.sum(z**2 - 10.0 * np.cos(2.0 * np.pi * z), axis=1)


def linear_slope(z):
    # plateau below z_i = -5, as in the BBOB definition with a negative slope sign
    return np.sum(_cond(z.shape[1], 1.0) * (np.maximum(z, -5.0) + 5.0), axis=1)


def attractive_sector(z):
    s = np.where(z > 0.0, 100.0, 1.0)
    return np.sum((s * z) ** 2, axis=1) ** 0.9


def rosenbrock(z):
    a, b = z[:, :-1], z[:, 1:]
    return np.sum(100.0 * (a**2 - b) ** 2 + (a - 1.0) ** 2, axis=1)


def discus(z):
    return 1e6 * z[:, 0] ** 2 + np.sum(z[:, 1:] ** 2, axis=1)


def bent_cigar(z):
    return z[:, 0] ** 2 + 1e6 * np.sum(z[:, 1:] ** 2, axis=1)


def schaffers_f7(z):
    d = z.shape[1]
    if d < 2:
        raise ValueError("Schaffers F7 needs d >= 2")
    y = _cond(d, 0.5) * z
    s = np.sqrt(y[:, :-1] ** 2 + y[:, 1:] ** 2)
    terms = np.sqrt(s) + np.sqrt(s) * np.sin(50.0 * s**0.2) ** 2
    return (np.sum(terms, axis=1) / (d - 1)) ** 2


SCHWEFEL_ARGMIN = 4.2096874633


def schwefel(z):
    d = z.shape[1]
    u = 100.0 * z
    pen = np.sum(np.maximum(0.0, np.abs(z) - 5.0) ** 2, axis=1)
    return 4.189828872724339 - np.sum(u * np.sin(np.sqrt(np.abs(u))), axis=1) / (100.0 * d) + 100.0 * pen


@dataclass(frozen=True)
class BaseFunction:
    name: str
    fn: Callable[[np.ndarray], np.ndarray]
    argmin: float = 0.0  # base optimum coordinate (same in every dimension)
    boundary_optimum: bool = False  # optimum sits on the lower box corner


FUNCTIONS: dict[str, BaseFunction] = {
    f.name: f
    for f in (
        BaseFunction("sphere", sphere),
        BaseFunction("ellipsoid", ellipsoid),
        BaseFunction("rastrigin", rastrigin),
        BaseFunction("linear_slope", linear_slope, boundary_optimum=True),
        BaseFunction("attractive_sector", attractive_sector),
        BaseFunction("rosenbrock", rosenbrock, argmin=1.0),
        BaseFunction("discus", discus),
        BaseFunction("bent_cigar", bent_cigar),
        BaseFunction("schaffers_f7", schaffers_f7),
        BaseFunction("schwefel", schwefel, argmin=SCHWEFEL_ARGMIN),
    )
}


@dataclass(frozen=True)
class BenchmarkSpec:
    function_id: str
    dimension: int
    instance: int = 1
    target_precision: float = 1e-8
    budget_multiplier: int = 10_000

    def __post_init__(self):
        if self.function_id not in FUNCTIONS:
            raise KeyError(f"unknown benchmark function {self.function_id!r}")
        if self.dimension not in DIMENSIONS:
            raise ValueError(f"dimension must be one of {DIMENSIONS}, got {self.dimension}")
        if self.instance < 0:
            raise ValueError("instance must be >= 0")
        if not self.target_precision > 0:
            raise ValueError("target_precision must be positive")
        if self.budget_multiplier < 1:
            raise ValueError("budget_multiplier must be >= 1")

    @property
    def budget(self) -> int:
        return self.budget_multiplier * self.dimension


@dataclass
class SuiteConfig:
    functions: list[str] = field(default_factory=lambda: list(FUNCTIONS))
    instances: list[int] = field(default_factory=lambda: [1, 2, 3])
    target_precision: float = 1e-8
    budget_multiplier: int = 10_000

    def __post_init__(self):
        unknown = [f for f in self.functions if f not in FUNCTIONS]
        if unknown:
            raise KeyError(f"unknown benchmark functions {unknown}")
        if not self.functions or not self.instances:
            raise ValueError("suite needs at least one function and one instance")


def suite(dimension: int, config: Optional[SuiteConfig] = None) -> list[BenchmarkSpec]:
    config = config or SuiteConfig()
    return [
        BenchmarkSpec(f, dimension, i, config.target_precision, config.budget_multiplier)
        for f in config.functions
        for i in config.instances
    ]


def instance_shift(spec: BenchmarkSpec, rng: Optional[RandomSource] = None) -> np.ndarray:
    """Offset between base and instance coordinates (zero for instance 0)."""
    base = FUNCTIONS[spec.function_id]
    d = spec.dimension
    if spec.instance == 0:
        return np.zeros(d)
    if rng is None:
        rng = RandomSource(0).derive("instance", spec.function_id, d, spec.instance)
    location = rng.uniform(*SHIFT_RANGE, size=d)
    if base.boundary_optimum:
        return location
    return location - base.argmin


def make_problem(spec: BenchmarkSpec, rng: Optional[RandomSource] = None) -> Problem:
    """Build the shifted objective, box ``[-5, 5]^d``, target and budget.

    ``rng`` only drives the optimum shift; by default it is derived from the
    (function, dimension, instance) triple so every caller gets the same
    instance.
    """
    base = FUNCTIONS[spec.function_id]
    bounds = Bounds.cube(*DOMAIN, spec.dimension)
    shift = instance_shift(spec, rng)
    if base.boundary_optimum:
        x_opt = bounds.lower.copy()
    else:
        x_opt = shift + base.argmin
    fn = base.fn
    offset = float(fn((x_opt - shift).reshape(1, -1))[0])

    def objective(x: np.ndarray) -> np.ndarray:
        return fn(np.atleast_2d(x) - shift) - offset

    return Problem(
        objective=objective,
        bounds=bounds,
        target_value=spec.target_precision,
        budget=spec.budget,
        name=f"{spec.function_id}_i{spec.instance}_d{spec.dimension}",
        optimum=x_opt,
    )
