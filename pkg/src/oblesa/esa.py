"""Empty-space search: agents drift under Lennard-Jones-style forces from their
k nearest data points until they settle in sparse regions of the box.

Sign convention: ``lj_force`` is positive when the agent is closer than the
equilibrium distance ``sigma * 2**(1/6)``. Positive force pushes the agent
*away* from that data point, so the net force used for movement is
``sum_i -u_i * F(r_i)`` with ``u_i`` the unit vector from agent to point.

Agents move in the frame of the box's lower corner, with the dataset and the
starts snapped to a power-of-two lattice (about 1e-8 of the box width). A
translated problem then runs bit-for-bit the same arithmetic, which keeps the
fixed-step dynamics translation-equivariant: they are chaotic enough that
ulp-level offsets would otherwise grow to step-size differences.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .core import Bounds
from .neighbors import NeighborIndex

log = logging.getLogger(__name__)

EQUILIBRIUM_RATIO = 2.0 ** (1.0 / 6.0)
_EPS = np.finfo(float).eps

Constraint = Callable[[np.ndarray], float]  # feasible iff value <= 0

LATTICE_BITS = 26


class AgentStatus(str, enum.Enum):
    CONVERGED = "converged"
    STEP_LIMIT = "step_limit"
    CONSTRAINT_EXIT = "constraint_exit"
    FAILED = "failed"


@dataclass
class EsaParams:
    """Search parameters. ``k=None`` means ``d + 1``; ``sigma=None`` means
    half the mean distance to the current neighbours, recomputed every step.
    With ``relative_step`` the step is ``alpha`` times the box diagonal."""

    k: Optional[int] = None
    sigma: Optional[float] = None
    n_steps: int = 1000
    alpha: float = 0.01
    delta: float = 1e-6
    relative_step: bool = True
    exact_knn: Optional[bool] = None

    def __post_init__(self):
        if self.k is not None and self.k < 1:
            raise ValueError("k must be >= 1")
        if self.sigma is not None and not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if self.n_steps < 1:
            raise ValueError("n_steps must be >= 1")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if not self.delta > 0:
            raise ValueError("delta must be positive")

    def neighbors_for(self, dim: int, n_points: int) -> int:
        k = dim + 1 if self.k is None else self.k
        return min(k, n_points)

    def step_for(self, bounds: Bounds) -> float:
        return self.alpha * bounds.diagonal if self.relative_step else self.alpha


@dataclass
class Agent:
    position: np.ndarray
    status: AgentStatus
    steps_taken: int
    start: np.ndarray = None
    trajectory: Optional[np.ndarray] = field(default=None, repr=False)


def lj_force(r, sigma):
    """Scalar Lennard-Jones force ``24/sigma * (2 (sigma/r)^13 - (sigma/r)^7)``."""
    r = np.asarray(r, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if np.any(r <= 0):
        raise ValueError("distance must be positive")
    if np.any(sigma <= 0):
        raise ValueError("sigma must be positive")
    t = sigma / r
    t7 = t**7
    out = 24.0 / sigma * (2.0 * t7 * t**6 - t7)
    return out if out.ndim else float(out)


def adaptive_sigma(agent_pos, neighbors) -> float:
    neighbors = np.atleast_2d(np.asarray(neighbors, dtype=float))
    if neighbors.shape[0] == 0:
        raise ValueError("need at least one neighbour")
    r = np.linalg.norm(neighbors - np.asarray(agent_pos, dtype=float), axis=1)
    return 0.5 * float(r.mean())


def _net_force(agents, neighbors, sigma):
    """Batched net force. ``agents`` (m, d), ``neighbors`` (m, k, d), ``sigma``
    (m,) or None for adaptive. Returns (force (m, d), magnitude (m,), r (m, k)).

    Magnitudes below the rounding noise of the force terms are reported as 0.
    Callers handle ``r == 0`` rows; they come back non-finite.
    """
    diff = neighbors - agents[:, None, :]
    r = np.sqrt(np.einsum("mkd,mkd->mk", diff, diff))
    if sigma is None:
        sigma = (0.5 / r.shape[1]) * r.sum(axis=1, keepdims=True)
    elif np.ndim(sigma) == 0:
        sigma = np.full((r.shape[0], 1), float(sigma))
    else:
        sigma = np.asarray(sigma, dtype=float).reshape(-1, 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = sigma / r
        t2 = t * t
        t7 = t2 * t2 * t2 * t
        t13 = t7 * t2 * t2 * t2
        scale = 24.0 / sigma
        f = scale * (2.0 * t13 - t7)
        force = -np.einsum("mk,mkd->md", f / r, diff)
        mag = np.sqrt(np.einsum("md,md->m", force, force))
        noise = 8.0 * _EPS * (scale[:, 0] * (2.0 * t13 + t7).sum(axis=1))
    mag[mag <= noise] = 0.0
    return force, mag, r


def resultant_direction(agent_pos, neighbors, sigma) -> tuple[np.ndarray, float]:
    """Unit direction of the net force on the agent and its magnitude."""
    agent_pos = np.asarray(agent_pos, dtype=float)
    neighbors = np.atleast_2d(np.asarray(neighbors, dtype=float))
    if neighbors.shape[0] == 0:
        raise ValueError("need at least one neighbour")
    if np.any(np.all(neighbors == agent_pos, axis=1)):
        raise ValueError("agent coincides with a data point")
    if sigma is not None and not sigma > 0:
        raise ValueError("sigma must be positive")
    force, mag, _ = _net_force(agent_pos[None, :], neighbors[None], None if sigma is None else [sigma])
    if mag[0] == 0.0:
        return np.zeros_like(agent_pos), 0.0
    return force[0] / mag[0], float(mag[0])


def _feasible(x, bounds, constraints, origin=None):
    ok = bounds.contains(x)
    if constraints:
        absolute = x if origin is None else origin + x
        for c in constraints:
            ok &= np.array([c(row) <= 0 for row in absolute], dtype=bool)
    return ok


class _Frame:
    """Box-relative coordinates on a dyadic lattice.

    The quantum is a power of two picked from the rounded log-width, so boxes
    that differ by a translation (and hence by rounding in their width) get
    the same quantum, the same snapped data and the same relative box.
    """

    def __init__(self, bounds: Bounds):
        self.origin = bounds.lower
        self.bounds = bounds
        self.quantum = np.exp2(np.round(np.log2(bounds.width)) - LATTICE_BITS)
        self.box = Bounds(np.zeros(bounds.dim), np.floor(bounds.width / self.quantum) * self.quantum)

    def inward(self, x):
        return np.round((x - self.origin) / self.quantum) * self.quantum

    def outward(self, start, z0, z):
        # report the lattice displacement from the exact start
        return np.clip(start + (z - z0), self.bounds.lower, self.bounds.upper)


def run_agents(
    index: NeighborIndex,
    bounds: Bounds,
    params: EsaParams,
    starts: np.ndarray,
    constraints: Sequence[Constraint] = (),
    record_trajectory: bool = False,
) -> list[Agent]:
    """Run independent agents in lock-step; each follows the single-agent loop.

    Per step: query k neighbours, compute the net force; if its magnitude is
    below ``delta`` the agent stops (converged) where it is; otherwise it moves
    one step along the force direction. A move that leaves the box (or breaks
    a constraint) ends the agent at its last feasible position.
    """
    starts = np.atleast_2d(np.asarray(starts, dtype=float))
    if starts.shape[1] != bounds.dim or index.dim != bounds.dim:
        raise ValueError("dimension mismatch between starts, index and bounds")
    if not np.all(_feasible(starts, bounds, constraints)):
        raise ValueError("agent start outside the feasible region")
    m = starts.shape[0]
    k = params.neighbors_for(bounds.dim, len(index))
    frame = _Frame(bounds)
    box = frame.box
    step = params.step_for(box)
    index = index.rebased(frame.inward(index.points))
    data = index.points
    origin = np.clip(frame.inward(starts), box.lower, box.upper)
    pos = origin.copy()
    status = np.full(m, None, dtype=object)
    steps = np.zeros(m, dtype=int)
    active = np.arange(m)
    traj = [[p.copy()] for p in pos] if record_trajectory else None

    for _ in range(params.n_steps):
        if active.size == 0:
            break
        cur = pos[active]
        nbr = index.neighbors(cur, k)
        force, mag, r = _net_force(cur, data[nbr], params.sigma)
        bad = ~np.isfinite(mag)
        if bad.any():
            bad |= (r == 0.0).any(axis=1)
            for i in active[bad]:
                log.warning("ESA agent %d hit a data point; falling back to its start", i)
                pos[i] = origin[i]
                status[i] = AgentStatus.FAILED
        else:
            bad = (r == 0.0).any(axis=1)
        conv = (mag < params.delta) & ~bad
        if conv.any():
            status[active[conv]] = AgentStatus.CONVERGED
        moving = ~(bad | conv)
        mv = active[moving]
        proposal = cur[moving] + force[moving] * (step / mag[moving])[:, None]
        if constraints:
            ok = _feasible(proposal, box, constraints, frame.origin)
        else:
            ok = ((proposal >= box.lower) & (proposal <= box.upper)).all(axis=1)
        if not ok.all():
            status[mv[~ok]] = AgentStatus.CONSTRAINT_EXIT
        keep = mv[ok]
        pos[keep] = proposal[ok]
        steps[mv] += 1
        if record_trajectory:
            for i, p in zip(keep, proposal[ok]):
                traj[i].append(p.copy())
        active = keep
    status[active] = AgentStatus.STEP_LIMIT

    return [
        Agent(
            position=frame.outward(starts[i], origin[i], pos[i]),
            status=status[i],
            steps_taken=int(steps[i]),
            start=starts[i].copy(),
            trajectory=frame.outward(starts[i], origin[i], np.array(traj[i])) if record_trajectory else None,
        )
        for i in range(m)
    ]


def run_agent(
    index: NeighborIndex,
    bounds: Bounds,
    params: EsaParams,
    start: np.ndarray,
    constraints: Sequence[Constraint] = (),
    record_trajectory: bool = False,
) -> Agent:
    return run_agents(index, bounds, params, np.asarray(start, dtype=float)[None, :], constraints, record_trajectory)[0]
