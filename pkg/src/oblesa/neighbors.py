"""k-nearest-neighbour lookup over a fixed point set.

Exact queries go through ``scipy.spatial.cKDTree``. The approximate mode is a
random-projection index: points are projected with a seeded Gaussian matrix
into a lower-dimensional space, an overscan of candidates is picked there by a
brute-force matrix product (cheap because the projected dimension is small),
and the candidates are re-ranked by true Euclidean distance.
"""

from __future__ import annotations

from typing import Optional

import numpy as np
from scipy.spatial import cKDTree

from .core import RandomSource

EXACT_MAX_DIM = 10
# brute-force-sized sets: a k-d tree beats projection filtering at any d
EXACT_MAX_POINTS = 5000


class NeighborIndex:
    def __init__(
        self,
        points: np.ndarray,
        exact: Optional[bool] = None,
        rng: Optional[RandomSource] = None,
        projection_dim: int = 16,
        overscan: int = 3,
    ):
        pts = np.atleast_2d(np.asarray(points, dtype=float)).copy()
        if pts.shape[0] == 0:
            raise ValueError("neighbor index needs at least one point")
        pts.setflags(write=False)
        self.points = pts
        n, d = pts.shape
        if exact is None:
            exact = d <= EXACT_MAX_DIM or n <= EXACT_MAX_POINTS
        self.exact = bool(exact)
        self.overscan = overscan
        if self.exact or projection_dim >= d:
            self.exact = True
            self._projection = None
            self._tree = cKDTree(pts)
        else:
            rng = rng or RandomSource(0)
            self._projection = rng.normal(size=(d, projection_dim)) / np.sqrt(projection_dim)
            self._projected = pts @ self._projection
            self._projected_sq = np.einsum("np,np->n", self._projected, self._projected)

    def rebased(self, points: np.ndarray) -> "NeighborIndex":
        """Same search mode (and projection) over a same-shaped point set,
        e.g. the dataset expressed in another coordinate frame."""
        pts = np.asarray(points, dtype=float)
        if pts.shape != self.points.shape:
            raise ValueError("rebased points must have the original shape")
        if self.exact:
            return NeighborIndex(pts, exact=True)
        out = NeighborIndex.__new__(NeighborIndex)
        out.points = pts.copy()
        out.points.setflags(write=False)
        out.exact, out.overscan = False, self.overscan
        out._projection = self._projection
        out._projected = out.points @ out._projection
        out._projected_sq = np.einsum("np,np->n", out._projected, out._projected)
        return out

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def query(self, q: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(distances, indices)`` of the ``k`` nearest points, ascending.

        ``q`` may be a single vector (results are 1-d) or an ``(m, d)`` batch.
        """
        q = np.asarray(q, dtype=float)
        single = q.ndim == 1
        q = np.atleast_2d(q)
        if q.shape[1] != self.dim:
            raise ValueError("query dimension does not match index")
        if not 1 <= k <= len(self):
            raise ValueError(f"k must be in [1, {len(self)}], got {k}")
        if self.exact:
            dist, idx = self._tree.query(q, k=k)
            dist, idx = dist.reshape(len(q), k), idx.reshape(len(q), k)
        else:
            dist, idx = self._approximate(q, k)
        if single:
            return dist[0], idx[0]
        return dist, idx

    def neighbors(self, q: np.ndarray, k: int) -> np.ndarray:
        """Indices only, for an ``(m, d)`` batch; skips argument checks."""
        if self.exact:
            return self._tree.query(q, k=k)[1].reshape(len(q), k)
        return self._approximate(q, k)[1]

    def _approximate(self, q, k):
        n = len(self)
        m = min(n, self.overscan * k)
        qp = q @ self._projection
        d2 = self._projected_sq[None, :] - 2.0 * (qp @ self._projected.T)
        if m < n:
            cand = np.argpartition(d2, m - 1, axis=1)[:, :m]
        else:
            cand = np.broadcast_to(np.arange(n), (len(q), n))
        diff = self.points[cand] - q[:, None, :]
        dist = np.sqrt(np.einsum("mkd,mkd->mk", diff, diff))
        order = np.argsort(dist, axis=1, kind="stable")[:, :k]
        rows = np.arange(len(q))[:, None]
        return dist[rows, order], cand[rows, order]
