"""Triangular discretization of the belief simplex and value interpolation.

The 3-simplex is charted by its first two coordinates (p1, p2); a grid with
``m`` bins per dimension keeps the lattice points i/(m-1), j/(m-1) with
i + j <= m - 1, giving m(m+1)/2 points.  Value tables are stored per fixation
location over the grid and evaluated off-grid either at the Euclidean-nearest
grid point or by exact linear (barycentric) interpolation over the enclosing
triangle of the standard lattice triangulation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

NEAREST = "nearest"
BARYCENTRIC = "barycentric"


class SimplexGrid:
    """Uniform triangular grid over the 3-simplex.

    Points are ordered lexicographically in lattice coordinates (i, j) where
    p1 = i/(m-1), p2 = j/(m-1), p3 = 1 - p1 - p2.
    """

    def __init__(self, m: int):
        m = int(m)
        if m < 2:
            raise ValueError(f"grid needs at least 2 bins per dimension, got {m}")
        self.m = m
        self.n_points = m * (m + 1) // 2
        ii, jj = [], []
        for i in range(m):
            for j in range(m - i):
                ii.append(i)
                jj.append(j)
        self.lattice = np.column_stack([np.asarray(ii, dtype=np.int64),
                                        np.asarray(jj, dtype=np.int64)])
        scale = float(m - 1)
        p1 = self.lattice[:, 0] / scale
        p2 = self.lattice[:, 1] / scale
        p3 = (m - 1 - self.lattice[:, 0] - self.lattice[:, 1]) / scale
        self.points = np.column_stack([p1, p2, p3])
        self.points.flags.writeable = False
        # flat index of lattice point (i, 0)
        i = np.arange(m, dtype=np.int64)
        self._row_offset = i * m - (i * (i - 1)) // 2

    def __repr__(self):
        return f"SimplexGrid(m={self.m})"

    def flat_index(self, i, j):
        """Flat index of lattice coordinates; vectorized."""
        return self._row_offset[np.asarray(i)] + np.asarray(j)

    def _cells(self, q: np.ndarray):
        """Anchor lattice cell and fractional offsets for queries (n, 2)."""
        m = self.m
        scale = m - 1
        u = np.clip(q[:, 0], 0.0, 1.0) * scale
        v = np.clip(q[:, 1], 0.0, 1.0) * scale
        i0 = np.minimum(u.astype(np.int64), m - 2)
        j0 = np.minimum(v.astype(np.int64), m - 2)
        # keep the anchor cell inside the simplex (i0 + j0 <= m - 2); this
        # only triggers for queries sitting exactly on interior lattice points
        # of the diagonal edge
        over = (i0 + j0) > (m - 2)
        dec_i = over & (i0 > 0)
        i0 = i0 - dec_i
        j0 = j0 - (over & ~dec_i)
        return i0, j0, u - i0, v - j0

    def barycentric_many(self, q):
        """Interpolation stencils for a batch of (p1, p2) queries.

        Returns ``(verts, weights)`` with shapes (n, 3): flat indices of the
        enclosing triangle's corners and convex weights summing to 1.
        """
        q = np.asarray(q, dtype=np.float64)
        i0, j0, fu, fv = self._cells(q)
        m = self.m
        # cells touching the diagonal edge only have their lower triangle
        lower = (fu + fv <= 1.0) | ((i0 + j0) == (m - 2))
        va = np.where(lower, self.flat_index(i0, j0), self.flat_index(i0 + 1, j0 + 1))
        vb = np.where(lower, self.flat_index(i0 + 1, j0), self.flat_index(i0, j0 + 1))
        vc = np.where(lower, self.flat_index(i0, j0 + 1), self.flat_index(i0 + 1, j0))
        wa = np.where(lower, 1.0 - fu - fv, fu + fv - 1.0)
        wb = np.where(lower, fu, 1.0 - fu)
        wc = np.where(lower, fv, 1.0 - fv)
        weights = np.stack([wa, wb, wc], axis=1)
        np.maximum(weights, 0.0, out=weights)  # clip float fuzz on edges
        weights /= weights.sum(axis=1, keepdims=True)
        verts = np.stack([va, vb, vc], axis=1).astype(np.int32)
        return verts, weights

    def nearest_many(self, q):
        """Flat index of the Euclidean-nearest grid point for each query.

        Distances are measured in the (p1, p2) chart; ties resolve to the
        lowest flat index.
        """
        q = np.asarray(q, dtype=np.float64)
        i0, j0, _, _ = self._cells(q)
        scale = float(self.m - 1)
        n = q.shape[0]
        best_d = np.full(n, np.inf)
        best_idx = np.zeros(n, dtype=np.int64)
        # candidate corners in ascending flat-index order so that argmin-style
        # first-wins comparison breaks ties toward the lowest index
        for di, dj in ((0, 0), (0, 1), (1, 0), (1, 1)):
            ci, cj = i0 + di, j0 + dj
            valid = (ci + cj) <= (self.m - 1)
            d = np.where(
                valid,
                (q[:, 0] - ci / scale) ** 2 + (q[:, 1] - cj / scale) ** 2,
                np.inf,
            )
            take = d < best_d
            best_d = np.where(take, d, best_d)
            best_idx = np.where(take, self.flat_index(np.minimum(ci, self.m - 1),
                                                      np.minimum(cj, self.m - 1)),
                                best_idx)
        return best_idx

    def nearest(self, p) -> int:
        """Nearest grid point to a full belief vector."""
        p = np.asarray(p, dtype=np.float64)
        return int(self.nearest_many(p[None, :2])[0])


def enumerate_points(m: int) -> SimplexGrid:
    """Build the grid with ``m`` bins per free dimension."""
    return SimplexGrid(m)


@dataclass
class ValueFunction:
    """Per-fixation value table over a simplex grid."""

    grid: SimplexGrid
    values: np.ndarray  # (n_fixations, n_points)
    interp: str = BARYCENTRIC

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2 or self.values.shape[1] != self.grid.n_points:
            raise ValueError(
                f"values must have shape (n_fixations, {self.grid.n_points})")
        if self.interp not in (NEAREST, BARYCENTRIC):
            raise ValueError(f"unknown interpolation scheme {self.interp!r}")

    @property
    def n_fixations(self) -> int:
        return self.values.shape[0]

    def interpolate_many(self, a: int, q) -> np.ndarray:
        """Values at a batch of (p1, p2) queries under fixation ``a``."""
        q = np.asarray(q, dtype=np.float64)
        if self.interp == NEAREST:
            return self.values[a][self.grid.nearest_many(q)]
        verts, weights = self.grid.barycentric_many(q)
        return np.einsum("nt,nt->n", weights, self.values[a][verts])

    def interpolate(self, a: int, p) -> float:
        """Value at a full belief vector under fixation ``a``."""
        p = np.asarray(p, dtype=np.float64)
        return float(self.interpolate_many(a, p[None, :2])[0])


def interpolate(vf: ValueFunction, a: int, p) -> float:
    return vf.interpolate(a, p)
