"""
Regular chart grids and the two interpolation schemes built on them.

Fields that need derivatives (metric, one-form) are realized with bicubic
splines; matrix potentials use cubic convolution, whose local 4x4 footprint
gives an explicit sparse interpolation matrix with an exact transpose.
"""

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np
from scipy import sparse
from scipy.interpolate import RectBivariateSpline


@dataclass(frozen=True)
class BoxGrid:
    """Square-cell grid over a chart box; values are indexed ``[i1, i2]``."""

    origin: Tuple[float, float]
    spacing: float
    shape: Tuple[int, int]

    @classmethod
    def covering(cls, lower: Sequence[float], upper: Sequence[float], n: int, pad: int = 3) -> "BoxGrid":
        """``n x n`` grid covering the box ``[lower, upper]`` with ``pad`` extra cells per side."""
        if n < 2 * pad + 2:
            raise ValueError(f"grid of {n} nodes cannot hold {pad} padding cells per side")
        lower = np.asarray(lower, dtype=float)
        upper = np.asarray(upper, dtype=float)
        spacing = float(np.max(upper - lower)) / (n - 1 - 2 * pad)
        origin = lower - pad * spacing
        return cls((float(origin[0]), float(origin[1])), spacing, (int(n), int(n)))

    def padded(self, extra: int) -> "BoxGrid":
        """Same node lattice with ``extra`` more cells on every side."""
        return BoxGrid(
            (self.origin[0] - extra * self.spacing, self.origin[1] - extra * self.spacing),
            self.spacing,
            (self.shape[0] + 2 * extra, self.shape[1] + 2 * extra),
        )

    @property
    def size(self) -> int:
        return self.shape[0] * self.shape[1]

    def axes(self) -> Tuple[np.ndarray, np.ndarray]:
        a1 = self.origin[0] + self.spacing * np.arange(self.shape[0])
        a2 = self.origin[1] + self.spacing * np.arange(self.shape[1])
        return a1, a2

    def nodes(self) -> np.ndarray:
        """Node coordinates, shape ``(n1, n2, 2)``."""
        a1, a2 = self.axes()
        g1, g2 = np.meshgrid(a1, a2, indexing="ij")
        return np.stack([g1, g2], axis=-1)

    def key(self) -> Tuple[float, float, float, int, int]:
        return (self.origin[0], self.origin[1], self.spacing, self.shape[0], self.shape[1])

    def interpolation_matrix(self, points: np.ndarray) -> sparse.csr_matrix:
        """Sparse cubic-convolution weights mapping node values to ``points``.

        Footprint nodes outside the grid are dropped, i.e. treated as zero.
        """
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        n_pts = pts.shape[0]
        n1, n2 = self.shape

        u1 = (pts[:, 0] - self.origin[0]) / self.spacing
        u2 = (pts[:, 1] - self.origin[1]) / self.spacing
        i1 = np.floor(u1).astype(np.int64)
        i2 = np.floor(u2).astype(np.int64)
        w1 = cubic_weights(u1 - i1)
        w2 = cubic_weights(u2 - i2)

        offsets = np.arange(-1, 3)
        rows = np.repeat(np.arange(n_pts), 16)
        c1 = (i1[:, None, None] + offsets[None, :, None]) + np.zeros((1, 1, 4), dtype=np.int64)
        c2 = (i2[:, None, None] + offsets[None, None, :]) + np.zeros((1, 4, 1), dtype=np.int64)
        weights = (w1[:, :, None] * w2[:, None, :]).reshape(-1)
        c1 = c1.reshape(-1)
        c2 = c2.reshape(-1)

        valid = (c1 >= 0) & (c1 < n1) & (c2 >= 0) & (c2 < n2)
        cols = c1[valid] * n2 + c2[valid]
        return sparse.csr_matrix((weights[valid], (rows[valid], cols)), shape=(n_pts, n1 * n2))

    def interpolate(self, values: np.ndarray, points: np.ndarray) -> np.ndarray:
        """Cubic-convolution interpolation of ``values[i1, i2, ...]`` at ``points[..., 2]``."""
        points = np.asarray(points, dtype=float)
        lead = points.shape[:-1]
        trailing = values.shape[2:]
        flat = values.reshape(self.size, -1)
        out = self.interpolation_matrix(points) @ flat
        return np.asarray(out).reshape(lead + trailing)


def cubic_weights(t: np.ndarray) -> np.ndarray:
    """Keys cubic-convolution weights (a = -1/2) for offsets -1, 0, 1, 2."""
    t = np.asarray(t, dtype=float)
    t2 = t * t
    t3 = t2 * t
    return np.stack([
        0.5 * (-t3 + 2.0 * t2 - t),
        0.5 * (3.0 * t3 - 5.0 * t2 + 2.0),
        0.5 * (-3.0 * t3 + 4.0 * t2 + t),
        0.5 * (t3 - t2),
    ], axis=-1)


class SplineField:
    """Bicubic spline realization of a multi-component field on a ``BoxGrid``."""

    def __init__(self, grid: BoxGrid, values: np.ndarray):
        values = np.asarray(values, dtype=float)
        if values.shape[:2] != grid.shape:
            raise ValueError(f"values of shape {values.shape} do not match grid {grid.shape}")
        self.grid = grid
        self.component_shape = values.shape[2:]
        a1, a2 = grid.axes()
        flat = values.reshape(grid.shape + (-1,))
        self._splines = [RectBivariateSpline(a1, a2, flat[:, :, c], kx=3, ky=3)
                         for c in range(flat.shape[-1])]

    def __call__(self, x: np.ndarray, d1: int = 0, d2: int = 0) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        lead = x.shape[:-1]
        p1 = x[..., 0].reshape(-1)
        p2 = x[..., 1].reshape(-1)
        cols = [spline.ev(p1, p2, dx=d1, dy=d2) for spline in self._splines]
        return np.stack(cols, axis=-1).reshape(lead + self.component_shape)
