"""Spatial grids, temporal partitions and C/F splittings."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SpatialGrid",
    "TemporalMesh",
    "CfSplitting",
    "uniform_temporal",
    "shishkin_temporal",
    "coarsen",
]


@dataclass(frozen=True)
class SpatialGrid:
    """Uniform tensor grid on (a,b) x (c,d) with mx*my cells.

    Interior unknowns are ordered x-fastest (lexicographic in x, then y),
    giving (mx-1)*(my-1) degrees of freedom.
    """

    mx: int
    my: int
    a: float = 0.0
    b: float = 1.0
    c: float = 0.0
    d: float = 1.0

    def __post_init__(self):
        if self.mx < 2 or self.my < 2:
            raise ValueError("need at least 2 intervals per direction")
        if not (self.b > self.a and self.d > self.c):
            raise ValueError("degenerate domain bounds")

    @property
    def hx(self) -> float:
        return (self.b - self.a) / self.mx

    @property
    def hy(self) -> float:
        return (self.d - self.c) / self.my

    @property
    def ndof(self) -> int:
        return (self.mx - 1) * (self.my - 1)

    def interior_nodes(self):
        """Coordinates of interior nodes as flat (ndof,) arrays (x, y)."""
        x = self.a + self.hx * np.arange(1, self.mx)
        y = self.c + self.hy * np.arange(1, self.my)
        X, Y = np.meshgrid(x, y)  # rows = y index, cols = x index
        return X.ravel(), Y.ravel()


@dataclass(frozen=True)
class TemporalMesh:
    """Ordered time points t_0 < ... < t_N starting at 0."""

    points: np.ndarray = field(repr=False)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        object.__setattr__(self, "points", pts)
        if pts.ndim != 1 or pts.size < 2:
            raise ValueError("temporal mesh needs at least two points")
        if np.any(np.diff(pts) <= 0):
            raise ValueError("time points must be strictly increasing")
        if pts[0] != 0.0:
            raise ValueError("temporal mesh must start at t=0")

    @property
    def n_intervals(self) -> int:
        return self.points.size - 1

    @property
    def final_time(self) -> float:
        return float(self.points[-1])

    @property
    def widths(self) -> np.ndarray:
        """Interval widths t_j - t_{j-1}, length N."""
        return np.diff(self.points)

    def is_uniform(self, rtol: float = 1e-12) -> bool:
        w = self.widths
        return bool(np.all(np.abs(w - w[0]) <= rtol * w[0]))


@dataclass(frozen=True)
class CfSplitting:
    """Coarsening by factor m: C-points at {0, m, 2m, ..., N}."""

    n_intervals: int
    m: int

    def __post_init__(self):
        if self.m < 2:
            raise ValueError("coarsening factor must be >= 2")
        if self.n_intervals % self.m != 0:
            raise ValueError(
                f"coarsening factor {self.m} does not divide N={self.n_intervals}"
            )

    @property
    def n_coarse(self) -> int:
        return self.n_intervals // self.m

    @property
    def c_indices(self) -> np.ndarray:
        return np.arange(0, self.n_intervals + 1, self.m)

    @property
    def f_indices(self) -> np.ndarray:
        mask = np.ones(self.n_intervals + 1, dtype=bool)
        mask[:: self.m] = False
        return np.nonzero(mask)[0]


def uniform_temporal(T: float, N: int) -> TemporalMesh:
    """Uniform partition of [0, T] into N intervals."""
    if T <= 0:
        raise ValueError("final time must be positive")
    if N < 1:
        raise ValueError("need at least one interval")
    return TemporalMesh(np.linspace(0.0, T, N + 1))


def shishkin_temporal(N: int, epsilon: float, T: float = 1.0) -> TemporalMesh:
    """Piecewise-uniform partition graded toward both ends of [0, T].

    On the unit interval the transition point is sigma = 2*eps*ln(N); the
    three pieces [0, sigma], [sigma, 1-sigma], [1-sigma, 1] carry N/4, N/2
    and N/4 uniform intervals.  For general T all breakpoints are scaled.
    """
    if N % 4 != 0:
        raise ValueError("interval count must be divisible by 4")
    if T <= 0:
        raise ValueError("final time must be positive")
    sigma = 2.0 * epsilon * math.log(N)
    if not 0.0 < sigma < 0.5:
        raise ValueError(
            f"transition point {sigma:.6g} outside (0, 1/2); grading degenerates"
        )
    left = np.linspace(0.0, sigma, N // 4 + 1)
    middle = np.linspace(sigma, 1.0 - sigma, N // 2 + 1)
    right = np.linspace(1.0 - sigma, 1.0, N // 4 + 1)
    pts = np.concatenate([left, middle[1:], right[1:]])
    return TemporalMesh(T * pts)


def coarsen(mesh: TemporalMesh, m: int) -> TemporalMesh:
    """Keep every m-th point (injection)."""
    if mesh.n_intervals % m != 0:
        raise ValueError(f"factor {m} does not divide N={mesh.n_intervals}")
    return TemporalMesh(mesh.points[::m].copy())
