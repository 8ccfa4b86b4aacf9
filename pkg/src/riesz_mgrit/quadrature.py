"""Triangle quadrature on the uniform criss-cross triangulation.

Each grid cell is split along its lower-left to upper-right diagonal into
two triangles.  Rules are stored in barycentric coordinates so the same
tables serve both source-term integration (against hat functions) and
error integration (against the linear interpolant).
"""

from __future__ import annotations

import numpy as np
from scipy.sparse import csr_matrix

from .mesh import SpatialGrid

__all__ = ["triangle_rule", "TriQuadrature"]

# 7-point Radon rule, exact for degree 5
_R7_A1, _R7_B1, _R7_W1 = 0.059715871789770, 0.470142064105115, 0.132394152788506
_R7_A2, _R7_B2, _R7_W2 = 0.797426985353087, 0.101286507323456, 0.125939180544827


def _base_rule(rule: str):
    if rule == "midpoint":
        pts = np.array(
            [[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]]
        )
        w = np.full(3, 1.0 / 3.0)
    elif rule == "radon7":
        pts = np.array(
            [
                [1 / 3, 1 / 3, 1 / 3],
                [_R7_A1, _R7_B1, _R7_B1],
                [_R7_B1, _R7_A1, _R7_B1],
                [_R7_B1, _R7_B1, _R7_A1],
                [_R7_A2, _R7_B2, _R7_B2],
                [_R7_B2, _R7_A2, _R7_B2],
                [_R7_B2, _R7_B2, _R7_A2],
            ]
        )
        w = np.array([9 / 40, _R7_W1, _R7_W1, _R7_W1, _R7_W2, _R7_W2, _R7_W2])
    else:
        raise ValueError(f"unknown rule {rule!r}")
    return pts, w


def _subdivide(corners: np.ndarray):
    """Split a triangle (rows = barycentric corners) into four congruent ones."""
    a, b, c = corners
    ab, bc, ca = (a + b) / 2, (b + c) / 2, (c + a) / 2
    return [
        np.array([a, ab, ca]),
        np.array([ab, b, bc]),
        np.array([ca, bc, c]),
        np.array([ab, bc, ca]),
    ]


def triangle_rule(rule: str = "midpoint", refine: int = 0):
    """Quadrature points (q,3 barycentric) and weights summing to 1."""
    pts, w = _base_rule(rule)
    tris = [np.eye(3)]
    for _ in range(refine):
        tris = [s for t in tris for s in _subdivide(t)]
    all_pts = np.vstack([pts @ t for t in tris])
    all_w = np.concatenate([w / len(tris)] * len(tris))
    return all_pts, all_w


class TriQuadrature:
    """Quadrature data over every triangle of a spatial grid."""

    def __init__(self, grid: SpatialGrid, rule: str = "midpoint", refine: int = 0):
        self.grid = grid
        self.bary, self.weights = triangle_rule(rule, refine)
        self.area = grid.hx * grid.hy / 2.0

        mx, my = grid.mx, grid.my
        i, j = np.meshgrid(np.arange(mx), np.arange(my))
        i, j = i.ravel(), j.ravel()

        def nid(ii, jj):
            return jj * (mx + 1) + ii

        # per cell: lower triangle (LL, LR, UR) and upper triangle (LL, UR, UL)
        lower = np.stack([nid(i, j), nid(i + 1, j), nid(i + 1, j + 1)], axis=1)
        upper = np.stack([nid(i, j), nid(i + 1, j + 1), nid(i, j + 1)], axis=1)
        self.tri_nodes = np.vstack([lower, upper])  # (ntri, 3)

        xs = grid.a + grid.hx * np.arange(mx + 1)
        ys = grid.c + grid.hy * np.arange(my + 1)
        node_x = np.tile(xs, my + 1)
        node_y = np.repeat(ys, mx + 1)
        vx = node_x[self.tri_nodes]  # (ntri, 3)
        vy = node_y[self.tri_nodes]
        self.px = vx @ self.bary.T  # (ntri, q)
        self.py = vy @ self.bary.T

        # map global node id -> interior dof index (x fastest), -1 on boundary
        interior = -np.ones((my + 1) * (mx + 1), dtype=int)
        jj, ii = np.meshgrid(np.arange(1, my), np.arange(1, mx), indexing="ij")
        interior[jj.ravel() * (mx + 1) + ii.ravel()] = np.arange(grid.ndof)
        self.interior_index = interior

    @property
    def n_triangles(self) -> int:
        return self.tri_nodes.shape[0]

    def hat_weight_matrix(self) -> csr_matrix:
        """Sparse map from point values to integrals against each hat function.

        Row j holds the weights such that (W @ f(points)) approximates
        the integral of f * phi_j over the support of phi_j.
        """
        ntri, q = self.px.shape
        rows, cols, data = [], [], []
        point_index = np.arange(ntri * q).reshape(ntri, q)
        for v in range(3):
            dof = self.interior_index[self.tri_nodes[:, v]]
            keep = dof >= 0
            for k in range(q):
                rows.append(dof[keep])
                cols.append(point_index[keep, k])
                data.append(
                    np.full(keep.sum(), self.area * self.weights[k] * self.bary[k, v])
                )
        W = csr_matrix(
            (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
            shape=(self.grid.ndof, ntri * q),
        )
        return W

    def interpolate_nodal(self, u_interior: np.ndarray) -> np.ndarray:
        """Linear-interpolant values at all quadrature points, (ntri, q)."""
        full = np.zeros((self.grid.my + 1) * (self.grid.mx + 1))
        full[self.interior_index >= 0] = np.asarray(u_interior, dtype=float)[
            self.interior_index[self.interior_index >= 0]
        ]
        return full[self.tri_nodes] @ self.bary.T

    def integrate(self, point_values: np.ndarray) -> float:
        """Integral over the domain of a function given by its point values."""
        return float(self.area * np.sum(point_values @ self.weights))
