"""Mass and fractional stiffness operators in block-Toeplitz form.

The mass matrix and both directional stiffness matrices on the uniform
triangulated grid are block-tridiagonal with Toeplitz blocks, so each
operator is stored as a scalar prefactor plus two generator blocks and
applied without ever forming the full matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.linalg import toeplitz

from .mesh import SpatialGrid

__all__ = [
    "ToeplitzGenerator",
    "BttbOperator",
    "CombinedStepOperator",
    "mass_generators",
    "stiffness_generators",
    "mass_operator",
    "stiffness_operator_x",
    "stiffness_operator_y",
    "combined_step_operator",
    "dense_instantiation",
    "DENSE_CAP",
]

DENSE_CAP = 4096


@dataclass(frozen=True)
class ToeplitzGenerator:
    """First column and first row of a square Toeplitz block."""

    first_col: np.ndarray
    first_row: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.first_col, dtype=float)
        r = np.asarray(self.first_row, dtype=float)
        if c.size != r.size:
            raise ValueError("column and row lengths differ")
        if c[0] != r[0]:
            raise ValueError("corner entries disagree")
        object.__setattr__(self, "first_col", c)
        object.__setattr__(self, "first_row", r)

    @property
    def size(self) -> int:
        return self.first_col.size

    @cached_property
    def dense(self) -> np.ndarray:
        return toeplitz(self.first_col, self.first_row)


@dataclass(frozen=True)
class BttbOperator:
    """scale * block-tridiagonal operator with Toeplitz blocks.

    ``axis='x'``: blocks of order mx-1 act along x, block index runs over y;
    the diagonal block is ``diag_block``, the superdiagonal ``off_block`` and
    the subdiagonal its transpose.  ``axis='y'`` is the permuted analogue
    (blocks of order my-1 act along y, block index runs over x); the matvec
    reinterprets the x-fastest vector as a 2-D array instead of applying the
    permutation matrix.
    """

    scale: float
    diag_block: ToeplitzGenerator
    off_block: ToeplitzGenerator
    axis: str
    block_count: int

    def __post_init__(self):
        if self.axis not in ("x", "y"):
            raise ValueError("axis must be 'x' or 'y'")

    @property
    def block_size(self) -> int:
        return self.diag_block.size

    @property
    def ndof(self) -> int:
        return self.block_size * self.block_count

    @property
    def grid_shape(self) -> tuple[int, int]:
        """(ny, nx) shape of the interior-node array, x fastest."""
        if self.axis == "x":
            return (self.block_count, self.block_size)
        return (self.block_size, self.block_count)

    def apply(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.shape != (self.ndof,):
            raise ValueError(f"expected vector of length {self.ndof}, got {v.shape}")
        V = v.reshape(self.grid_shape)
        T1 = self.diag_block.dense
        T2 = self.off_block.dense
        if self.axis == "x":
            out = V @ T1.T
            out[:-1] += V[1:] @ T2.T
            out[1:] += V[:-1] @ T2
        else:
            out = T1 @ V
            out[:, :-1] += T2 @ V[:, 1:]
            out[:, 1:] += T2.T @ V[:, :-1]
        return self.scale * out.ravel()

    def dense(self, cap: int = DENSE_CAP) -> np.ndarray:
        if self.ndof > cap:
            raise ValueError(f"dense instantiation of order {self.ndof} exceeds cap {cap}")
        T1 = self.diag_block.dense
        T2 = self.off_block.dense
        n = self.block_count
        up = np.eye(n, k=1)
        if self.axis == "x":
            full = np.kron(np.eye(n), T1) + np.kron(up, T2) + np.kron(up.T, T2.T)
        else:
            full = np.kron(T1, np.eye(n)) + np.kron(T2, up) + np.kron(T2.T, up.T)
        return self.scale * full


@dataclass(frozen=True)
class CombinedStepOperator:
    """mass + sign * half_dt * (kx * stiff_x + ky * stiff_y).

    ``sign=+1`` is the implicit (SPD) side of the one-step scheme,
    ``sign=-1`` the explicit side.
    """

    mass: BttbOperator
    stiff_x: BttbOperator
    stiff_y: BttbOperator
    kx: float
    ky: float
    half_dt: float
    sign: int

    def __post_init__(self):
        if self.sign not in (+1, -1):
            raise ValueError("sign must be +1 or -1")

    @property
    def ndof(self) -> int:
        return self.mass.ndof

    def apply(self, v: np.ndarray) -> np.ndarray:
        out = self.mass.apply(v)
        if self.half_dt != 0.0:
            out = out + (self.sign * self.half_dt) * (
                self.kx * self.stiff_x.apply(v) + self.ky * self.stiff_y.apply(v)
            )
        return out

    def dense(self, cap: int = DENSE_CAP) -> np.ndarray:
        out = self.mass.dense(cap)
        if self.half_dt != 0.0:
            out = out + (self.sign * self.half_dt) * (
                self.kx * self.stiff_x.dense(cap) + self.ky * self.stiff_y.dense(cap)
            )
        return out


def mass_generators(grid: SpatialGrid):
    """Generators (M1, M2) and prefactor hx*hy/12 of the mass matrix."""
    n = grid.mx - 1
    col = np.zeros(n)
    row = np.zeros(n)
    col[0] = row[0] = 6.0
    if n > 1:
        col[1] = row[1] = 1.0
    m1 = ToeplitzGenerator(col, row)
    col2 = np.zeros(n)
    row2 = np.zeros(n)
    col2[0] = row2[0] = 1.0
    if n > 1:
        row2[1] = 1.0
    m2 = ToeplitzGenerator(col2, row2)
    return m1, m2, grid.hx * grid.hy / 12.0


def stiffness_generators(M: int, rho: float):
    """Toeplitz generators (A1, A2) of the 1-D fractional stiffness blocks.

    A1 is symmetric; A2 has distinct upper and lower diagonals.  Entries are
    the closed forms for piecewise-linear elements on a uniform grid with M
    intervals and half-order rho in (1/2, 1).  The scalar prefactor is not
    included here.
    """
    if not 0.5 < rho < 1.0:
        raise ValueError("fractional half-order must lie in (1/2, 1)")
    if M < 2:
        raise ValueError("need at least 2 intervals")
    n = M - 1
    p3 = 3.0 - 2.0 * rho
    p4 = 4.0 - 2.0 * rho

    a1 = np.zeros(n)
    a1[0] = 2.0 ** (6.0 - 2.0 * rho) + 16.0 * rho - 40.0
    if n > 1:
        a1[1] = (
            2.0 * 3.0 ** p4
            + (2.0 * rho - 6.0) * 2.0 ** (5.0 - 2.0 * rho)
            - 16.0 * rho
            + 34.0
        )
    if n > 2:
        l = np.arange(2.0, n)
        a1[2:] = (
            4.0 * p4 * (-((l - 1.0) ** p3) + 2.0 * l**p3 - (l + 1.0) ** p3)
            - 2.0 * (l - 2.0) ** p4
            + 4.0 * (l - 1.0) ** p4
            - 4.0 * (l + 1.0) ** p4
            + 2.0 * (l + 2.0) ** p4
        )
    gen1 = ToeplitzGenerator(a1, a1)

    diag2 = 4.0 - 2.0 ** p4 * rho
    row2 = np.zeros(n)
    col2 = np.zeros(n)
    row2[0] = col2[0] = diag2
    if n > 1:
        row2[1] = diag2
    if n > 2:
        l = np.arange(2.0, n)
        row2[2:] = (
            p4 * ((l - 2.0) ** p3 - (l - 1.0) ** p3 - l**p3 + (l + 1.0) ** p3)
            + 2.0 * (l - 2.0) ** p4
            - 6.0 * (l - 1.0) ** p4
            + 6.0 * l**p4
            - 2.0 * (l + 1.0) ** p4
        )
    if n > 1:
        m = np.arange(1.0, n)
        col2[1:] = (
            p4 * ((m - 1.0) ** p3 - m**p3 - (m + 1.0) ** p3 + (m + 2.0) ** p3)
            + 2.0 * (m - 1.0) ** p4
            - 6.0 * m**p4
            + 6.0 * (m + 1.0) ** p4
            - 2.0 * (m + 2.0) ** p4
        )
    gen2 = ToeplitzGenerator(col2, row2)
    return gen1, gen2


def mass_operator(grid: SpatialGrid) -> BttbOperator:
    m1, m2, scale = mass_generators(grid)
    return BttbOperator(scale, m1, m2, axis="x", block_count=grid.my - 1)


def stiffness_operator_x(grid: SpatialGrid, beta: float) -> BttbOperator:
    """Fractional stiffness in x: blocks along x, coupled across y rows."""
    a1, a2 = stiffness_generators(grid.mx, beta)
    scale = grid.hx ** (1.0 - 2.0 * beta) * grid.hy / (
        2.0 * math.cos(beta * math.pi) * math.gamma(5.0 - 2.0 * beta)
    )
    return BttbOperator(scale, a1, a2, axis="x", block_count=grid.my - 1)


def stiffness_operator_y(grid: SpatialGrid, gamma: float) -> BttbOperator:
    """Fractional stiffness in y, applied without the explicit permutation."""
    a1, a2 = stiffness_generators(grid.my, gamma)
    scale = grid.hx * grid.hy ** (1.0 - 2.0 * gamma) / (
        2.0 * math.cos(gamma * math.pi) * math.gamma(5.0 - 2.0 * gamma)
    )
    return BttbOperator(scale, a1, a2, axis="y", block_count=grid.mx - 1)


def combined_step_operator(
    mass: BttbOperator,
    stiff_x: BttbOperator,
    stiff_y: BttbOperator,
    kx: float,
    ky: float,
    dt: float,
    sign: int,
) -> CombinedStepOperator:
    return CombinedStepOperator(mass, stiff_x, stiff_y, kx, ky, dt / 2.0, sign)


def dense_instantiation(op, cap: int = DENSE_CAP) -> np.ndarray:
    """Full matrix of a BTTB or combined operator (guarded by the cap)."""
    return op.dense(cap)


def permutation_to_column_major(grid: SpatialGrid) -> np.ndarray:
    """Index map taking an x-fastest vector to y-fastest ordering.

    Only used by tests to check the permutation-free y-direction matvec
    against the explicit P^T A P product.
    """
    nx, ny = grid.mx - 1, grid.my - 1
    return np.arange(nx * ny).reshape(ny, nx).T.ravel()
