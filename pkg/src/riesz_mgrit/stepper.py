"""Problem description, one-step propagation and sequential time stepping.

The implicit one-step scheme advances interior nodal values by solving

    [M + dt/2 (Kx Ax + Ky Ay)] u_n = F_n + [M - dt/2 (Kx Ax + Ky Ay)] u_{n-1}

with all operators applied matrix-free.  A ``Discretization`` caches the
assembled operators, the source-quadrature weights and the per-step linear
solvers, and counts spatial solves for cost reporting.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.linalg import cho_factor, cho_solve

from . import assembly
from .krylov import CgOptions, cg_solve
from .mesh import SpatialGrid, TemporalMesh
from .quadrature import TriQuadrature

__all__ = [
    "ProblemSpec",
    "Discretization",
    "initial_vector",
    "load_vector",
    "step",
    "sequential_solve",
    "spacetime_residual",
]


@dataclass(frozen=True)
class ProblemSpec:
    """Diffusion problem with Riesz half-orders beta, gamma in (1/2, 1).

    ``source(x, y, t)`` and ``initial(x, y)`` must accept numpy arrays.
    """

    grid: SpatialGrid
    tmesh: TemporalMesh
    kx: float
    ky: float
    beta: float
    gamma: float
    source: Callable = field(compare=False)
    initial: Callable = field(compare=False)

    def __post_init__(self):
        if self.kx <= 0 or self.ky <= 0:
            raise ValueError("diffusion coefficients must be positive")
        for order in (self.beta, self.gamma):
            if not 0.5 < order < 1.0:
                raise ValueError("fractional half-orders must lie in (1/2, 1)")


class Discretization:
    """Cached operators and per-time-step solvers for one problem.

    solver='cg' uses matrix-free Conjugate Gradient; solver='direct' caches a
    Cholesky factorization of the dense implicit operator per distinct step
    size (only valid below the dense cap) and is used where tests need
    machine-precision step solves.
    """

    def __init__(
        self,
        spec: ProblemSpec,
        cg_opts: CgOptions | None = None,
        solver: str = "cg",
        quad_rule: str = "midpoint",
        quad_refine: int = 1,
        time_quad_points: int = 2,
    ):
        if solver not in ("cg", "direct"):
            raise ValueError("solver must be 'cg' or 'direct'")
        self.spec = spec
        self.cg_opts = cg_opts or CgOptions()
        self.solver = solver
        grid = spec.grid
        self.mass = assembly.mass_operator(grid)
        self.stiff_x = assembly.stiffness_operator_x(grid, spec.beta)
        self.stiff_y = assembly.stiffness_operator_y(grid, spec.gamma)
        self.quad = TriQuadrature(grid, rule=quad_rule, refine=quad_refine)
        self._hat_weights = self.quad.hat_weight_matrix()
        gauss_x, gauss_w = leggauss(time_quad_points)
        self._tq_nodes = gauss_x
        self._tq_weights = gauss_w
        self._combined: dict[tuple[float, int], assembly.CombinedStepOperator] = {}
        self._factors: dict[float, tuple] = {}
        self.spatial_solves = 0
        self.cg_iterations = 0

    @property
    def ndof(self) -> int:
        return self.spec.grid.ndof

    def combined(self, dt: float, sign: int) -> assembly.CombinedStepOperator:
        key = (dt, sign)
        if key not in self._combined:
            self._combined[key] = assembly.combined_step_operator(
                self.mass, self.stiff_x, self.stiff_y,
                self.spec.kx, self.spec.ky, dt, sign,
            )
        return self._combined[key]

    def implicit_solve(self, dt: float, rhs: np.ndarray,
                       x0: np.ndarray | None = None) -> np.ndarray:
        """Solve the implicit-side system for one step of size dt."""
        self.spatial_solves += 1
        op = self.combined(dt, +1)
        if self.solver == "direct":
            if dt not in self._factors:
                self._factors[dt] = cho_factor(op.dense())
            return cho_solve(self._factors[dt], rhs)
        x, iters = cg_solve(op, rhs, x0=x0, opts=self.cg_opts)
        self.cg_iterations += iters
        return x

    def propagate(self, dt: float, u_prev: np.ndarray) -> np.ndarray:
        """Apply the one-step propagator (without the source contribution)."""
        rhs = self.combined(dt, -1).apply(u_prev)
        return self.implicit_solve(dt, rhs, x0=u_prev)

    def load_vector(self, t0: float, t1: float) -> np.ndarray:
        """Integrals of source * hat_j over [t0, t1] x support(phi_j)."""
        dt = t1 - t0
        mid, half = (t0 + t1) / 2.0, dt / 2.0
        out = np.zeros(self.ndof)
        pts_flat_x = self.quad.px.ravel()
        pts_flat_y = self.quad.py.ravel()
        for xi, wi in zip(self._tq_nodes, self._tq_weights):
            t = mid + half * xi
            fvals = np.asarray(self.spec.source(pts_flat_x, pts_flat_y, t), dtype=float)
            out += (half * wi) * (self._hat_weights @ fvals)
        return out

    def rhs_vector(self, n: int) -> np.ndarray:
        """Propagated right-hand side G_n = implicit^{-1} F_n (n >= 1)."""
        pts = self.spec.tmesh.points
        dt = pts[n] - pts[n - 1]
        return self.implicit_solve(dt, self.load_vector(pts[n - 1], pts[n]))


def initial_vector(spec: ProblemSpec) -> np.ndarray:
    """Nodal interpolation of the initial condition at interior nodes."""
    x, y = spec.grid.interior_nodes()
    return np.asarray(spec.initial(x, y), dtype=float)


def load_vector(spec: ProblemSpec, n: int, disc: Discretization | None = None) -> np.ndarray:
    if not 1 <= n <= spec.tmesh.n_intervals:
        raise ValueError(f"time index {n} outside 1..{spec.tmesh.n_intervals}")
    disc = disc or Discretization(spec)
    pts = spec.tmesh.points
    return disc.load_vector(pts[n - 1], pts[n])


def step(spec: ProblemSpec, n: int, u_prev: np.ndarray,
         disc: Discretization | None = None) -> np.ndarray:
    """Advance from t_{n-1} to t_n."""
    disc = disc or Discretization(spec)
    pts = spec.tmesh.points
    dt = pts[n] - pts[n - 1]
    rhs = disc.load_vector(pts[n - 1], pts[n]) + disc.combined(dt, -1).apply(u_prev)
    return disc.implicit_solve(dt, rhs, x0=u_prev)


def sequential_solve(spec: ProblemSpec, disc: Discretization | None = None) -> np.ndarray:
    """March the scheme over all time points; returns an (N+1, ndof) array."""
    disc = disc or Discretization(spec)
    N = spec.tmesh.n_intervals
    U = np.empty((N + 1, disc.ndof))
    U[0] = initial_vector(spec)
    for n in range(1, N + 1):
        try:
            U[n] = step(spec, n, U[n - 1], disc)
        except Exception as exc:
            raise RuntimeError(f"time step {n} failed") from exc
    return U


def spacetime_residual(spec: ProblemSpec, U: np.ndarray,
                       disc: Discretization | None = None):
    """Residual of the block-bidiagonal space-time system.

    r_0 = U0_exact - U_0 and r_n = G_n - U_n + Psi_n U_{n-1}, evaluated with
    one implicit solve per time point.  Returns (per-point norms, global
    Euclidean norm over the concatenated residual).
    """
    disc = disc or Discretization(spec)
    pts = spec.tmesh.points
    N = spec.tmesh.n_intervals
    norms = np.empty(N + 1)
    norms[0] = np.linalg.norm(initial_vector(spec) - U[0])
    for n in range(1, N + 1):
        dt = pts[n] - pts[n - 1]
        rhs = disc.load_vector(pts[n - 1], pts[n]) + disc.combined(dt, -1).apply(U[n - 1])
        r = disc.implicit_solve(dt, rhs, x0=U[n]) - U[n]
        norms[n] = np.linalg.norm(r)
    return norms, float(np.sqrt(np.sum(norms**2)))
