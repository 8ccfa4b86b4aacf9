"""Multilevel time-multigrid (MGRIT) V-cycles with FCF-relaxation.

The space-time system is block unit lower bidiagonal: U_0 = G_0 and
U_n = Psi_n U_{n-1} + G_n, where Psi_n is the one-step propagator and
G_n the propagated load.  Coarse levels re-discretize the propagator on
the coarsened temporal mesh; restriction is injection of the residual at
C-points, interpolation is injection at C-points with the matching
F-update supplied by the next cycle's leading F-relaxation (the final
F-update is performed once, after halting).  F-relaxation only (with two
levels) is the parareal method.
"""

from __future__ import annotations

import dataclasses
import math
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from .krylov import CgOptions
from .mesh import CfSplitting, TemporalMesh, coarsen
from .stepper import Discretization, ProblemSpec, initial_vector

__all__ = [
    "MgritOptions",
    "MgritLevel",
    "MgritHierarchy",
    "IterationTrace",
    "MgritFailure",
    "f_relax",
    "c_relax",
    "fcf_relax",
    "restrict_residual",
    "coarse_correct",
    "exact_solve",
    "v_cycle",
    "solve",
    "parareal_solve",
    "convergence_factor",
]


@dataclass
class MgritOptions:
    """Knobs of the multilevel time-multigrid driver.

    ``max_levels=None`` means floor(log_m N) + 1; coarsening also stops
    when the next level would have fewer than ``min_coarse`` intervals or
    when m stops dividing the interval count.  ``relaxation='f'`` with two
    levels is parareal.  ``solver``/``cg_rel_tol`` configure the inner
    spatial solves on every level.
    """

    m: int
    max_levels: int | None = None
    min_coarse: int = 2
    halt_tol: float = 1e-9
    max_iters: int = 100
    relaxation: str = "fcf"
    skip_first_down: bool = True
    rng_seed: int = 0
    solver: str = "cg"
    cg_rel_tol: float = 1e-9

    def __post_init__(self):
        if self.m < 2:
            raise ValueError("coarsening factor must be >= 2")
        if self.halt_tol <= 0:
            raise ValueError("halting tolerance must be positive")
        if self.relaxation not in ("fcf", "f"):
            raise ValueError("relaxation must be 'fcf' or 'f'")
        if self.max_iters < 1:
            raise ValueError("need at least one iteration")


@dataclass
class MgritLevel:
    """One temporal level: mesh, step solvers, RHS and iterate storage."""

    tmesh: TemporalMesh
    disc: Discretization
    splitting: CfSplitting | None  # None on the coarsest level
    G: np.ndarray  # (N+1, ndof)
    U: np.ndarray  # (N+1, ndof)

    def propagate(self, n: int, v: np.ndarray) -> np.ndarray:
        """Apply the one-step propagator Psi_n (n = 1..N)."""
        dt = self.tmesh.widths[n - 1]
        return self.disc.propagate(dt, v)


class MgritHierarchy:
    """Temporal hierarchy with re-discretized coarse-level propagators."""

    def __init__(self, spec: ProblemSpec, opts: MgritOptions):
        self.spec = spec
        self.opts = opts
        N = spec.tmesh.n_intervals
        if N < opts.m:
            warnings.warn(
                f"N={N} < coarsening factor m={opts.m}; "
                "degenerating to a single level (sequential solve)"
            )
        max_levels = opts.max_levels
        if max_levels is None:
            max_levels = int(math.floor(math.log(N, opts.m))) + 1 if N >= opts.m else 1

        meshes = [spec.tmesh]
        while len(meshes) < max_levels:
            n = meshes[-1].n_intervals
            if n % opts.m != 0 or n // opts.m < opts.min_coarse:
                break
            meshes.append(coarsen(meshes[-1], opts.m))

        cg_opts = CgOptions(rel_tol=opts.cg_rel_tol)
        self.levels: list[MgritLevel] = []
        for i, tmesh in enumerate(meshes):
            lspec = spec if i == 0 else dataclasses.replace(spec, tmesh=tmesh)
            disc = Discretization(lspec, cg_opts=cg_opts, solver=opts.solver)
            n = tmesh.n_intervals
            last = i == len(meshes) - 1
            splitting = None if last else CfSplitting(n, opts.m)
            G = np.zeros((n + 1, disc.ndof))
            U = np.zeros((n + 1, disc.ndof))
            self.levels.append(MgritLevel(tmesh, disc, splitting, G, U))

        # fine-level right-hand side: initial value and propagated loads
        fine = self.levels[0]
        fine.G[0] = initial_vector(spec)
        for n in range(1, N + 1):
            fine.G[n] = fine.disc.rhs_vector(n)

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    def spatial_solves(self) -> int:
        return sum(level.disc.spatial_solves for level in self.levels)

    def cg_iterations(self) -> int:
        return sum(level.disc.cg_iterations for level in self.levels)


def f_relax(level: MgritLevel, U: np.ndarray | None = None) -> None:
    """Overwrite F-points by propagation from the left C-point."""
    U = level.U if U is None else U
    m = level.splitting.m
    N = level.tmesh.n_intervals
    for base in range(0, N, m):
        v = U[base]
        for n in range(base + 1, min(base + m, N + 1)):
            v = level.propagate(n, v) + level.G[n]
            U[n] = v


def c_relax(level: MgritLevel, U: np.ndarray | None = None) -> None:
    """Overwrite C-points by propagation from the preceding point."""
    U = level.U if U is None else U
    m = level.splitting.m
    U[0] = level.G[0]
    for n in range(m, level.tmesh.n_intervals + 1, m):
        U[n] = level.propagate(n, U[n - 1]) + level.G[n]


def fcf_relax(level: MgritLevel) -> None:
    f_relax(level)
    c_relax(level)
    f_relax(level)


def restrict_residual(hierarchy: MgritHierarchy, l: int) -> None:
    """Inject the level-l residual at C-points into level l+1's RHS."""
    fine = hierarchy.levels[l]
    coarse = hierarchy.levels[l + 1]
    m = fine.splitting.m
    coarse.G[0] = fine.G[0] - fine.U[0]
    for k in range(1, coarse.tmesh.n_intervals + 1):
        n = k * m
        coarse.G[k] = fine.G[n] + fine.propagate(n, fine.U[n - 1]) - fine.U[n]


def coarse_correct(hierarchy: MgritHierarchy, l: int) -> None:
    """Add the coarse iterate at C-points only (F-points are deferred)."""
    fine = hierarchy.levels[l]
    coarse = hierarchy.levels[l + 1]
    fine.U[fine.splitting.c_indices] += coarse.U


def exact_solve(level: MgritLevel) -> None:
    """Forward substitution of the block-bidiagonal level system."""
    U = level.U
    U[0] = level.G[0]
    for n in range(1, level.tmesh.n_intervals + 1):
        U[n] = level.propagate(n, U[n - 1]) + level.G[n]


def v_cycle(hierarchy: MgritHierarchy, l: int = 0, skip_relax: bool = False) -> None:
    """One V-cycle from level l downward (relax, restrict, recurse, correct).

    Interpolation is injection at C-points completed by an F-relaxation,
    except on the finest level, where the F-update is deferred to the next
    cycle's leading F-relaxation (and performed once after halting).
    """
    level = hierarchy.levels[l]
    if level.splitting is None:
        exact_solve(level)
        return
    if not skip_relax:
        if hierarchy.opts.relaxation == "fcf":
            fcf_relax(level)
        else:
            f_relax(level)
    restrict_residual(hierarchy, l)
    hierarchy.levels[l + 1].U[:] = 0.0
    v_cycle(hierarchy, l + 1, skip_relax)
    coarse_correct(hierarchy, l)
    if l > 0:
        f_relax(level)


@dataclass
class IterationTrace:
    """Per-iteration convergence history of one MGRIT/parareal run.

    Entry 0 describes the initial guess; entry i the state after cycle i.
    Solve and CG counters are cumulative.
    """

    residual_norms: list[float] = field(default_factory=list)
    spatial_solves: list[int] = field(default_factory=list)
    cg_iterations: list[int] = field(default_factory=list)
    wall_times: list[float] = field(default_factory=list)
    seed: int = 0
    converged: bool = False

    @property
    def iterations(self) -> int:
        return len(self.residual_norms) - 1


class MgritFailure(RuntimeError):
    """Iteration budget exhausted; carries the trace and last iterate."""

    def __init__(self, message: str, trace: IterationTrace, solution: np.ndarray):
        super().__init__(message)
        self.trace = trace
        self.solution = solution


def _global_residual(hierarchy: MgritHierarchy):
    """Space-time residual norm on the finest level, with F-points finalized.

    Works on a copy of the iterate: after refreshing the F-points their
    residuals vanish identically, so the norm collects the initial-value
    and C-point contributions.  Returns (norm, finalized copy).
    """
    level = hierarchy.levels[0]
    V = level.U.copy()
    sq = float(np.sum((level.G[0] - V[0]) ** 2))
    if level.splitting is None:
        for n in range(1, level.tmesh.n_intervals + 1):
            r = level.G[n] + level.propagate(n, V[n - 1]) - V[n]
            sq += float(r @ r)
        return math.sqrt(sq), V
    f_relax(level, V)
    m = level.splitting.m
    for n in range(m, level.tmesh.n_intervals + 1, m):
        r = level.G[n] + level.propagate(n, V[n - 1]) - V[n]
        sq += float(r @ r)
    return math.sqrt(sq), V


def solve(spec: ProblemSpec, opts: MgritOptions, u_init: np.ndarray | None = None):
    """Iterate V-cycles to the halting tolerance; returns (U, trace).

    The initial guess is uniform random in [0,1) from the recorded seed at
    every point except t=0, which carries the initial condition; pass
    ``u_init`` to override.  After halting, F-points are finalized by one
    F-relaxation.  Raises MgritFailure when max_iters is exhausted.
    """
    start = time.perf_counter()
    hierarchy = MgritHierarchy(spec, opts)
    level0 = hierarchy.levels[0]
    N = spec.tmesh.n_intervals
    if u_init is not None:
        level0.U[:] = np.asarray(u_init, dtype=float)
    else:
        rng = np.random.default_rng(opts.rng_seed)
        level0.U[1:] = rng.random((N, level0.disc.ndof))
    level0.U[0] = level0.G[0]

    trace = IterationTrace(seed=opts.rng_seed)

    def record(norm):
        trace.residual_norms.append(norm)
        trace.spatial_solves.append(hierarchy.spatial_solves())
        trace.cg_iterations.append(hierarchy.cg_iterations())
        trace.wall_times.append(time.perf_counter() - start)

    norm, finalized = _global_residual(hierarchy)
    record(norm)
    if norm < opts.halt_tol:
        trace.converged = True
        return finalized, trace

    for it in range(1, opts.max_iters + 1):
        skip = opts.skip_first_down and it == 1
        v_cycle(hierarchy, 0, skip_relax=skip)
        norm, finalized = _global_residual(hierarchy)
        record(norm)
        if norm < opts.halt_tol:
            trace.converged = True
            return finalized, trace
    raise MgritFailure(
        f"no convergence within {opts.max_iters} iterations "
        f"(residual {trace.residual_norms[-1]:.3e}, target {opts.halt_tol:.3e})",
        trace,
        finalized,
    )


def parareal_solve(spec: ProblemSpec, opts: MgritOptions):
    """Two-level F-relaxation variant (parareal) of the same driver."""
    return solve(spec, dataclasses.replace(opts, relaxation="f", max_levels=2))


def convergence_factor(trace: IterationTrace) -> float:
    """Geometric mean of the last five consecutive residual-norm ratios."""
    norms = trace.residual_norms
    if len(norms) < 6:
        raise ValueError(
            f"need at least 6 residual norms for the asymptotic factor, got {len(norms)}"
        )
    return (norms[-1] / norms[-6]) ** 0.2
