"""A-priori two-level convergence prediction for the time-multigrid solver.

The implicit/explicit step operators share the eigenvectors of the
generalized problem (Kx Ax + Ky Ay) x = sigma M x, so every one-step
propagator acts on mode omega as the scalar (2 - dt sigma)/(2 + dt sigma).
The two-level error- and residual-reduction bound is the max over modes of

    (lam^+)^m |(lam^+)^m - mu^-| (1 - (mu^*)^{Nc-1}) / (1 - mu^*)

with lam^+ = max_j |lambda^(j)| over fine steps, mu^- = min_k mu^(k)
(signed) and mu^* = max_k |mu^(k)| over coarse steps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import assembly
from .mesh import TemporalMesh, coarsen
from .stepper import ProblemSpec

__all__ = [
    "ModeSpectrum",
    "BoundReport",
    "mode_spectrum",
    "step_factors",
    "two_level_bound",
    "residual_ratio_bound",
    "error_propagation_oracle",
]


@dataclass(frozen=True)
class ModeSpectrum:
    """Sorted eigenvalues sigma of the generalized spatial eigenproblem."""

    sigmas: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "sigmas", np.asarray(self.sigmas, dtype=float))

    @property
    def n_modes(self) -> int:
        return self.sigmas.size


def mode_spectrum(spec: ProblemSpec, cap: int = assembly.DENSE_CAP) -> ModeSpectrum:
    """Solve (Kx Ax + Ky Ay) x = sigma M x densely; sigma is real positive."""
    grid = spec.grid
    if grid.ndof > cap:
        raise ValueError(f"spatial dimension {grid.ndof} exceeds dense cap {cap}")
    mass = assembly.mass_operator(grid).dense(cap)
    stiff = spec.kx * assembly.stiffness_operator_x(grid, spec.beta).dense(cap)
    stiff = stiff + spec.ky * assembly.stiffness_operator_y(grid, spec.gamma).dense(cap)
    # enforce exact symmetry before the symmetric-definite eigensolve
    stiff = 0.5 * (stiff + stiff.T)
    sigmas = scipy.linalg.eigh(stiff, 0.5 * (mass + mass.T), eigvals_only=True)
    if sigmas[0] <= 0:
        raise RuntimeError(
            f"non-positive eigenvalue {sigmas[0]:.3e}: operator assembly is broken"
        )
    return ModeSpectrum(np.sort(sigmas))


def step_factors(sigma, dt):
    """Propagator eigenvalue (2 - dt*sigma)/(2 + dt*sigma); lies in (-1, 1)."""
    prod = np.multiply(dt, sigma)
    return (2.0 - prod) / (2.0 + prod)


@dataclass
class BoundReport:
    """Two-level bound with its per-mode ingredients."""

    bound: float
    argmax_mode: int
    lam_dagger: np.ndarray  # per-mode max |lambda| over fine steps
    mu_ddagger: np.ndarray  # per-mode signed min mu over coarse steps
    mu_star: np.ndarray  # per-mode max |mu| over coarse steps
    per_mode: np.ndarray
    m: int
    n_coarse: int


def two_level_bound(
    spectrum: ModeSpectrum, fine_mesh: TemporalMesh, m: int, chunk: int = 256
) -> BoundReport:
    """Evaluate the two-level reduction bound on a (possibly nonuniform) mesh."""
    if fine_mesh.n_intervals % m != 0:
        raise ValueError(f"factor {m} does not divide N={fine_mesh.n_intervals}")
    coarse = coarsen(fine_mesh, m)
    n_coarse = coarse.n_intervals
    wf = np.unique(fine_mesh.widths)
    wc = np.unique(coarse.widths)
    sig = spectrum.sigmas
    n = sig.size
    lam_dagger = np.empty(n)
    mu_ddagger = np.empty(n)
    mu_star = np.empty(n)
    for lo in range(0, n, chunk):
        s = sig[lo : lo + chunk]
        lam = step_factors(s[None, :], wf[:, None])
        lam_dagger[lo : lo + s.size] = np.abs(lam).max(axis=0)
        mu = step_factors(s[None, :], wc[:, None])
        mu_ddagger[lo : lo + s.size] = mu.min(axis=0)
        mu_star[lo : lo + s.size] = np.abs(mu).max(axis=0)

    if n_coarse < 2:
        series = np.zeros(n)  # a single coarse interval annihilates the error
    else:
        series = np.empty(n)
        close = np.abs(1.0 - mu_star) < 1e-8
        safe = ~close
        series[safe] = (1.0 - mu_star[safe] ** (n_coarse - 1)) / (1.0 - mu_star[safe])
        if np.any(close):
            powers = np.arange(n_coarse - 1)
            for idx in np.nonzero(close)[0]:
                series[idx] = float(np.sum(mu_star[idx] ** powers))

    per_mode = lam_dagger**m * np.abs(lam_dagger**m - mu_ddagger) * series
    argmax = int(np.argmax(per_mode))
    return BoundReport(
        bound=float(per_mode[argmax]),
        argmax_mode=argmax,
        lam_dagger=lam_dagger,
        mu_ddagger=mu_ddagger,
        mu_star=mu_star,
        per_mode=per_mode,
        m=m,
        n_coarse=n_coarse,
    )


def residual_ratio_bound(
    spectrum: ModeSpectrum, fine_mesh: TemporalMesh, m: int
) -> float:
    """Bound on successive fine-grid residual-norm ratios (same expression)."""
    return two_level_bound(spectrum, fine_mesh, m).bound


def _dense_propagators(spec: ProblemSpec, tmesh: TemporalMesh, cap: int):
    """Dense one-step propagators per time interval, deduplicated by width."""
    grid = spec.grid
    mass = assembly.mass_operator(grid)
    sx = assembly.stiffness_operator_x(grid, spec.beta)
    sy = assembly.stiffness_operator_y(grid, spec.gamma)
    cache: dict[float, np.ndarray] = {}
    out = []
    for dt in tmesh.widths:
        dt = float(dt)
        if dt not in cache:
            imp = assembly.combined_step_operator(
                mass, sx, sy, spec.kx, spec.ky, dt, +1
            ).dense(cap)
            exp = assembly.combined_step_operator(
                mass, sx, sy, spec.kx, spec.ky, dt, -1
            ).dense(cap)
            cache[dt] = np.linalg.solve(imp, exp)
        out.append(cache[dt])
    return out


def error_propagation_oracle(
    spec: ProblemSpec, m: int, cap: int = assembly.DENSE_CAP
) -> np.ndarray:
    """Exact dense two-level C-point error-propagation operator.

    Built from products of the dense fine and re-discretized coarse
    propagators: block (k, i) is
    B_coarse(k, k-2-i) (B_fine_chunk(i+1) - PsiD_{i+2}) B_fine_chunk(i)
    for i <= k-2 and zero otherwise, so rows k=0,1 vanish identically.
    Returns a ((Nc+1) d, (Nc+1) d) matrix acting on stacked C-point errors.
    """
    grid = spec.grid
    if grid.ndof > cap:
        raise ValueError(f"spatial dimension {grid.ndof} exceeds dense cap {cap}")
    N = spec.tmesh.n_intervals
    if N % m != 0:
        raise ValueError(f"factor {m} does not divide N={N}")
    coarse = coarsen(spec.tmesh, m)
    n_coarse = coarse.n_intervals
    d = grid.ndof

    psi = _dense_propagators(spec, spec.tmesh, cap)  # psi[n-1] = Psi_n
    psi_d = _dense_propagators(spec, coarse, cap)  # psi_d[k-1] = PsiD_k

    # fine propagator product over coarse interval i: Psi_{(i+1)m} ... Psi_{im+1}
    chunks = []
    for i in range(n_coarse):
        P = np.eye(d)
        for n in range(i * m + 1, (i + 1) * m + 1):
            P = psi[n - 1] @ P
        chunks.append(P)

    J = np.zeros(((n_coarse + 1) * d, (n_coarse + 1) * d))
    for k in range(2, n_coarse + 1):
        Q = np.eye(d)
        for i in range(k - 2, -1, -1):
            core = (chunks[i + 1] - psi_d[i + 1]) @ chunks[i]
            J[k * d : (k + 1) * d, i * d : (i + 1) * d] = Q @ core
            Q = Q @ psi_d[i + 1]
    return J
