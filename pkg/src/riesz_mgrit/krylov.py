"""Matrix-free Conjugate Gradient for the SPD implicit-step systems."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["CgOptions", "CgFailure", "cg_solve"]


@dataclass
class CgOptions:
    rel_tol: float = 1e-9
    max_iter: int | None = None  # defaults to 10 * ndof
    record_iterations: bool = False

    def __post_init__(self):
        if self.rel_tol <= 0:
            raise ValueError("relative tolerance must be positive")


class CgFailure(RuntimeError):
    """Raised when CG stalls or breaks down; carries the last residual norm."""

    def __init__(self, message: str, residual_norm: float, iterations: int):
        super().__init__(message)
        self.residual_norm = residual_norm
        self.iterations = iterations


def cg_solve(op, rhs: np.ndarray, x0: np.ndarray | None = None,
             opts: CgOptions | None = None):
    """Solve op @ x = rhs for an SPD operator, returning (x, iterations).

    Convergence is declared when the Euclidean residual norm drops below
    rel_tol * ||rhs|| (absolute rel_tol when rhs is zero).  The recurrence
    residual drives the iteration; the true residual is recomputed once at
    acceptance to guard against drift.
    """
    opts = opts or CgOptions()
    apply_op = op.apply if hasattr(op, "apply") else op
    rhs = np.asarray(rhs, dtype=float)
    n = rhs.size
    max_iter = opts.max_iter if opts.max_iter is not None else 10 * n

    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    rhs_norm = np.linalg.norm(rhs)
    target = opts.rel_tol * rhs_norm if rhs_norm > 0 else opts.rel_tol

    r = rhs - apply_op(x)
    res_norm = np.linalg.norm(r)
    if res_norm <= target:
        return x, 0
    p = r.copy()
    rr = res_norm**2
    for k in range(1, max_iter + 1):
        Ap = apply_op(p)
        pAp = p @ Ap
        if not np.isfinite(pAp) or pAp <= 0:
            raise CgFailure(
                f"CG breakdown at iteration {k}: p'Ap = {pAp}", res_norm, k
            )
        alpha = rr / pAp
        x += alpha * p
        r -= alpha * Ap
        rr_new = r @ r
        res_norm = np.sqrt(rr_new)
        if not np.isfinite(res_norm):
            raise CgFailure(f"non-finite residual at iteration {k}", res_norm, k)
        if res_norm <= target:
            true_res = np.linalg.norm(rhs - apply_op(x))
            if true_res <= max(target, 10 * res_norm):
                return x, k
            # recurrence drifted; continue with the true residual
            r = rhs - apply_op(x)
            rr_new = r @ r
            res_norm = np.sqrt(rr_new)
            if res_norm <= target:
                return x, k
            p = r.copy()
            rr = rr_new
            continue
        beta = rr_new / rr
        rr = rr_new
        p = r + beta * p
    raise CgFailure(
        f"CG did not converge within {max_iter} iterations "
        f"(residual {res_norm:.3e}, target {target:.3e})",
        res_norm,
        max_iter,
    )
