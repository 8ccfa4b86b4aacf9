import numpy as np
import pytest

from riesz_mgrit.krylov import CgFailure, CgOptions, cg_solve


class SpdOperator:
    def __init__(self, dense):
        self.dense = dense

    def apply(self, v):
        return self.dense @ v


def random_spd(n, rng, cond=100.0):
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    eigs = np.geomspace(1.0, cond, n)
    return Q @ np.diag(eigs) @ Q.T


class TestCgSolve:
    def test_matches_direct_solve(self, rng):
        A = random_spd(40, rng)
        b = rng.standard_normal(40)
        x, iters = cg_solve(SpdOperator(A), b, opts=CgOptions(rel_tol=1e-12))
        assert x == pytest.approx(np.linalg.solve(A, b), abs=1e-8)
        assert 0 < iters <= 400

    def test_accepts_plain_callable(self, rng):
        A = random_spd(10, rng)
        b = rng.standard_normal(10)
        x, _ = cg_solve(lambda v: A @ v, b, opts=CgOptions(rel_tol=1e-12))
        assert A @ x == pytest.approx(b, abs=1e-9)

    def test_warm_start_exact_solution(self, rng):
        A = random_spd(20, rng)
        b = rng.standard_normal(20)
        x_exact = np.linalg.solve(A, b)
        x, iters = cg_solve(SpdOperator(A), b, x0=x_exact)
        assert iters == 0
        assert x == pytest.approx(x_exact)

    def test_zero_rhs(self, rng):
        A = random_spd(10, rng)
        x, iters = cg_solve(SpdOperator(A), np.zeros(10))
        assert x == pytest.approx(np.zeros(10))
        assert iters == 0

    def test_residual_tolerance_respected(self, rng):
        A = random_spd(30, rng, cond=1e4)
        b = rng.standard_normal(30)
        opts = CgOptions(rel_tol=1e-10)
        x, _ = cg_solve(SpdOperator(A), b, opts=opts)
        assert np.linalg.norm(b - A @ x) <= 1e-10 * np.linalg.norm(b) * 10

    def test_indefinite_operator_breaks_down(self, rng):
        A = np.diag(np.array([1.0, -1.0, 2.0, -2.0]))
        b = np.array([1.0, 1.0, 1.0, 1.0])
        with pytest.raises(CgFailure):
            cg_solve(SpdOperator(A), b)

    def test_iteration_budget(self, rng):
        A = random_spd(50, rng, cond=1e8)
        b = rng.standard_normal(50)
        with pytest.raises(CgFailure) as err:
            cg_solve(SpdOperator(A), b, opts=CgOptions(rel_tol=1e-14, max_iter=2))
        assert err.value.iterations == 2

    def test_rejects_bad_tolerance(self):
        with pytest.raises(ValueError):
            CgOptions(rel_tol=0.0)
