import numpy as np
import pytest

from riesz_mgrit.mesh import SpatialGrid, uniform_temporal
from riesz_mgrit.mgrit import (
    IterationTrace,
    MgritFailure,
    MgritHierarchy,
    MgritOptions,
    c_relax,
    coarse_correct,
    convergence_factor,
    exact_solve,
    f_relax,
    fcf_relax,
    parareal_solve,
    restrict_residual,
    solve,
)
from riesz_mgrit.stepper import Discretization, sequential_solve, spacetime_residual
from riesz_mgrit.verify import make_problem


def tiny_spec(small_case, M=4, N=16):
    return make_problem(small_case, SpatialGrid(M, M), uniform_temporal(1.0, N))


class TestMgritOptions:
    def test_validation(self):
        with pytest.raises(ValueError):
            MgritOptions(m=1)
        with pytest.raises(ValueError):
            MgritOptions(m=2, halt_tol=0.0)
        with pytest.raises(ValueError):
            MgritOptions(m=2, relaxation="fcfc")
        with pytest.raises(ValueError):
            MgritOptions(m=2, max_iters=0)


class TestHierarchy:
    def test_automatic_depth(self, small_case):
        spec = tiny_spec(small_case, N=16)
        hier = MgritHierarchy(spec, MgritOptions(m=2, solver="direct"))
        # 16 -> 8 -> 4 -> 2 and stop at min_coarse
        assert [lv.tmesh.n_intervals for lv in hier.levels] == [16, 8, 4, 2]
        assert hier.levels[-1].splitting is None
        assert all(lv.splitting is not None for lv in hier.levels[:-1])

    def test_max_levels_cap(self, small_case):
        spec = tiny_spec(small_case, N=16)
        hier = MgritHierarchy(spec, MgritOptions(m=2, max_levels=2))
        assert hier.n_levels == 2

    def test_coarsening_stops_when_factor_stops_dividing(self, small_case):
        spec = tiny_spec(small_case, N=12)
        hier = MgritHierarchy(spec, MgritOptions(m=4))
        assert [lv.tmesh.n_intervals for lv in hier.levels] == [12, 3]

    def test_degenerate_single_level_warns(self, small_case):
        spec = tiny_spec(small_case, N=2)
        with pytest.warns(UserWarning, match="single level"):
            hier = MgritHierarchy(spec, MgritOptions(m=4))
        assert hier.n_levels == 1

    def test_fine_rhs(self, small_case):
        spec = tiny_spec(small_case, N=8)
        hier = MgritHierarchy(spec, MgritOptions(m=2, solver="direct"))
        fine = hier.levels[0]
        disc = fine.disc
        expected = disc.rhs_vector(3)
        assert fine.G[3] == pytest.approx(expected)


class TestRelaxation:
    @pytest.fixture
    def hierarchy(self, small_case, rng):
        spec = tiny_spec(small_case, N=16)
        hier = MgritHierarchy(spec, MgritOptions(m=4, max_levels=2, solver="direct"))
        level = hier.levels[0]
        level.U[1:] = rng.random((16, level.disc.ndof))
        level.U[0] = level.G[0]
        return hier

    def test_f_relax_zeroes_f_point_residuals(self, hierarchy):
        level = hierarchy.levels[0]
        f_relax(level)
        for n in range(1, 17):
            if n % 4 == 0:
                continue
            r = level.G[n] + level.propagate(n, level.U[n - 1]) - level.U[n]
            assert np.abs(r).max() < 1e-11

    def test_c_relax_updates_c_points_only(self, hierarchy):
        level = hierarchy.levels[0]
        before = level.U.copy()
        c_relax(level)
        for n in range(1, 17):
            if n % 4 != 0:
                assert level.U[n] == pytest.approx(before[n])

    def test_fcf_fixes_exact_solution(self, hierarchy):
        level = hierarchy.levels[0]
        exact = sequential_solve(level.disc.spec, level.disc)
        level.U[:] = exact
        fcf_relax(level)
        assert np.abs(level.U - exact).max() < 1e-10

    def test_exact_solve_is_forward_substitution(self, hierarchy):
        level = hierarchy.levels[0]
        exact_solve(level)
        expected = sequential_solve(level.disc.spec, level.disc)
        assert np.abs(level.U - expected).max() < 1e-9

    def test_restriction_injects_c_point_residual(self, hierarchy):
        level = hierarchy.levels[0]
        restrict_residual(hierarchy, 0)
        coarse = hierarchy.levels[1]
        for k in range(1, coarse.tmesh.n_intervals + 1):
            n = 4 * k
            r = level.G[n] + level.propagate(n, level.U[n - 1]) - level.U[n]
            assert coarse.G[k] == pytest.approx(r)

    def test_coarse_correction_touches_c_points_only(self, hierarchy, rng):
        level = hierarchy.levels[0]
        coarse = hierarchy.levels[1]
        coarse.U[:] = rng.standard_normal(coarse.U.shape)
        before = level.U.copy()
        coarse_correct(hierarchy, 0)
        for n in range(17):
            if n % 4 == 0:
                assert level.U[n] == pytest.approx(before[n] + coarse.U[n // 4])
            else:
                assert level.U[n] == pytest.approx(before[n])


class TestSolve:
    def test_converges_and_matches_sequential(self, small_case):
        spec = tiny_spec(small_case, N=16)
        U, trace = solve(spec, MgritOptions(m=4, halt_tol=1e-10, solver="direct"))
        assert trace.converged
        disc = Discretization(spec, solver="direct")
        _, res = spacetime_residual(spec, U, disc)
        assert res < 1e-8
        assert np.abs(U - sequential_solve(spec, disc)).max() < 1e-8

    def test_trace_contents(self, small_case):
        spec = tiny_spec(small_case, N=16)
        _, trace = solve(spec, MgritOptions(m=4, solver="direct"))
        assert trace.iterations == len(trace.residual_norms) - 1
        assert len(trace.spatial_solves) == len(trace.residual_norms)
        assert trace.spatial_solves == sorted(trace.spatial_solves)
        assert all(t2 >= t1 for t1, t2 in zip(trace.wall_times, trace.wall_times[1:]))
        assert trace.seed == 0

    def test_deterministic_given_seed(self, small_case):
        spec = tiny_spec(small_case, N=16)
        opts = MgritOptions(m=2, solver="direct", rng_seed=5)
        _, t1 = solve(spec, opts)
        _, t2 = solve(spec, opts)
        assert t1.residual_norms == t2.residual_norms

    def test_seed_changes_initial_guess(self, small_case):
        spec = tiny_spec(small_case, N=16)
        _, t1 = solve(spec, MgritOptions(m=2, solver="direct", rng_seed=0))
        _, t2 = solve(spec, MgritOptions(m=2, solver="direct", rng_seed=1))
        assert t1.residual_norms[0] != t2.residual_norms[0]

    def test_explicit_initial_guess(self, small_case):
        spec = tiny_spec(small_case, N=16)
        disc = Discretization(spec, solver="direct")
        exact = sequential_solve(spec, disc)
        U, trace = solve(spec, MgritOptions(m=4, solver="direct"), u_init=exact)
        assert trace.iterations == 0
        assert trace.converged

    def test_failure_carries_trace_and_iterate(self, small_case):
        spec = tiny_spec(small_case, N=16)
        opts = MgritOptions(m=4, max_iters=1, halt_tol=1e-14, solver="direct")
        with pytest.raises(MgritFailure) as err:
            solve(spec, opts)
        assert err.value.trace.iterations == 1
        assert err.value.solution.shape == (17, spec.grid.ndof)

    def test_multilevel_matches_two_level_solution(self, small_case):
        spec = tiny_spec(small_case, N=64)
        disc = Discretization(spec, solver="direct")
        expected = sequential_solve(spec, disc)
        for levels in (2, None):
            opts = MgritOptions(m=4, max_levels=levels, halt_tol=1e-11,
                                solver="direct")
            U, _ = solve(spec, opts)
            assert np.abs(U - expected).max() < 1e-8

    def test_parareal_matches_sequential(self, small_case):
        spec = tiny_spec(small_case, N=16)
        U, trace = parareal_solve(spec, MgritOptions(m=4, halt_tol=1e-10,
                                                     solver="direct"))
        assert trace.converged
        disc = Discretization(spec, solver="direct")
        assert np.abs(U - sequential_solve(spec, disc)).max() < 1e-8

    def test_parareal_terminates_in_coarse_interval_count(self, small_case):
        # F-relaxation parareal propagates exact information one coarse
        # interval per iteration, so N/m + 1 iterations suffice
        spec = tiny_spec(small_case, N=16)
        _, trace = parareal_solve(
            spec, MgritOptions(m=4, halt_tol=1e-9, solver="direct")
        )
        assert trace.iterations <= 16 // 4 + 1


class TestConvergenceFactor:
    def test_geometric_mean_of_last_five_ratios(self):
        trace = IterationTrace(residual_norms=[10.0 * 0.1**k for k in range(7)])
        assert convergence_factor(trace) == pytest.approx(0.1)

    def test_mixed_ratios(self):
        norms = [1.0, 0.5, 0.05, 0.025, 0.0025, 0.00125, 0.000125]
        trace = IterationTrace(residual_norms=norms)
        expected = (norms[-1] / norms[-6]) ** 0.2
        assert convergence_factor(trace) == pytest.approx(expected)

    def test_requires_six_entries(self):
        with pytest.raises(ValueError):
            convergence_factor(IterationTrace(residual_norms=[1.0] * 5))
