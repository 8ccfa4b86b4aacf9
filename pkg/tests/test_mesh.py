import math

import numpy as np
import pytest

from riesz_mgrit.mesh import (
    CfSplitting,
    SpatialGrid,
    TemporalMesh,
    coarsen,
    shishkin_temporal,
    uniform_temporal,
)


class TestSpatialGrid:
    def test_spacings_and_dofs(self):
        grid = SpatialGrid(8, 4)
        assert grid.hx == pytest.approx(1 / 8)
        assert grid.hy == pytest.approx(1 / 4)
        assert grid.ndof == 7 * 3

    def test_interior_nodes_x_fastest(self):
        grid = SpatialGrid(4, 4)
        x, y = grid.interior_nodes()
        assert x[:3] == pytest.approx([0.25, 0.5, 0.75])
        assert y[:3] == pytest.approx([0.25, 0.25, 0.25])

    @pytest.mark.parametrize("mx,my", [(1, 4), (4, 1)])
    def test_rejects_degenerate_counts(self, mx, my):
        with pytest.raises(ValueError):
            SpatialGrid(mx, my)

    def test_rejects_degenerate_domain(self):
        with pytest.raises(ValueError):
            SpatialGrid(4, 4, a=1.0, b=0.0)


class TestTemporalMesh:
    def test_uniform(self):
        mesh = uniform_temporal(2.0, 8)
        assert mesh.n_intervals == 8
        assert mesh.final_time == pytest.approx(2.0)
        assert mesh.widths == pytest.approx(np.full(8, 0.25))
        assert mesh.is_uniform()

    def test_rejects_nonincreasing(self):
        with pytest.raises(ValueError):
            TemporalMesh(np.array([0.0, 0.5, 0.5, 1.0]))

    def test_rejects_nonzero_start(self):
        with pytest.raises(ValueError):
            TemporalMesh(np.array([0.1, 0.5, 1.0]))

    def test_rejects_single_point(self):
        with pytest.raises(ValueError):
            TemporalMesh(np.array([0.0]))


class TestShishkin:
    def test_structure(self):
        N, eps = 64, 2.0**-6
        mesh = shishkin_temporal(N, eps)
        sigma = 2 * eps * math.log(N)
        assert mesh.n_intervals == N
        assert mesh.points[N // 4] == pytest.approx(sigma)
        assert mesh.points[3 * N // 4] == pytest.approx(1 - sigma)
        assert mesh.final_time == pytest.approx(1.0)
        assert not mesh.is_uniform()
        # three uniform pieces with N/4, N/2, N/4 intervals
        w = mesh.widths
        assert np.ptp(w[: N // 4]) < 1e-14
        assert np.ptp(w[N // 4 : 3 * N // 4]) < 1e-14
        assert np.ptp(w[3 * N // 4 :]) < 1e-14
        assert w[0] < w[N // 2]

    def test_scaled_final_time(self):
        mesh = shishkin_temporal(16, 2.0**-4, T=3.0)
        assert mesh.final_time == pytest.approx(3.0)

    def test_rejects_bad_interval_count(self):
        with pytest.raises(ValueError):
            shishkin_temporal(10, 2.0**-6)

    def test_rejects_degenerate_grading(self):
        # transition point at or beyond the midpoint
        with pytest.raises(ValueError, match="transition"):
            shishkin_temporal(8, 2.0**-3)


class TestCoarsening:
    def test_keeps_every_mth_point(self):
        mesh = shishkin_temporal(32, 2.0**-5)
        coarse = coarsen(mesh, 4)
        assert coarse.n_intervals == 8
        assert coarse.points == pytest.approx(mesh.points[::4])

    def test_rejects_nondividing_factor(self):
        with pytest.raises(ValueError):
            coarsen(uniform_temporal(1.0, 10), 4)


class TestCfSplitting:
    def test_indices_partition(self):
        split = CfSplitting(12, 4)
        assert split.n_coarse == 3
        assert list(split.c_indices) == [0, 4, 8, 12]
        combined = np.sort(np.concatenate([split.c_indices, split.f_indices]))
        assert combined == pytest.approx(np.arange(13))

    def test_rejects_invalid(self):
        with pytest.raises(ValueError):
            CfSplitting(12, 5)
        with pytest.raises(ValueError):
            CfSplitting(12, 1)
