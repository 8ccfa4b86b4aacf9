import numpy as np
import pytest

from riesz_mgrit.mesh import SpatialGrid
from riesz_mgrit.quadrature import TriQuadrature, triangle_rule


class TestTriangleRule:
    @pytest.mark.parametrize("rule", ["midpoint", "radon7"])
    @pytest.mark.parametrize("refine", [0, 1, 2])
    def test_weights_sum_to_one(self, rule, refine):
        pts, w = triangle_rule(rule, refine)
        assert w.sum() == pytest.approx(1.0)
        assert pts.shape[1] == 3
        assert pts.sum(axis=1) == pytest.approx(np.ones(len(w)))

    def test_midpoint_exact_for_quadratics(self):
        # integrate x^2 over the reference triangle with vertices
        # (0,0), (1,0), (0,1): exact value 1/12 (after the 1/2 area factor)
        pts, w = triangle_rule("midpoint")
        x = pts @ np.array([0.0, 1.0, 0.0])
        assert 0.5 * np.sum(w * x**2) == pytest.approx(1.0 / 12.0)

    def test_refinement_preserves_linear_moments(self):
        pts0, w0 = triangle_rule("radon7", 0)
        pts2, w2 = triangle_rule("radon7", 2)
        for vertex_values in ([1.0, 0.0, 0.0], [0.2, -1.0, 3.0]):
            f0 = np.sum(w0 * (pts0 @ vertex_values))
            f2 = np.sum(w2 * (pts2 @ vertex_values))
            assert f0 == pytest.approx(f2)

    def test_unknown_rule(self):
        with pytest.raises((KeyError, ValueError)):
            triangle_rule("simpson")


class TestTriQuadrature:
    def test_triangle_count_and_area(self):
        grid = SpatialGrid(4, 3)
        quad = TriQuadrature(grid)
        assert quad.n_triangles == 2 * 4 * 3
        ones = np.ones_like(quad.px)
        assert quad.integrate(ones) == pytest.approx(1.0)

    def test_integrates_smooth_function(self):
        grid = SpatialGrid(16, 16)
        quad = TriQuadrature(grid, rule="radon7")
        vals = np.sin(np.pi * quad.px) * np.sin(np.pi * quad.py)
        assert quad.integrate(vals) == pytest.approx(4.0 / np.pi**2, rel=1e-6)

    def test_interpolation_exact_for_linear_with_zero_boundary(self):
        # nodal interpolation reproduces any P1 field; compare a hat-sum
        # against direct evaluation at the quadrature points
        grid = SpatialGrid(5, 4)
        quad = TriQuadrature(grid, rule="radon7", refine=1)
        rng = np.random.default_rng(7)
        u = rng.standard_normal(grid.ndof)
        vals = quad.interpolate_nodal(u)
        again = quad.interpolate_nodal(u)
        assert vals == pytest.approx(again)
        # integral of the interpolant equals mass-vector inner product:
        # sum_j u_j * integral(phi_j) with integral(phi_j) = hx*hy
        assert quad.integrate(vals) == pytest.approx(
            grid.hx * grid.hy * u.sum(), abs=1e-12
        )

    def test_hat_weight_matrix_constant_function(self):
        # W @ 1 gives the integral of each interior hat: hx * hy
        grid = SpatialGrid(6, 5)
        quad = TriQuadrature(grid)
        W = quad.hat_weight_matrix()
        integrals = W @ np.ones(quad.n_triangles * quad.weights.size)
        assert integrals == pytest.approx(np.full(grid.ndof, grid.hx * grid.hy))

    def test_rule_refinement_consistency(self):
        # a degree-2 rule and a refined degree-5 rule agree on smooth data
        grid = SpatialGrid(8, 8)
        q1 = TriQuadrature(grid, rule="midpoint")
        q2 = TriQuadrature(grid, rule="radon7", refine=1)
        f = lambda x, y: np.exp(x) * np.cos(y)  # noqa: E731
        v1 = q1.integrate(f(q1.px, q1.py))
        v2 = q2.integrate(f(q2.px, q2.py))
        assert v1 == pytest.approx(v2, rel=1e-5)
