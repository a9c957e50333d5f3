import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pabf.fields import Grid2, ScalarField, VectorField2, WeightField
from pabf.helmholtz import (
    gradient_at_bins,
    project_1d,
    project_neumann,
    project_periodic_weighted,
    weighted_norm2,
)
from pabf.oracle import dense_projection_solve

RNG = np.random.default_rng(42)
NEU = Grid2(-0.2, 1.2, 24)
PER = Grid2(0.0, 1.0, 24)


def smooth_field(grid, rng, modes=3):
    """Random band-limited field, smooth on the grid scale."""
    xc, yc = grid.centers()
    span = grid.xi_max - grid.xi_min
    u = (xc - grid.xi_min) / span
    v = (yc - grid.xi_min) / span
    vals = np.zeros((grid.n_bins, grid.n_bins, 2))
    for k in range(1, modes + 1):
        a, b, c, d = rng.standard_normal(4)
        vals[..., 0] += a * np.cos(2 * np.pi * k * u) + b * np.sin(2 * np.pi * k * v)
        vals[..., 1] += c * np.sin(2 * np.pi * k * (u + v)) + d * np.cos(2 * np.pi * k * v)
    return VectorField2(vals, grid)


def smooth_nodal(grid, rng, modes=3):
    """Random smooth nodal potential with zero mean and zero checkerboard."""
    xn, yn = grid.nodes()
    span = grid.xi_max - grid.xi_min
    u = (xn - grid.xi_min) / span
    v = (yn - grid.xi_min) / span
    g = np.zeros_like(xn)
    for k in range(1, modes + 1):
        a, b = rng.standard_normal(2)
        g += a * np.cos(np.pi * k * u) * np.cos(np.pi * k * v) + b * np.sin(np.pi * k * (u - v))
    # remove the full span of the gradient-invisible modes (ones and the
    # checkerboard are not orthogonal on odd-count grids, so solve jointly)
    ii, jj = np.meshgrid(np.arange(grid.n_nodes), np.arange(grid.n_nodes), indexing="ij")
    basis = np.stack([np.ones(xn.size), ((-1.0) ** (ii + jj)).ravel()], axis=1)
    coef, *_ = np.linalg.lstsq(basis, g.ravel(), rcond=None)
    return g - (basis @ coef).reshape(g.shape)


class TestNeumann:
    def test_constant_field_gives_linear_potential(self):
        vals = np.empty((NEU.n_bins, NEU.n_bins, 2))
        vals[..., 0] = 1.5
        vals[..., 1] = -0.7
        a = project_neumann(VectorField2(vals, NEU))
        xn, yn = NEU.nodes()
        expect = 1.5 * xn - 0.7 * yn
        expect -= expect.mean()
        assert np.abs(a.values - expect).max() < 1e-10

    def test_recovers_nodal_potential_from_its_gradient(self):
        g = smooth_nodal(NEU, np.random.default_rng(1))
        f = gradient_at_bins(ScalarField(g, NEU))
        a = project_neumann(f)
        assert np.abs(a.values - g).max() < 1e-10

    def test_dense_oracle_agreement(self):
        f = VectorField2(RNG.standard_normal((NEU.n_bins, NEU.n_bins, 2)), NEU)
        a = project_neumann(f)
        a_dense = dense_projection_solve(f)
        assert np.abs(a.values - a_dense.values).max() < 1e-9

    def test_idempotence(self):
        f = VectorField2(RNG.standard_normal((NEU.n_bins, NEU.n_bins, 2)), NEU)
        a1 = project_neumann(f)
        a2 = project_neumann(gradient_at_bins(a1))
        assert np.abs(a1.values - a2.values).max() < 1e-9

    def test_rejects_nonfinite_fields(self):
        vals = np.zeros((NEU.n_bins, NEU.n_bins, 2))
        vals[3, 4, 0] = np.nan
        with pytest.raises(ValueError):
            project_neumann(VectorField2(vals, NEU))

    def test_manufactured_solution_second_order(self):
        errs = {}
        for nb in (16, 32, 64):
            grid = Grid2(-0.2, 1.2, nb)
            span = grid.xi_max - grid.xi_min
            xc, yc = grid.centers()
            u, v = (xc - grid.xi_min) / span, (yc - grid.xi_min) / span
            vals = np.stack(
                [
                    -np.pi / span * np.sin(np.pi * u) * np.cos(np.pi * v),
                    -np.pi / span * np.cos(np.pi * u) * np.sin(np.pi * v),
                ],
                axis=-1,
            )
            a = project_neumann(VectorField2(vals, grid))
            xn, yn = grid.nodes()
            ref = np.cos(np.pi * (xn - grid.xi_min) / span) * np.cos(np.pi * (yn - grid.xi_min) / span)
            ref -= ref.mean()
            errs[nb] = np.sqrt(np.mean((a.values - ref) ** 2))
        assert 3.5 < errs[16] / errs[32] < 4.5
        assert 3.5 < errs[32] / errs[64] < 4.5


class TestPeriodic:
    def test_divergence_free_field_projects_to_zero(self):
        # discrete rotational field built from a periodic stream function
        h = smooth_nodal(PER, np.random.default_rng(2))
        h[-1, :] = h[0, :]
        h[:, -1] = h[:, 0]
        gh = gradient_at_bins(ScalarField.gauged(h, PER))
        rot = np.stack([gh.values[..., 1], -gh.values[..., 0]], axis=-1)
        a = project_periodic_weighted(VectorField2(rot, PER))
        assert np.abs(a.values).max() < 1e-8

    def test_uniform_weight_matches_unweighted(self):
        f = smooth_field(PER, np.random.default_rng(3))
        phi = WeightField(np.full((PER.n_bins, PER.n_bins), 0.37), PER)
        a0 = project_periodic_weighted(f)
        a1 = project_periodic_weighted(f, phi)
        assert np.abs(a0.values - a1.values).max() < 1e-10

    def test_weighted_matches_dense_oracle(self):
        rng = np.random.default_rng(4)
        f = VectorField2(rng.standard_normal((PER.n_bins, PER.n_bins, 2)), PER)
        phi = WeightField(rng.uniform(0.1, 5.0, (PER.n_bins, PER.n_bins)), PER)
        a = project_periodic_weighted(f, phi)
        a_dense = dense_projection_solve(f, phi, periodic=True)
        assert np.abs(a.values - a_dense.values).max() < 1e-9

    def test_rejects_mismatched_weight_grid(self):
        f = smooth_field(PER, np.random.default_rng(5))
        phi = WeightField(np.ones((NEU.n_bins, NEU.n_bins)), NEU)
        with pytest.raises(ValueError):
            project_periodic_weighted(f, phi)

    def test_periodic_seam_is_consistent(self):
        f = smooth_field(PER, np.random.default_rng(6))
        a = project_periodic_weighted(f)
        np.testing.assert_array_equal(a.values[-1, :], a.values[0, :])
        np.testing.assert_array_equal(a.values[:, -1], a.values[:, 0])


class TestInvariants:
    def test_pythagoras(self):
        for grid, project in ((NEU, project_neumann), (PER, project_periodic_weighted)):
            f = VectorField2(RNG.standard_normal((grid.n_bins, grid.n_bins, 2)), grid)
            grad = gradient_at_bins(project(f))
            n_f = weighted_norm2(f.values, grid)
            n_g = weighted_norm2(grad.values, grid)
            n_r = weighted_norm2(f.values - grad.values, grid)
            assert abs(n_f - n_g - n_r) / n_f < 1e-8

    def test_weighted_pythagoras(self):
        rng = np.random.default_rng(7)
        f = VectorField2(rng.standard_normal((PER.n_bins, PER.n_bins, 2)), PER)
        phi = WeightField(rng.uniform(0.2, 4.0, (PER.n_bins, PER.n_bins)), PER)
        grad = gradient_at_bins(project_periodic_weighted(f, phi))
        n_f = weighted_norm2(f.values, PER, phi.values)
        n_g = weighted_norm2(grad.values, PER, phi.values)
        n_r = weighted_norm2(f.values - grad.values, PER, phi.values)
        assert abs(n_f - n_g - n_r) / n_f < 1e-8

    def test_linearity(self):
        f = smooth_field(NEU, np.random.default_rng(8))
        g = smooth_field(NEU, np.random.default_rng(9))
        lhs = project_neumann(VectorField2(2.5 * f.values - 1.3 * g.values, NEU)).values
        rhs = 2.5 * project_neumann(f).values - 1.3 * project_neumann(g).values
        assert np.abs(lhs - rhs).max() < 1e-9

    def test_minimizer_property(self):
        f = VectorField2(RNG.standard_normal((NEU.n_bins, NEU.n_bins, 2)), NEU)
        a = project_neumann(f)
        base = weighted_norm2(gradient_at_bins(a).values - f.values, NEU)
        rng = np.random.default_rng(10)
        for _ in range(20):
            g = rng.standard_normal(a.values.shape)
            g -= g.mean()
            for eps in (1e-3, -1e-3):
                trial = ScalarField.gauged(a.values + eps * g, NEU)
                perturbed = weighted_norm2(gradient_at_bins(trial).values - f.values, NEU)
                assert perturbed >= base - 1e-12

    def test_variance_reduction_and_decomposition(self):
        rng = np.random.default_rng(11)
        fields = [smooth_field(PER, rng, modes=4).values + 0.3 * rng.standard_normal((PER.n_bins,) * 2 + (2,))
                  for _ in range(20)]
        projected = [gradient_at_bins(project_periodic_weighted(VectorField2(v, PER))).values for v in fields]
        fields = np.stack(fields)
        projected = np.stack(projected)
        residual = fields - projected

        def total_var(stack):
            return ((stack**2).mean(axis=0) - stack.mean(axis=0) ** 2).sum() * PER.delta**2

        v_f, v_p, v_r = total_var(fields), total_var(projected), total_var(residual)
        assert v_p <= v_f + 1e-10
        assert abs(v_f - v_p - v_r) / v_f < 1e-8

    def test_zero_mean_gauge(self):
        for grid, project in ((NEU, project_neumann), (PER, project_periodic_weighted)):
            f = VectorField2(RNG.standard_normal((grid.n_bins, grid.n_bins, 2)), grid)
            a = project(f)
            assert abs(a.values.mean()) < 1e-12 * max(1.0, np.abs(a.values).max())

    def test_cg_matches_direct(self):
        f = smooth_field(NEU, np.random.default_rng(12))
        a_direct = project_neumann(f, solver="direct")
        a_cg = project_neumann(f, solver="cg", tol=1e-13)
        assert np.abs(a_direct.values - a_cg.values).max() < 1e-8
        fp = smooth_field(PER, np.random.default_rng(13))
        a_direct = project_periodic_weighted(fp, solver="direct")
        a_cg = project_periodic_weighted(fp, solver="cg", tol=1e-13)
        assert np.abs(a_direct.values - a_cg.values).max() < 1e-8


class TestGradientAtBins:
    def test_linear_potential_gives_constant_gradient(self):
        xn, yn = NEU.nodes()
        a = ScalarField.gauged(0.8 * xn - 0.3 * yn, NEU)
        g = gradient_at_bins(a)
        np.testing.assert_allclose(g.values[..., 0], 0.8, atol=1e-12)
        np.testing.assert_allclose(g.values[..., 1], -0.3, atol=1e-12)

    def test_cosine_gradient_second_order(self):
        errs = {}
        for nb in (32, 64):
            grid = Grid2(0.0, 1.0, nb)
            xn, _ = grid.nodes()
            a = ScalarField.gauged(np.cos(2 * np.pi * xn), grid)
            g = gradient_at_bins(a)
            xc, _ = grid.centers()
            errs[nb] = np.abs(g.values[..., 0] + 2 * np.pi * np.sin(2 * np.pi * xc)).max()
        assert errs[32] / errs[64] > 3.0


class TestProject1D:
    def test_constant_goes_to_zero(self):
        np.testing.assert_array_equal(project_1d(np.full(10, 5.0)), np.zeros(10))

    def test_zero_mean_unchanged(self):
        x = np.sin(2 * np.pi * np.arange(16) / 16)
        x -= x.mean()
        np.testing.assert_allclose(project_1d(x), x, atol=1e-15)

    def test_offset_removed(self):
        x = np.sin(2 * np.pi * np.arange(16) / 16)
        x -= x.mean()
        np.testing.assert_allclose(project_1d(x + 3.0), x, atol=1e-13)

    @given(st.lists(st.floats(-1e6, 1e6), min_size=2, max_size=64))
    @settings(max_examples=50, deadline=None)
    def test_result_has_zero_mean(self, values):
        out = project_1d(np.array(values))
        assert abs(out.mean()) <= 1e-9 * max(1.0, np.abs(np.array(values)).max())
