import numpy as np
import pytest
from numpy.testing import assert_allclose

from aleweyl.exterior.grid import AnnulusGrid, WeightedField
from aleweyl.exterior.harmonics import basis_for
from aleweyl.exterior.poisson import harmonic_tail_fit, solve_poisson_exterior

from oracles import laplace_mode_power, laplace_radial_power


def grid(m, R=1.0, octaves=6, ppo=16, degree=12):
    return AnnulusGrid(m, R, octaves, points_per_octave=ppo, angular_degree=degree)


def mode_field(g, l, a, which=0):
    if l == 0:
        Y = np.ones(g.n_angular)
    else:
        b = basis_for(g.dim, max(4, l), g.angular_degree)
        Y = b.eval_at(l, g.nodes)[which]
    return WeightedField(g, g.radii[:, None] ** a * Y[None, :]), Y


class TestClosedForms:
    @pytest.mark.parametrize("m,beta", ((3, 1.3), (4, 2.7), (5, 2.2)))
    def test_radial(self, m, beta):
        g = grid(m)
        a = -beta
        coef = laplace_radial_power(a, m)
        f, _ = mode_field(g, 0, a - 2)
        u, rep = solve_poisson_exterior(WeightedField(g, coef * f.values), beta, lmax=4)
        exact = g.radii[:, None] ** a * np.ones((1, g.n_angular))
        rel = np.max(np.abs(u.values - exact)) / np.max(np.abs(exact))
        assert rel < 1e-6

    def test_zero(self):
        g = grid(3)
        u, _ = solve_poisson_exterior(
            WeightedField(g, np.zeros((g.n_radii, g.n_angular))), 1.5, lmax=2
        )
        assert np.max(np.abs(u.values)) == 0.0

    @pytest.mark.parametrize("m,beta,l", ((3, 1.3, 2), (4, 3.9, 2), (4, 1.5, 4), (3, 3.7, 3)))
    def test_modes(self, m, beta, l):
        g = grid(m)
        a = -beta
        denom = laplace_mode_power(a, l, m)
        f, Y = mode_field(g, l, a - 2)
        u, _ = solve_poisson_exterior(WeightedField(g, denom * f.values), beta, lmax=max(4, l))
        exact = g.radii[:, None] ** a * Y[None, :]
        rel = np.max(np.abs(u.values - exact)) / np.max(np.abs(exact))
        assert rel < 1e-6

    def test_multimode(self):
        m = 4
        g = grid(m, R=2.0)
        rng = np.random.default_rng(0)
        beta = 2.7
        a = -beta
        b = basis_for(m, 4, g.angular_degree)
        f = np.zeros((g.n_radii, g.n_angular))
        exact = np.zeros_like(f)
        for l in range(5):
            Y = (b.eval_at(l, g.nodes) * rng.standard_normal((b.eval_at(l, g.nodes).shape[0], 1))).sum(0)
            f += laplace_mode_power(a, l, m) * g.radii[:, None] ** (a - 2) * Y[None, :]
            exact += g.radii[:, None] ** a * Y[None, :]
        u, _ = solve_poisson_exterior(WeightedField(g, f), beta, lmax=4)
        assert np.max(np.abs(u.values - exact)) / np.max(np.abs(exact)) < 1e-6

    def test_interp_defect_reported(self):
        m = 3
        g = grid(m)
        beta = 1.3
        coef = laplace_radial_power(-beta, m)

        def src(pts):
            return coef * np.linalg.norm(pts, axis=1) ** (-beta - 2.0)

        f = WeightedField.from_function(g, src)
        u, rep = solve_poisson_exterior(f, beta, lmax=2, source_fn=src)
        assert rep.interp_defect < 1e-10  # power-law data is interpolated exactly


class TestLinearity:
    def test_solver_linear_in_source(self):
        # the piecewise power-law interpolation is exact on power-law radial
        # profiles, so superposition holds exactly on this family (and up to
        # interpolation error otherwise)
        m = 3
        g = grid(m)
        beta = 1.3
        rng = np.random.default_rng(11)
        b = basis_for(m, 3, g.angular_degree)
        fields = []
        for seed in (0, 1):
            rng = np.random.default_rng(seed)
            vals = np.zeros((g.n_radii, g.n_angular))
            for l in range(3):
                Yl = b.eval_at(l, g.nodes)
                Y = (Yl * rng.standard_normal((Yl.shape[0], 1))).sum(0)
                vals += g.radii[:, None] ** (-beta - 2.0) * Y[None, :]
            fields.append(vals)
        u1, _ = solve_poisson_exterior(WeightedField(g, fields[0]), beta, lmax=3)
        u2, _ = solve_poisson_exterior(WeightedField(g, fields[1]), beta, lmax=3)
        u12, _ = solve_poisson_exterior(
            WeightedField(g, 2.0 * fields[0] - 0.5 * fields[1]), beta, lmax=3
        )
        assert_allclose(u12.values, 2.0 * u1.values - 0.5 * u2.values, atol=1e-12)


class TestGuards:
    def test_resonant_beta_rejected(self):
        m = 4
        g = grid(m)
        f = WeightedField.from_function(g, lambda p: np.linalg.norm(p, axis=1) ** -4.0)
        with pytest.raises(ValueError, match="resonant"):
            solve_poisson_exterior(f, float(m - 2), lmax=2)

    def test_resonance_ignored_for_absent_mode(self):
        # beta = m-2+l is only exceptional when degree-l content is present
        m = 4
        g = grid(m)
        beta = float(m - 2 + 3)  # l=3 resonance, but source is radial
        f = WeightedField.from_function(
            g, lambda p: np.linalg.norm(p, axis=1) ** (-beta - 2.0)
        )
        u, _ = solve_poisson_exterior(f, beta, lmax=4)
        assert np.isfinite(u.values).all()

    def test_beta_positive_required(self):
        g = grid(3)
        f = WeightedField(g, np.ones((g.n_radii, g.n_angular)))
        with pytest.raises(ValueError):
            solve_poisson_exterior(f, -1.0)

    def test_min_octaves(self):
        g = AnnulusGrid(3, 1.0, 2, points_per_octave=8, angular_degree=8)
        f = WeightedField(g, np.zeros((g.n_radii, g.n_angular)))
        with pytest.raises(ValueError, match="octaves"):
            solve_poisson_exterior(f, 1.5)


class TestOperatorNorm:
    def test_norm_ratio_stable_across_R(self):
        # measured operator norm changes by < 20% when the inner radius doubles
        m = 3
        beta = 1.3
        ratios = []
        for R in (1.0, 2.0):
            rng = np.random.default_rng(4)  # same mode mixture at both radii
            g = grid(m, R=R)
            b = basis_for(m, 3, g.angular_degree)
            vals = np.zeros((g.n_radii, g.n_angular))
            for l in range(4):
                Y = (b.eval_at(l, g.nodes) * rng.standard_normal((b.eval_at(l, g.nodes).shape[0], 1))).sum(0)
                vals += g.radii[:, None] ** (-beta - 2.0 - 0.13 * l) * Y[None, :]
            f = WeightedField(g, vals)
            u, rep = solve_poisson_exterior(f, beta, lmax=3)
            ratios.append(rep.norm_ratio)
        assert abs(ratios[1] - ratios[0]) <= 0.2 * max(ratios)


class TestHarmonicTailFit:
    def test_single_decaying_mode(self):
        m = 4
        g = grid(m)
        f = WeightedField.from_function(
            g, lambda p: p[:, 2] / np.linalg.norm(p, axis=1) ** m
        )
        tail = harmonic_tail_fit(f, lmax=4)
        b = basis_for(m, 4, g.angular_degree)
        v = tail.linear_block_vector(b)
        assert_allclose(v, [0, 0, 1.0, 0], atol=1e-9)

    def test_zero_field(self):
        g = grid(3)
        tail = harmonic_tail_fit(WeightedField(g, np.zeros((g.n_radii, g.n_angular))), lmax=2)
        assert np.max(np.abs(tail.coefficients)) == 0.0

    def test_random_combination_recovered(self):
        m = 3
        g = grid(m)
        b = basis_for(m, 4, g.angular_degree)
        rng = np.random.default_rng(5)
        coeffs = rng.standard_normal(b.n_modes)
        vals = np.zeros((g.n_radii, g.n_angular))
        for l, sl in b.mode_slices():
            Y = b.eval_at(l, g.nodes)
            prof = g.radii ** (2.0 - m - l)
            vals += prof[:, None] * (coeffs[sl][:, None] * Y).sum(0)[None, :]
        tail = harmonic_tail_fit(WeightedField(g, vals), lmax=4)
        assert_allclose(tail.coefficients, coeffs, atol=1e-9 * np.max(np.abs(coeffs)))

    def test_growing_component_flagged(self):
        m = 3
        g = grid(m)
        vals = np.ones((g.n_radii, g.n_angular)) * g.radii[:, None] ** 1.0  # r * Y_0-ish
        with pytest.raises(ValueError, match="non-decaying"):
            harmonic_tail_fit(WeightedField(g, vals), lmax=2)
