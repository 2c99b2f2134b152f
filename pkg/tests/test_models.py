import numpy as np
import pytest
from numpy.testing import assert_allclose

from aleweyl import models
from aleweyl.infinity import DecayingChange, fit_expansion
from aleweyl.tensors import norm

from oracles import random_weyl, rotation_matrix


class TestComplexStepDerivatives:
    def test_matches_finite_differences(self):
        rng = np.random.default_rng(0)
        W = 0.05 * random_weyl(4, rng)
        model = models.SyntheticWeylModel(W, cap_radius=1.0)
        pts = 5.0 + rng.random((6, 4))
        dg = model.dmetric(pts)
        h = 1e-6
        for k in range(4):
            e = np.zeros(4)
            e[k] = h
            fd = (model.metric(pts + e) - model.metric(pts - e)) / (2 * h)
            assert_allclose(dg[:, k], fd, atol=1e-9)

    def test_flat_derivatives_zero(self):
        flat = models.catalog_build("flat", m=5)
        pts = np.random.default_rng(1).random((4, 5)) + 3.0
        assert np.max(np.abs(flat.dmetric(pts))) == 0.0


class TestSyntheticWeyl:
    def test_leading_term_constraints(self):
        # radial transversality, total tracelessness, divergence-free,
        # harmonicity of the generated deviation
        rng = np.random.default_rng(2)
        W = 0.05 * random_weyl(4, rng)
        model = models.SyntheticWeylModel(W, cap_radius=1.0)  # validator runs
        S = model.S
        for pattern in ("ijaa->ij", "aakl->kl", "iaal->il"):
            assert norm(np.einsum(pattern, S)) < 1e-10
        # harmonicity via the identity Delta(x_a x_b r^-(m+2)) = 2 d_ab r^-(m+2):
        # checked numerically once with finite differences
        m = 4
        x = np.array([1.3, -0.4, 0.8, 2.0])
        h = 1e-4

        def term(x):
            r = np.linalg.norm(x)
            return np.einsum("ijab,a,b->ij", S, x, x) / r ** (m + 2)

        lap = np.zeros((m, m))
        for k in range(m):
            e = np.zeros(m)
            e[k] = h
            lap += (term(x + e) + term(x - e) - 2 * term(x)) / h**2
        assert np.max(np.abs(lap)) < 1e-6 * norm(S)

    def test_flat_inside_cap(self):
        rng = np.random.default_rng(3)
        W = 0.05 * random_weyl(4, rng)
        model = models.SyntheticWeylModel(W, cap_radius=2.0)
        pts = 0.5 * np.eye(4)[:3]
        assert np.max(np.abs(model.metric(pts) - np.eye(4))) < 1e-15

    def test_positive_definite(self):
        rng = np.random.default_rng(4)
        W = 0.05 * random_weyl(4, rng)
        model = models.SyntheticWeylModel(W, cap_radius=1.0)
        assert model.validate_positive([1.0, 1.5, 3.0, 10.0])

    def test_bad_leading_term_rejected(self):
        # a non-Weyl "W" must fail the built-in validator
        rng = np.random.default_rng(5)
        notW = rng.standard_normal((4,) * 4)
        with pytest.raises(ValueError):
            models.SyntheticWeylModel(notW, cap_radius=1.0)


class TestEguchiHanson:
    def test_decay_rate_fitted(self):
        model = models.catalog_build("eguchi_hanson", a=1.0)
        radii = np.array([4.0, 8.0, 16.0, 32.0])
        sups = []
        nodes = np.random.default_rng(6).standard_normal((64, 4))
        nodes /= np.linalg.norm(nodes, axis=1)[:, None]
        for r in radii:
            dev = model.metric(r * nodes) - np.eye(4)
            sups.append(np.max(np.abs(dev)))
        slope = np.polyfit(np.log(radii), np.log(sups), 1)[0]
        assert abs(slope + 4.0) < 0.05

    def test_asymptotic_coefficient_is_weyl_type(self):
        from aleweyl import spaces

        model = models.catalog_build("eguchi_hanson", a=1.0)
        e, _ = fit_expansion(model, 16.0, n_annuli=3)
        assert norm(e.A3) < 1e-8
        # trace-free, radially transverse, and in the Weyl image up to the
        # O(r^-8) fit contamination
        assert norm(np.einsum("ijaa->ij", e.A4)) < 1e-6
        wt = spaces.space_basis("Wtilde", 4)
        assert norm(e.A4 - wt.project(e.A4)) < 1e-4 * norm(e.A4)

    def test_exact_ball_volume(self):
        model = models.EguchiHansonModel(a=1.0)
        s = 10.0
        r = model._radial(s)
        assert model.exact_ball_volume(s) == pytest.approx(
            np.pi**2 / 4.0 * (r**4 - 1.0)
        )

    def test_positive_definite(self):
        model = models.EguchiHansonModel(a=1.0)
        assert model.validate_positive([1.5, 2.0, 5.0, 40.0])

    def test_group_order(self):
        assert models.EguchiHansonModel(a=2.0).group_order == 2

    def test_dimension_guard(self):
        with pytest.raises(ValueError):
            models.catalog_build("eguchi_hanson", m=5)


class TestPulledBack:
    def test_identity_change_is_base(self):
        flat = models.catalog_build("flat", m=4)
        pb = models.PulledBackModel(flat, DecayingChange.identity(4), gate_radius=2.0)
        pts = np.random.default_rng(7).random((5, 4)) + 6.0
        assert_allclose(pb.metric(pts), flat.metric(pts), atol=1e-14)

    def test_rotation_preserves_flat(self):
        rng = np.random.default_rng(8)
        flat = models.catalog_build("flat", m=4)
        Q = rotation_matrix(4, rng)
        ch = DecayingChange(Q, np.zeros(4), np.zeros(4), np.zeros((4, 4)))
        pb = models.PulledBackModel(flat, ch, gate_radius=2.0)
        pts = rng.random((5, 4)) + 6.0
        assert np.max(np.abs(pb.metric(pts) - np.eye(4))) < 1e-13

    def test_harmonic_displacement_keeps_bianchi(self):
        # inverse-power displacements of a decaying change are harmonic, so
        # the pullback of an exactly Bianchi (flat) metric stays Bianchi
        from aleweyl.exterior.grid import AnnulusGrid
        from aleweyl.exterior.maps import bianchi_residual

        rng = np.random.default_rng(9)
        flat = models.catalog_build("flat", m=4)
        ch = DecayingChange(
            np.eye(4), np.zeros(4), 0.05 * rng.standard_normal(4),
            0.05 * rng.standard_normal((4, 4)),
        )
        pb = models.PulledBackModel(flat, ch, gate_radius=2.0)
        g = AnnulusGrid(4, 8.0, 3, points_per_octave=8, angular_degree=10)
        res, _ = bianchi_residual(pb, g)
        assert np.max(np.abs(res.values)) < 1e-14

    def test_gate_region_guard(self):
        flat = models.catalog_build("flat", m=4)
        flat.inner_radius = 3.0
        with pytest.raises(ValueError):
            models.PulledBackModel(flat, DecayingChange.identity(4), gate_radius=2.0)

    def test_core_volume_below_gate(self):
        flat = models.catalog_build("flat", m=4)
        pb = models.PulledBackModel(flat, DecayingChange.identity(4), gate_radius=3.0)
        assert pb.exact_ball_volume(2.0) == pytest.approx(models.ball_volume(4, 2.0))
        assert pb.exact_ball_volume(5.0) is None


class TestCatalog:
    def test_flat_quotient_volume(self):
        for k in (1, 2, 5):
            model = models.catalog_build("flat_quotient", m=4, group_order=k)
            assert model.exact_ball_volume(2.0) == pytest.approx(
                models.ball_volume(4, 2.0) / k
            )

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            models.catalog_build("nope", m=4)

    def test_synthetic_random_seeded(self):
        a = models.catalog_build("synthetic_weyl", m=4, seed=5)
        b = models.catalog_build("synthetic_weyl", m=4, seed=5)
        assert_allclose(a.W, b.W, atol=0)

    def test_weyl_trivial_dimension_rejected(self):
        with pytest.raises(ValueError):
            models.catalog_build("synthetic_weyl", m=3, seed=0)
