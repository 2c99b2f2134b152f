import numpy as np
import pytest
from numpy.testing import assert_allclose

from aleweyl import gauge_maps as gm
from aleweyl import spaces
from aleweyl.tensors import perm, sym, norm

from oracles import brute_symmetrize, fd_riemann, random_curvature, random_weyl

MS = (3, 4, 5, 6)
TOL = 1e-10


def rand_s2s2(m, rng):
    A = rng.standard_normal((m,) * 4)
    A = 0.5 * (A + np.transpose(A, (1, 0, 2, 3)))
    return 0.5 * (A + np.transpose(A, (0, 1, 3, 2)))


def rand_s2rm(m, rng):
    A = rng.standard_normal((m, m, m))
    return 0.5 * (A + np.transpose(A, (1, 0, 2)))


def rand_rms3(m, rng):
    B = rng.standard_normal((m,) * 4)
    return sym(B, (2, 3, 4))


def rand_s20(m, rng):
    B = rng.standard_normal((m, m))
    B = 0.5 * (B + B.T)
    return B - np.trace(B) / m * np.eye(m)


def rand_skew(m, rng):
    B = rng.standard_normal((m, m))
    return 0.5 * (B - B.T)


def curvature_symmetry_defects(R):
    return (
        norm(R + np.transpose(R, (1, 0, 2, 3))),
        norm(R + np.transpose(R, (0, 1, 3, 2))),
        norm(R - np.transpose(R, (2, 3, 0, 1))),
        norm(R + perm(R, 1, 3, 4, 2) + perm(R, 1, 4, 2, 3)),
    )


class TestCurvatureOfQuadratic:
    def test_zero(self):
        assert norm(gm.curvature_of_quadratic(np.zeros((4,) * 4))) == 0.0

    @pytest.mark.parametrize("m", MS)
    def test_antisymmetry_forced(self, m):
        rng = np.random.default_rng(m)
        A = rand_s2s2(m, rng)
        R = gm.curvature_of_quadratic(A)
        assert_allclose(R, -np.transpose(R, (1, 0, 2, 3)), atol=1e-12)

    @pytest.mark.parametrize("m", MS)
    def test_output_is_curvature_type(self, m):
        rng = np.random.default_rng(m + 10)
        R = gm.curvature_of_quadratic(rand_s2s2(m, rng))
        for defect in curvature_symmetry_defects(R):
            assert defect < 1e-10 * max(1.0, norm(R))

    @pytest.mark.parametrize("m", (3, 4))
    def test_matches_finite_difference_curvature(self, m):
        rng = np.random.default_rng(3 * m)
        A = 0.05 * rand_s2s2(m, rng)

        def eval_g(x):
            return np.eye(m) + np.einsum("ijkl,k,l->ij", A, x, x)

        R_fd = fd_riemann(eval_g, m, h=1e-4)
        assert_allclose(R_fd, gm.curvature_of_quadratic(A), atol=1e-6)

    def test_symmetry_precondition(self):
        bad = np.random.default_rng(0).standard_normal((4,) * 4)
        with pytest.raises(ValueError):
            gm.curvature_of_quadratic(bad)


class TestNormalCoefficientSplit:
    @pytest.mark.parametrize("m", MS)
    def test_split_reassembles(self, m):
        # explicit two-term split whose sum is the input
        rng = np.random.default_rng(m + 20)
        A = rand_s2s2(m, rng)
        Ct, B = spaces.split_curvature(A)
        assert_allclose(Ct + gm.quadratic_shift(B), A, atol=TOL * norm(A))

    @pytest.mark.parametrize("m", MS)
    def test_normal_coefficient_is_curvature_image(self, m):
        rng = np.random.default_rng(m + 30)
        A = rand_s2s2(m, rng)
        Ct = gm.normal_coefficient(A)
        assert spaces.space_basis("Ctilde", m).contains(Ct, 1e-9)

    def test_zero(self):
        assert norm(gm.normal_coefficient(np.zeros((4,) * 4))) == 0.0

    @pytest.mark.parametrize("m", (4, 5))
    def test_pure_image_input(self, m):
        rng = np.random.default_rng(m + 41)
        B0 = rand_rms3(m, rng)
        A = gm.quadratic_shift(B0)
        Ct, B = spaces.split_curvature(A)
        assert norm(Ct) < 1e-10 * norm(A)
        assert_allclose(B, B0, atol=1e-10 * norm(B0))

    @pytest.mark.parametrize("m", (4, 5))
    def test_curvature_input_untouched(self, m):
        rng = np.random.default_rng(m + 42)
        A = gm.sym_pair(random_curvature(m, rng))
        Ct, B = spaces.split_curvature(A)
        assert_allclose(Ct, A, atol=1e-9 * norm(A))
        assert norm(gm.quadratic_shift(B)) < 1e-9 * norm(A)


class TestSymPair:
    def test_zero(self):
        assert norm(gm.sym_pair(np.zeros((4,) * 4))) == 0.0

    @pytest.mark.parametrize("m", MS)
    def test_injective_on_curvature_space(self, m):
        dom = spaces.space_basis("C", m)
        M = spaces.map_matrix(gm.sym_pair, dom)
        s = np.linalg.svd(M, compute_uv=False)
        assert int(np.sum(s > 1e-8 * s[0])) == dom.dim

    @pytest.mark.parametrize("m", (4, 5, 6))
    def test_weyl_image_constraints(self, m):
        rng = np.random.default_rng(m)
        W = random_weyl(m, rng)
        Wt = gm.sym_pair(W)
        assert norm(gm.bianchi_op2(Wt)) < 1e-9 * norm(Wt)
        for (i, j) in ((1, 2), (3, 4), (1, 3), (1, 4), (2, 3), (2, 4)):
            from aleweyl.tensors import trace

            assert norm(trace(Wt, i, j)) < 1e-10 * norm(Wt)

    def test_first_bianchi_on_image(self, m=4):
        # cyclic identity for symmetric-pair forms of curvature tensors
        rng = np.random.default_rng(9)
        A = gm.sym_pair(random_curvature(m, rng))
        cyc = A + perm(A, 1, 3, 4, 2) + perm(A, 1, 4, 2, 3)
        assert norm(cyc) < 1e-10 * norm(A)


class TestWeylFromSymPair:
    def test_zero(self):
        assert norm(gm.weyl_from_sym_pair(np.zeros((4,) * 4))) == 0.0

    @pytest.mark.parametrize("m", (4, 5, 6))
    def test_round_trip(self, m):
        rng = np.random.default_rng(m + 50)
        W = random_weyl(m, rng)
        Wt = gm.sym_pair(W)
        assert_allclose(gm.sym_pair(gm.weyl_from_sym_pair(Wt)), Wt, atol=1e-10 * norm(Wt))
        assert_allclose(gm.weyl_from_sym_pair(Wt), W, atol=1e-9 * norm(W))

    @pytest.mark.parametrize("m", (4, 5))
    def test_output_weyl_symmetries(self, m):
        rng = np.random.default_rng(m + 60)
        Wt = gm.sym_pair(random_weyl(m, rng))
        W = gm.weyl_from_sym_pair(Wt)
        for defect in curvature_symmetry_defects(W):
            assert defect < 1e-9 * norm(W)
        assert norm(np.einsum("aiaj->ij", W)) < 1e-9 * norm(W)


class TestLinearShift:
    @pytest.mark.parametrize("m", MS)
    def test_rank_full(self, m):
        dom = spaces.space_basis("S2xRm", m)
        M = spaces.map_matrix(gm.linear_shift, dom)
        s = np.linalg.svd(M, compute_uv=False)
        assert int(np.sum(s > 1e-8 * s[0])) == m * m * (m + 1) // 2

    @pytest.mark.parametrize("m", MS)
    def test_exact_rank_over_rationals(self, m):
        vecs = spaces.integer_spanning_set("S2xRm", m)
        cols = [gm.linear_shift(v).reshape(-1) for v in vecs]
        M = [[int(round(x)) for x in col] for col in cols]
        assert spaces.exact_rank(M) == m * m * (m + 1) // 2

    @pytest.mark.parametrize("m", (3, 4, 5))
    def test_inversion_solves_coefficient_equation(self, m):
        # the change-coefficient equation A + 2Q_(312) + 2Q_(321) = 0
        rng = np.random.default_rng(m + 70)
        A = rand_s2rm(m, rng)
        dom = spaces.space_basis("S2xRm", m)
        M = spaces.map_matrix(gm.linear_shift, dom)
        coords, *_ = np.linalg.lstsq(M, A.reshape(-1), rcond=None)
        Q = dom.from_coords(coords)
        residual = A + 2.0 * perm(Q, 3, 1, 2) + 2.0 * perm(Q, 3, 2, 1)
        assert norm(residual) < 1e-9 * norm(A)

    def test_zero(self):
        assert norm(gm.linear_shift(np.zeros((4, 4, 4)))) == 0.0


class TestQuadraticShift:
    def test_zero(self):
        assert norm(gm.quadratic_shift(np.zeros((4,) * 4))) == 0.0

    @pytest.mark.parametrize("m", (4, 5))
    def test_directness_equation_only_zero_solution(self, m):
        # from the cyclic identity: 3B_(1234)+B_(2134)+B_(3124)+B_(4123) = 0
        # has only B = 0 in the symmetric-last-three class
        dom = spaces.space_basis("RmxS3", m)

        def cyc_op(B):
            return (
                3.0 * B
                + perm(B, 2, 1, 3, 4)
                + perm(B, 3, 1, 2, 4)
                + perm(B, 4, 1, 2, 3)
            )

        M = spaces.map_matrix(cyc_op, dom)
        s = np.linalg.svd(M, compute_uv=False)
        assert int(np.sum(s > 1e-8 * s[0])) == dom.dim

    @pytest.mark.parametrize("m", MS)
    def test_direct_sum_dims(self, m):
        ctilde = spaces.space_basis("Ctilde", m)
        img = spaces.image_basis(gm.quadratic_shift, spaces.space_basis("RmxS3", m))
        total = spaces.space_basis("S2xS2", m).dim
        assert ctilde.dim + img.shape[0] == total
        stacked = np.concatenate([ctilde.basis, img], axis=0)
        s = np.linalg.svd(stacked, compute_uv=False)
        assert int(np.sum(s > 1e-8 * s[0])) == total


class TestDecayShifts:
    @pytest.mark.parametrize("m", MS)
    def test_vector_shift_in_bianchi_kernel(self, m):
        rng = np.random.default_rng(m + 80)
        B = rng.standard_normal(m)
        assert norm(gm.bianchi_op1(gm.decay_vector_shift(B, m))) < 1e-12

    def test_vector_shift_component_formula(self):
        m = 4
        B = np.zeros(m)
        B[0] = 1.0
        out = gm.decay_vector_shift(B, m)
        expected = np.zeros((m, m, m))
        for i in range(m):
            for j in range(m):
                for k in range(m):
                    expected[i, j, k] = -(m - 2.0) * (
                        (i == k) * B[j] + (j == k) * B[i]
                    )
        assert_allclose(out, expected)

    def test_zero(self):
        assert norm(gm.decay_vector_shift(np.zeros(5), 5)) == 0.0
        assert norm(gm.decay_matrix_shift(np.zeros((5, 5)))) == 0.0

    @pytest.mark.parametrize("m", MS)
    def test_matrix_shift_of_delta_is_pure_trace_pattern(self, m):
        out = gm.decay_matrix_shift(np.eye(m))
        I = np.eye(m)
        expected = 2.0 * np.einsum("ij,kl->ijkl", I, I) - m * (
            np.einsum("ik,jl->ijkl", I, I) + np.einsum("il,jk->ijkl", I, I)
        )
        assert_allclose(out, expected, atol=1e-12)
        assert_allclose(out, -m * gm.trace_pattern(4, 1.0, m), atol=1e-12)

    @pytest.mark.parametrize("m", MS)
    def test_matrix_shift_on_skew(self, m):
        rng = np.random.default_rng(m + 90)
        B = rand_skew(m, rng)
        assert_allclose(
            gm.decay_matrix_shift(B), -(m / 2.0) * gm.trace_pattern(3, B), atol=1e-12
        )

    @pytest.mark.parametrize("m", MS)
    def test_matrix_shift_on_traceless_symmetric(self, m):
        rng = np.random.default_rng(m + 91)
        B = rand_s20(m, rng)
        assert_allclose(
            gm.decay_matrix_shift(B), -(m / 2.0) * gm.trace_pattern(5, B), atol=1e-12
        )


class TestBianchiOps:
    @pytest.mark.parametrize("m", MS)
    def test_op1_on_delta_family(self, m):
        rng = np.random.default_rng(m)
        B = rng.standard_normal(m)
        I = np.eye(m)
        A = np.einsum("ij,k->ijk", I, B)
        got = gm.bianchi_op1(A)
        expected = (m - 2.0) * (
            (m / 2.0) * (np.einsum("ik,j->ijk", I, B) + np.einsum("jk,i->ijk", I, B))
            - np.einsum("ij,k->ijk", I, B)
        )
        assert_allclose(got, expected, atol=1e-12)
        assert norm(got) > 0.1  # nonvanishing on this family

    def test_op1_zero(self):
        assert norm(gm.bianchi_op1(np.zeros((4, 4, 4)))) == 0.0

    @pytest.mark.parametrize("m", (4, 5, 6))
    def test_op2_identities(self, m):
        rng = np.random.default_rng(m + 1)
        I = np.eye(m)
        B = rand_s20(m, rng)
        got1 = gm.bianchi_op2(gm.trace_pattern(1, B))
        exp1 = brute_symmetrize(
            (4.0 - 2.0 * m) * np.einsum("ij,kl->ijkl", B, I)
            + (m * m - 4.0) * np.einsum("kl,ij->ijkl", B, I),
            (2, 3, 4),
        )
        assert_allclose(got1, exp1, atol=TOL * max(1, norm(exp1)))

        got2 = gm.bianchi_op2(gm.trace_pattern(2, B))
        exp2 = brute_symmetrize(
            (8.0 * (m - 2.0) / m) * np.einsum("ij,kl->ijkl", B, I)
            + (4.0 * (4.0 - m * m) / m) * np.einsum("kl,ij->ijkl", B, I),
            (2, 3, 4),
        )
        assert_allclose(got2, exp2, atol=TOL * max(1, norm(exp2)))

        K = rand_skew(m, rng)
        assert norm(gm.bianchi_op2(gm.trace_pattern(3, K))) < TOL * norm(K) * m**2

        # the pure-delta pattern is the flat metric's Lie derivative along the
        # decaying harmonic field x/|x|^m, so the constraint operator kills it;
        # verified against exact rational arithmetic (the first trace evaluates
        # to (m+1-2/m), making the four coefficients cancel)
        got4 = gm.bianchi_op2(gm.trace_pattern(4, 1.0, m))
        assert norm(got4) < TOL

    @pytest.mark.parametrize("m", (4, 5, 6))
    def test_op2_trace_constants(self, m):
        rng = np.random.default_rng(m + 2)
        B = rand_s20(m, rng)
        t1 = np.einsum("aakl->kl", gm.bianchi_op2(gm.trace_pattern(1, B)))
        assert_allclose(t1, (m * (m + 4.0) * (m - 2.0) / 3.0) * B, atol=1e-9 * norm(B))
        t2 = np.einsum("aakl->kl", gm.bianchi_op2(gm.trace_pattern(2, B)))
        assert_allclose(t2, -(4.0 * (m + 4.0) * (m - 2.0) / 3.0) * B, atol=1e-9 * norm(B))

    @pytest.mark.parametrize("m", (4, 5, 6))
    def test_op2_kills_pattern5(self, m):
        rng = np.random.default_rng(m + 3)
        B = rand_s20(m, rng)
        assert norm(gm.bianchi_op2(gm.trace_pattern(5, B))) < TOL * norm(B) * m**2


class TestTracePatterns:
    @pytest.mark.parametrize("m", MS)
    def test_trace_constants(self, m):
        rng = np.random.default_rng(m + 4)
        B = rand_s20(m, rng)
        assert_allclose(
            np.einsum("iaal->il", gm.trace_pattern(2, B)),
            (m + 2.0 - 8.0 / m) * B,
            atol=1e-11 * norm(B),
        )
        K = rand_skew(m, rng)
        assert_allclose(
            np.einsum("iaal->il", gm.trace_pattern(3, K)),
            (m + 2.0) * K,
            atol=1e-11 * norm(K),
        )
        base = gm.trace_pattern(4, 1.0, m) + (2.0 / m) * np.einsum(
            "ij,kl->ijkl", np.eye(m), np.eye(m)
        )
        assert_allclose(
            np.einsum("iaal->il", base), (m + 1.0) * np.eye(m), atol=1e-11
        )

    @pytest.mark.parametrize("m", MS)
    def test_pattern5_relation(self, m):
        rng = np.random.default_rng(m + 5)
        B = rand_s20(m, rng)
        lhs = gm.trace_pattern(5, B)
        rhs = gm.trace_pattern(2, B) + (4.0 / m) * gm.trace_pattern(1, B)
        assert_allclose(lhs, rhs, atol=1e-12 * norm(B) * m)

    def test_zero(self):
        m = 4
        for k in (1, 2, 5):
            assert norm(gm.trace_pattern(k, np.zeros((m, m)))) == 0.0
        assert norm(gm.trace_pattern(3, np.zeros((m, m)))) == 0.0
        assert norm(gm.trace_pattern(4, 0.0, m)) == 0.0

    def test_wrong_class_rejected(self):
        m = 4
        rng = np.random.default_rng(6)
        with pytest.raises(ValueError):
            gm.trace_pattern(1, rand_skew(m, rng) + np.eye(m))
        with pytest.raises(ValueError):
            gm.trace_pattern(3, np.eye(m))
        with pytest.raises(ValueError):
            gm.trace_pattern(7, np.eye(m))


class TestEquivariance:
    """The maps are O(m)-morphisms: they commute with slot-wise rotation."""

    @pytest.mark.parametrize("seed", range(4))
    def test_rotation_equivariance(self, seed):
        from aleweyl.tensors import conjugate
        from oracles import rotation_matrix

        m = 4
        rng = np.random.default_rng(seed)
        Q = rotation_matrix(m, rng)
        A = rand_s2s2(m, rng)
        assert_allclose(
            gm.curvature_of_quadratic(conjugate(A, Q)),
            conjugate(gm.curvature_of_quadratic(A), Q),
            atol=1e-12,
        )
        assert_allclose(
            gm.bianchi_op2(conjugate(A, Q)),
            conjugate(gm.bianchi_op2(A), Q),
            atol=1e-11,
        )
        B = rand_s2rm(m, rng)
        assert_allclose(
            gm.bianchi_op1(conjugate(B, Q)),
            conjugate(gm.bianchi_op1(B), Q),
            atol=1e-12,
        )
        v = rng.standard_normal(m)
        assert_allclose(
            gm.decay_vector_shift(Q.T @ v, m),
            conjugate(gm.decay_vector_shift(v, m), Q),
            atol=1e-12,
        )
        Bm = rng.standard_normal((m, m))
        assert_allclose(
            gm.decay_matrix_shift(Q.T @ Bm @ Q),
            conjugate(gm.decay_matrix_shift(Bm), Q),
            atol=1e-12,
        )


class TestRegistry:
    def test_dispatch_matches_functions(self):
        m = 4
        rng = np.random.default_rng(7)
        A = rand_s2s2(m, rng)
        assert_allclose(gm.gauge_map("R", A), gm.curvature_of_quadratic(A))
        B = rng.standard_normal(m)
        assert_allclose(gm.gauge_map("Psi3", B, m), gm.decay_vector_shift(B, m))
        assert_allclose(gm.gauge_map("Xi4", 2.0, m), gm.trace_pattern(4, 2.0, m))

    def test_unknown_id(self):
        with pytest.raises(ValueError):
            gm.gauge_map("nope", np.eye(4))
