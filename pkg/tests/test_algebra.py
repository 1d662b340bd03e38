import numpy as np
import pytest

import pcmlax as px
from pcmlax.errors import ConfigError, KernelSingularError, NonFiniteError


def brute_contraction(C, A):
    """Triple-loop oracle for the contraction matrix."""
    n = len(A)
    out = np.zeros((n, n))
    for l in range(n):
        for m in range(n):
            for k in range(n):
                out[l, m] += C[k, l, m] * A[k]
    return out


class TestValidate:
    def test_u1_preset_valid(self):
        assert px.validate_algebra(px.u1(4)) == []

    def test_su2_preset_valid(self, su2):
        assert px.validate_algebra(su2) == []

    def test_flipped_sign_reports_jacobi_at_triple(self, su2):
        C = np.array(su2.structure_constants)
        C[0, 1, 2] = -1.0  # single-entry flip
        bad = px.LieAlgebraData(dim=3, structure_constants=C, trace_metric=np.eye(3))
        problems = px.validate_algebra(bad)
        jac = [p for p in problems if "jacobi" in p]
        assert jac and "1" in jac[0] and "2" in jac[0]
        assert any("antisymmetry" in p for p in problems)

    def test_consistent_pair_flip_is_ad_invariance_only(self, su2):
        # flipping both orientations of one epsilon entry gives sl(2,R):
        # a valid Lie algebra, but the identity metric stops being invariant
        C = np.array(su2.structure_constants)
        C[0, 1, 2] = -1.0
        C[0, 2, 1] = 1.0
        problems = px.validate_algebra(
            px.LieAlgebraData(dim=3, structure_constants=C, trace_metric=np.eye(3)))
        assert problems == ["trace metric not ad-invariant: max symmetric part 2.000e+00"]

    def test_antisymmetry_violation_located(self, su2):
        C = np.array(su2.structure_constants)
        C[0, 1, 2] = -1.0  # only one orientation -> antisymmetry breaks
        bad = px.LieAlgebraData(dim=3, structure_constants=C, trace_metric=np.eye(3))
        problems = px.validate_algebra(bad)
        assert any("antisymmetry" in p and "(0,1,2)" in p.replace(" ", "") for p in problems)

    def test_singular_trace_metric(self):
        data = px.LieAlgebraData(dim=2, structure_constants=np.zeros((2, 2, 2)),
                                 trace_metric=np.array([[1.0, 1.0], [1.0, 1.0]]))
        assert any("ill-conditioned" in p or "singular" in p
                   for p in px.validate_algebra(data))

    def test_bad_representation(self, su2):
        rep = np.array(su2.representation)
        rep[0] = rep[0] + 0.1
        data = px.LieAlgebraData(dim=3, structure_constants=su2.structure_constants,
                                 trace_metric=np.eye(3), representation=rep)
        assert any("representation" in p for p in px.validate_algebra(data))

    def test_su2_rep_bracket_tight(self, su2):
        R = su2.representation
        C = su2.structure_constants
        comm = np.einsum("lab,nbc->lnac", R, R) - np.einsum("nab,lbc->lnac", R, R)
        target = np.einsum("kln,kac->lnac", C, R)
        assert np.abs(comm - target).max() <= 1e-14


class TestContraction:
    def test_abelian_zero(self):
        alg = px.u1(3)
        cm = px.contraction_matrix(alg, np.array([0.3, -1.2, 7.0]))
        assert np.all(cm.values == 0.0)

    def test_su2_axis_matches_oracle_and_literal(self, su2):
        a = 0.37
        A = np.array([0.0, 0.0, a])
        got = px.contraction_matrix(su2, A).values
        assert np.allclose(got, brute_contraction(su2.structure_constants, A), atol=0)
        expected = np.array([[0.0, a, 0.0], [-a, 0.0, 0.0], [0.0, 0.0, 0.0]])
        assert np.allclose(got, expected, atol=0)

    def test_zero_vector(self, su2):
        assert np.all(px.contraction_matrix(su2, np.zeros(3)).values == 0.0)

    def test_linear_in_A(self, su2):
        rng = np.random.default_rng(11)
        for _ in range(20):
            A, B = rng.normal(size=3), rng.normal(size=3)
            al, be = rng.normal(), rng.normal()
            lhs = px.contraction_matrix(su2, al * A + be * B).values
            rhs = (al * px.contraction_matrix(su2, A).values
                   + be * px.contraction_matrix(su2, B).values)
            assert np.abs(lhs - rhs).max() <= 1e-12 * max(1.0, np.abs(rhs).max())

    def test_batched(self, su2):
        rng = np.random.default_rng(3)
        A = rng.normal(size=(4, 5, 3))
        got = px.contraction_matrix(su2, A).values
        assert got.shape == (4, 5, 3, 3)
        assert np.allclose(got[2, 1], brute_contraction(su2.structure_constants, A[2, 1]))

    def test_dim_mismatch(self, su2):
        with pytest.raises(ConfigError):
            px.contraction_matrix(su2, np.zeros(4))


class TestSpectral:
    def test_su2_radius(self, su2):
        for a in (0.2, 0.7, 1.5):
            sm = px.spectral_matrix(su2, np.array([0.0, 0.0, a]))
            assert np.allclose(sm.values, px.contraction_matrix(su2, [0, 0, a]).values)
            assert abs(float(sm.spectral_radius) - a) <= 0.02 * a

    def test_zero_field(self, su2):
        sm = px.spectral_matrix(su2, np.zeros(3))
        assert np.all(sm.values == 0.0)
        assert float(sm.spectral_radius) == 0.0

    def test_abelian(self):
        sm = px.spectral_matrix(px.u1(2), np.array([1.0, 2.0]))
        assert np.all(sm.values == 0.0)

    def test_roundtrip_lam_T(self, su2):
        rng = np.random.default_rng(8)
        A = rng.normal(size=(6, 3))
        lam = px.spectral_matrix(su2, A).values
        cmat = px.contraction_matrix(su2, A).values
        err = np.abs(lam @ su2.trace_metric - cmat).max()
        assert err <= 1e-12 * max(1.0, np.abs(cmat).max())


class TestKernel:
    def test_zero_field_gives_Tinv(self):
        T = np.diag([2.0, 0.5, 1.0])
        alg = px.LieAlgebraData(dim=3, structure_constants=px.su2().structure_constants,
                                trace_metric=T)
        K = px.solve_kernel(alg, np.zeros(3)).values
        assert np.allclose(K, np.linalg.inv(T), atol=1e-14)

    def test_su2_axis_diag(self, su2):
        a = 0.9
        K = px.solve_kernel(su2, np.array([0.0, 0.0, a])).values
        expected = np.diag([1 / (1 + a * a), 1 / (1 + a * a), 1.0])
        assert np.abs(K - expected).max() <= 1e-14

    def test_inverse_identity(self, su2):
        rng = np.random.default_rng(4)
        A = rng.normal(size=(10, 3))
        lam = px.spectral_matrix(su2, A).values
        K = px.solve_kernel(su2, A).values
        B = np.broadcast_to(np.eye(3), lam.shape) - lam @ lam
        resid = B @ (su2.trace_metric @ K) - np.eye(3)
        assert np.abs(resid).max() <= 1e-10

    def test_singular_kernel_raises_with_sites(self):
        # affine 2d algebra with an indefinite metric makes lam real:
        # lam = Cmat diag(1,-1) is symmetric with eigenvalues +-a, singular at a = 1
        C = np.zeros((2, 2, 2))
        C[0, 0, 1] = 1.0
        C[0, 1, 0] = -1.0
        alg = px.LieAlgebraData(dim=2, structure_constants=C,
                                trace_metric=np.diag([1.0, -1.0]))
        with pytest.raises(KernelSingularError) as err:
            px.solve_kernel(alg, np.array([[1.0, 0.0], [0.2, 0.0]]))
        assert (0,) == tuple(err.value.sites[0])[:1]


class TestMatrixExp:
    def test_zero(self):
        assert np.allclose(px.matrix_exp(np.zeros((3, 3))), np.eye(3), atol=0)

    def test_rotation_closed_form(self):
        th = np.pi / 2
        X = np.array([[0.0, -th], [th, 0.0]])
        assert np.abs(px.matrix_exp(X) - np.array([[0.0, -1.0], [1.0, 0.0]])).max() <= 1e-14

    def test_nilpotent(self):
        X = np.array([[0.0, 3.0], [0.0, 0.0]])
        assert np.allclose(px.matrix_exp(X), np.eye(2) + X, atol=1e-15)

    def test_inverse_property(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            X = rng.normal(size=(4, 4))
            X *= 5.0 / np.abs(X).sum(axis=-1).max()
            E = px.matrix_exp(X) @ px.matrix_exp(-X)
            assert np.abs(E - np.eye(4)).max() <= 1e-12

    def test_against_scipy(self):
        from scipy.linalg import expm
        rng = np.random.default_rng(6)
        for norm in (0.5, 3.0, 10.0):
            X = rng.normal(size=(5, 5))
            X *= norm / np.abs(X).sum(axis=-1).max()
            ref = expm(X)
            assert np.abs(px.matrix_exp(X) - ref).max() <= 1e-13 * np.abs(ref).max()
        Z = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        assert np.abs(px.matrix_exp(Z) - expm(Z)).max() <= 1e-12 * np.abs(expm(Z)).max()

    def test_batched_matches_loop(self):
        rng = np.random.default_rng(12)
        X = rng.normal(size=(4, 2, 3, 3))
        batched = px.matrix_exp(X)
        for idx in np.ndindex(4, 2):
            assert np.allclose(batched[idx], px.matrix_exp(X[idx]), atol=1e-13)

    def test_nonfinite_rejected(self):
        with pytest.raises(NonFiniteError):
            px.matrix_exp(np.array([[np.inf, 0.0], [0.0, 0.0]]))


class TestConfig:
    def test_preset(self):
        alg = px.algebra_from_config({"preset": "su2"})
        assert alg.name == "su2" and alg.dim == 3

    def test_sparse_triplets_and_killing(self, su2):
        trips = []
        C = su2.structure_constants
        for k in range(3):
            for l in range(3):
                for m in range(3):
                    if C[k, l, m] != 0:
                        trips.append([k, l, m, float(C[k, l, m])])
        alg = px.algebra_from_config({
            "name": "su2-explicit", "dim": 3,
            "structure_constants": trips, "trace_metric": "killing",
        })
        assert np.allclose(alg.trace_metric, -2.0 * np.eye(3), atol=1e-14)
        assert px.validate_algebra(alg) == []

    def test_representation_pairs(self, su2):
        rep = np.stack([su2.representation.real, su2.representation.imag], axis=-1)
        alg = px.algebra_from_config({
            "dim": 3,
            "structure_constants": [[0, 1, 2, 1.0], [0, 2, 1, -1.0],
                                    [1, 2, 0, 1.0], [1, 0, 2, -1.0],
                                    [2, 0, 1, 1.0], [2, 1, 0, -1.0]],
            "trace_metric": "identity",
            "representation": rep.tolist(),
        })
        assert np.allclose(alg.representation, su2.representation)

    def test_corrupt_structure_constants_rejected(self):
        with pytest.raises(ConfigError):
            px.algebra_from_config({
                "dim": 3,
                "structure_constants": [[0, 1, 2, 1.0]],  # missing antisymmetric partner
                "trace_metric": "identity",
            })

    def test_unknown_preset(self):
        with pytest.raises(ConfigError):
            px.algebra_from_config({"preset": "e8"})
