import math

import numpy as np
import pytest

import framequant as fq
from framequant.errors import VariationBoundError
from framequant.frames import serpentine_order, serpentine_variation_limit


def direct_frame_operator(vectors):
    """Independent accumulation of sum_i e_i e_i^T, one rank-one term at a time."""
    d = vectors.shape[1]
    s = np.zeros((d, d))
    for row in vectors:
        s += np.outer(row, row)
    return s


def standard_basis(d):
    return fq.Frame(d=d, N=d, vectors=np.eye(d))


class TestHarmonicFrame:
    @pytest.mark.parametrize("d,N", [(4, 4), (3, 6), (2, 2), (8, 32), (5, 17), (6, 6), (256, 512)])
    def test_operator_matches_direct_summation(self, d, N):
        frame = fq.harmonic_frame(d, N)
        s = direct_frame_operator(frame.vectors)
        assert np.max(np.abs(s - (N / d) * np.eye(d))) < 1e-9

    def test_d4_n4_is_orthonormal(self):
        frame = fq.harmonic_frame(4, 4)
        assert np.max(np.abs(fq.frame_operator(frame) - np.eye(4))) < 1e-9

    def test_d3_n6_operator_is_twice_identity(self):
        frame = fq.harmonic_frame(3, 6)
        assert np.max(np.abs(fq.frame_operator(frame) - 2.0 * np.eye(3))) < 1e-9

    @pytest.mark.parametrize("d,N", [(1, 4), (3, 2), (0, 0), (2, 1)])
    def test_bad_arguments(self, d, N):
        with pytest.raises(ValueError):
            fq.harmonic_frame(d, N)

    def test_unit_norms(self):
        frame = fq.harmonic_frame(7, 40)
        assert np.allclose(np.linalg.norm(frame.vectors, axis=1), 1.0, atol=1e-12)


class TestFrameType:
    def test_rejects_non_unit_rows(self):
        with pytest.raises(ValueError, match="unit norm"):
            fq.Frame(d=2, N=2, vectors=0.9 * np.eye(2))

    def test_rejects_too_few_vectors(self):
        with pytest.raises(ValueError, match="at least"):
            fq.Frame(d=3, N=2, vectors=np.eye(3)[:2])

    def test_vectors_immutable(self):
        frame = standard_basis(3)
        with pytest.raises(ValueError):
            frame.vectors[0, 0] = 2.0


class TestFrameOperator:
    def test_standard_basis(self):
        assert np.array_equal(fq.frame_operator(standard_basis(3)), np.eye(3))

    def test_repeated_rows_count_multiplicities(self):
        vecs = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.0, 1.0]])
        assert np.allclose(fq.frame_operator(vecs), np.diag([2.0, 2.0]))


class TestAnalysisSynthesis:
    def test_zero_vector(self):
        frame = fq.harmonic_frame(3, 6)
        assert np.array_equal(fq.analysis(frame, np.zeros(3)), np.zeros(6))

    def test_standard_basis_coeffs(self):
        assert np.array_equal(
            fq.analysis(standard_basis(3), np.array([1.0, 2.0, 3.0])), [1.0, 2.0, 3.0]
        )

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            fq.analysis(standard_basis(3), np.zeros(4))
        with pytest.raises(ValueError):
            fq.synthesis_dual(standard_basis(3), np.zeros(4))

    def test_zero_coeffs_give_zero(self):
        frame = fq.harmonic_frame(4, 9)
        out = fq.synthesis_dual(frame, np.zeros(9))
        assert np.allclose(out, 0.0)

    def test_self_dual_basis(self):
        c = np.array([0.5, 0.5, -0.5])
        out = fq.synthesis_dual(standard_basis(3), c, fq.Permutation.identity(3))
        assert np.allclose(out, c, atol=1e-14)

    @pytest.mark.parametrize("d,N", [(3, 6), (5, 11), (8, 64), (16, 33)])
    def test_round_trip_tight(self, d, N, rng):
        frame = fq.harmonic_frame(d, N)
        for _ in range(5):
            x = rng.normal(size=d)
            back = fq.synthesis_dual(frame, fq.analysis(frame, x), fq.Permutation.identity(N))
            assert np.linalg.norm(back - x) <= 1e-10 * np.linalg.norm(x)

    def test_round_trip_general_frame(self, rng):
        # non-tight frame: random unit rows, reconstruction must still be exact
        vecs = rng.normal(size=(12, 4))
        vecs /= np.linalg.norm(vecs, axis=1, keepdims=True)
        frame = fq.Frame(d=4, N=12, vectors=vecs)
        x = rng.normal(size=4)
        back = fq.synthesis_dual(frame, fq.analysis(frame, x))
        assert np.linalg.norm(back - x) <= 1e-10 * np.linalg.norm(x)

    def test_tight_expansion_identity(self, rng):
        frame = fq.harmonic_frame(6, 20)
        x = rng.normal(size=6)
        rebuilt = (6 / 20) * fq.analysis(frame, x) @ frame.vectors
        assert np.linalg.norm(rebuilt - x) <= 1e-10 * np.linalg.norm(x)

    def test_coefficients_bounded_by_norm(self, rng):
        frame = fq.harmonic_frame(5, 13)
        x = rng.normal(size=5)
        assert np.all(np.abs(fq.analysis(frame, x)) <= np.linalg.norm(x) + 1e-12)


class TestFrameVariation:
    def test_single_vector_is_zero(self):
        vecs = np.ones((1, 3)) / math.sqrt(3)
        assert fq.frame_variation(vecs) == 0.0

    def test_standard_basis_identity_order(self):
        got = fq.frame_variation(standard_basis(3), fq.Permutation.identity(3))
        assert got == pytest.approx(2.0 * math.sqrt(2.0), abs=1e-14)

    def test_harmonic_3_64_below_uniform_limit(self):
        frame = fq.harmonic_frame(3, 64)
        v = fq.frame_variation(frame, fq.Permutation.identity(64))
        assert v <= 2.0 * math.pi * 4.0 / math.sqrt(3.0)

    def test_permutation_changes_path(self):
        frame = fq.harmonic_frame(2, 8)
        shuffled = fq.Permutation(np.array([0, 4, 1, 5, 2, 6, 3, 7]))
        assert fq.frame_variation(frame, shuffled) > fq.frame_variation(frame)


class TestPermutation:
    def test_rejects_non_bijection(self):
        with pytest.raises(ValueError):
            fq.Permutation(np.array([0, 0, 1]))

    def test_identity_flag(self):
        assert fq.Permutation.identity(5).is_identity
        assert not fq.Permutation(np.array([1, 0])).is_identity


class TestFindPermutation:
    def test_harmonic_gets_identity(self):
        perm = fq.find_permutation(fq.harmonic_frame(8, 256))
        assert perm.is_identity and perm.provenance == "identity"

    def test_serpentine_meets_limit_on_random_sphere(self, rng):
        vecs = rng.normal(size=(512, 3))
        vecs /= np.linalg.norm(vecs, axis=1, keepdims=True)
        frame = fq.Frame(d=3, N=512, vectors=vecs)
        perm = fq.find_permutation(frame)
        assert perm.provenance == "serpentine"
        sigma = fq.frame_variation(frame, perm)
        limit = serpentine_variation_limit(3, 512)
        assert sigma <= limit
        assert limit == pytest.approx(4 * math.sqrt(6) * (512 ** (2 / 3) - 1))

    def test_d2_runs_without_limit_assertion(self, rng):
        vecs = rng.normal(size=(16, 2))
        vecs /= np.linalg.norm(vecs, axis=1, keepdims=True)
        perm = fq.find_permutation(fq.Frame(d=2, N=16, vectors=vecs))
        assert sorted(perm.order) == list(range(16))

    def test_variation_bound_error_carries_values(self):
        err = VariationBoundError(10.0, 5.0)
        assert err.achieved == 10.0 and err.limit == 5.0

    def test_serpentine_order_is_permutation(self, rng):
        pts = rng.normal(size=(100, 4))
        order = serpentine_order(pts)
        assert sorted(order) == list(range(100))


class TestVerifyFuntf:
    def test_harmonic_256_512(self):
        check = fq.verify_funtf(fq.harmonic_frame(256, 512), tol=1e-9)
        assert check.unit_norm_ok and check.tight_ok
        assert check.frame_bound_A == 2.0

    def test_standard_basis(self):
        check = fq.verify_funtf(standard_basis(3), tol=1e-12)
        assert check.unit_norm_ok and check.tight_ok and check.frame_bound_A == 1.0

    def test_scaled_rows_fail_unit_norm(self):
        check = fq.verify_funtf(0.9 * np.eye(3), tol=1e-9)
        assert not check.unit_norm_ok

    def test_non_tight_detected(self, rng):
        vecs = rng.normal(size=(5, 3))
        vecs /= np.linalg.norm(vecs, axis=1, keepdims=True)
        check = fq.verify_funtf(vecs, tol=1e-9)
        assert check.unit_norm_ok and not check.tight_ok and check.frame_bound_A is None

    def test_tol_must_be_positive(self):
        with pytest.raises(ValueError):
            fq.verify_funtf(np.eye(3), tol=0.0)


def test_operator_eigenvalues_between_empirical_frame_bounds(rng):
    # eigenvalues of S sit inside the observed min/max of sum |<x,e_i>|^2 / ||x||^2
    vecs = rng.normal(size=(9, 4))
    vecs /= np.linalg.norm(vecs, axis=1, keepdims=True)
    frame = fq.Frame(d=4, N=9, vectors=vecs)
    eig = np.linalg.eigvalsh(fq.frame_operator(frame))
    xs = rng.normal(size=(2000, 4))
    ratios = np.sum((xs @ vecs.T) ** 2, axis=1) / np.sum(xs**2, axis=1)
    assert ratios.min() >= eig.min() - 1e-9
    assert ratios.max() <= eig.max() + 1e-9
    assert eig.min() > 0
