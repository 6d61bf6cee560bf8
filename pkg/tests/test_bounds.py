import math

import numpy as np
import pytest

import framequant as fq
from conftest import random_fnn, random_residual
from framequant.bounds import GENERAL, HARMONIC, SAME_WIDTH, SIMPLIFIED
from framequant.errors import ConstraintViolation


class TestOperatorNorm:
    def test_identity(self):
        assert fq.operator_norm(np.eye(3)) == pytest.approx(1.0, abs=1e-10)

    def test_diagonal(self):
        assert fq.operator_norm(np.diag([3.0, 1.0])) == pytest.approx(3.0, abs=1e-9)

    def test_zero_matrix(self):
        assert fq.operator_norm(np.zeros((4, 2))) == 0.0

    def test_matches_svd_oracle(self, rng):
        for _ in range(30):
            w = rng.normal(size=(rng.integers(2, 20), rng.integers(2, 20)))
            top = np.linalg.svd(w, compute_uv=False)[0]
            assert abs(fq.operator_norm(w) - top) <= 1e-8 * top

    def test_rectangular_5x4(self, rng):
        w = rng.normal(size=(5, 4))
        assert fq.operator_norm(w) == pytest.approx(np.linalg.svd(w, compute_uv=False)[0], rel=1e-8)


class TestVectorBound:
    def test_standard_basis_value(self):
        got = fq.vector_bound(1.0, 3, 3, 2 * math.sqrt(2))
        assert got == pytest.approx(0.5 * (2 * math.sqrt(2) + 1))

    def test_zero_variation_decays_in_n(self):
        values = [fq.vector_bound(1.0, 3, n, 0.0) for n in (4, 8, 16, 1024)]
        assert all(a > b for a, b in zip(values, values[1:]))
        assert values[-1] < 0.01

    def test_generic_value(self):
        got = fq.vector_bound_generic(1.0, 3, 64)
        variation = 4 * math.sqrt(6) * (64 ** (2 / 3) - 1)
        assert got == pytest.approx((3 / 128) * (variation + 1))
        assert got == pytest.approx(3.468, abs=5e-4)

    def test_generic_needs_d3(self):
        with pytest.raises(ValueError):
            fq.vector_bound_generic(1.0, 2, 8)

    def test_invalid_dimensions(self):
        with pytest.raises(ValueError):
            fq.vector_bound(1.0, 3, 2, 1.0)


class TestMatrixBound:
    def test_general_value(self):
        assert fq.matrix_bound(1.0, 3, 3, 8) == pytest.approx(2 * math.sqrt(2) * 9 * 0.5)

    def test_linear_in_delta(self):
        base = fq.matrix_bound(1.0, 4, 6, 32)
        for delta in (0.5, 0.25, 1 / 16):
            assert fq.matrix_bound(delta, 4, 6, 32) == pytest.approx(delta * base)

    def test_nonincreasing_in_n(self):
        values = [fq.matrix_bound(0.5, 5, 5, n) for n in (8, 16, 64, 256, 4096)]
        assert all(a >= b for a, b in zip(values, values[1:]))

    def test_harmonic_value(self):
        got = fq.matrix_bound(0.25, 256, 256, 512, harmonic=True)
        expected = (0.25 * 256 * 16 / 1024) * (2 * math.pi * 257 / math.sqrt(3) + 1)
        assert got == pytest.approx(expected)

    def test_narrow_matrix_rejected(self):
        with pytest.raises(ConstraintViolation, match="3"):
            fq.matrix_bound(1.0, 2, 5, 8)


class TestQuantizedNormBound:
    def test_zero_sigma(self):
        s = fq.LayerStats(m_in=4, m_out=4, sigma=0.0, delta=0.5, K=2, N=16, variation=1.0)
        assert fq.quantized_norm_bound(s) == pytest.approx(fq.matrix_bound(0.5, 4, 4, 16))

    def test_zero_delta_leaves_sigma(self):
        s = fq.LayerStats(m_in=4, m_out=4, sigma=2.5, delta=0.0, K=2, N=16, variation=1.0)
        assert fq.quantized_norm_bound(s) == pytest.approx(2.5)

    def test_dominates_measured_norm(self, rng):
        for _ in range(10):
            W = rng.normal(size=(8, 8))
            frame = fq.harmonic_frame(8, 64)
            K, delta = fq.select_K_delta(W, delta=0.25)
            qm = fq.quantize_matrix(W, frame, fq.Permutation.identity(64), K, delta)
            stats = fq.layer_stats(W, qm)
            measured = np.linalg.svd(fq.reconstruct(qm), compute_uv=False)[0]
            assert measured <= fq.quantized_norm_bound(stats) + 1e-9


def _stats(widths, sigma, delta, N, harmonic=True):
    out = []
    for m_in, m_out in zip(widths, widths[1:]):
        out.append(
            fq.LayerStats(
                m_in=m_in, m_out=m_out, sigma=sigma, delta=delta, K=8, N=N,
                variation=0.0, harmonic=harmonic,
            )
        )
    return out


class TestFnnBound:
    def test_single_layer_degenerates_to_matrix_bound(self):
        stats = _stats([6, 4], sigma=1.5, delta=0.25, N=32)
        got = fq.fnn_bound(stats, 1.0, 2.0, GENERAL)
        assert got == pytest.approx(2.0 * fq.matrix_bound(0.25, 4, 6, 32))

    def test_zero_input_norm(self):
        stats = _stats([6, 6, 6], sigma=1.0, delta=0.25, N=32)
        for variant in (GENERAL, HARMONIC, SAME_WIDTH):
            assert fq.fnn_bound(stats, 1.0, 0.0, variant) == 0.0

    def test_general_dominates_measured(self, rng):
        model = random_fnn(rng, [8, 8, 8])
        qmodel = fq.quantize_network(model, fq.uniform_config(model, 64, delta=1 / 8))
        X = rng.normal(size=(500, 8))
        reports = fq.network_bound_reports(model, qmodel, X)
        for report in reports:
            assert report.empirical <= report.theoretical + 1e-9

    def test_same_width_at_least_general(self, rng):
        # with per-layer terms replaced by the uniform M-based term, the
        # same-width form can only grow
        model = random_fnn(rng, [10, 8, 8, 6])
        qmodel = fq.quantize_network(model, fq.uniform_config(model, 32, delta=0.25))
        X = rng.normal(size=(50, 10))
        reports = {r.bound_kind: r for r in fq.network_bound_reports(model, qmodel, X)}
        assert "fnn_same_width" in reports
        assert reports["fnn_general"].theoretical <= reports["fnn_same_width"].theoretical + 1e-9

    def test_harmonic_scales_inverse_n_single_layer(self):
        one = fq.fnn_bound(_stats([5, 4], 1.0, 0.25, 64), 1.0, 1.0, HARMONIC)
        two = fq.fnn_bound(_stats([5, 4], 1.0, 0.25, 128), 1.0, 1.0, HARMONIC)
        assert one == pytest.approx(2.0 * two)

    def test_harmonic_requires_harmonic_stats(self):
        stats = _stats([5, 4], 1.0, 0.25, 64, harmonic=False)
        with pytest.raises(ConstraintViolation, match="harmonic"):
            fq.fnn_bound(stats, 1.0, 1.0, HARMONIC)

    def test_same_width_requires_shared_parameters(self):
        mixed = _stats([6, 6], 1.0, 0.25, 32) + _stats([6, 6], 1.0, 0.25, 64)
        with pytest.raises(ConstraintViolation, match="shared"):
            fq.fnn_bound(mixed, 1.0, 1.0, SAME_WIDTH)

    def test_simplified_threshold_named(self):
        stats = _stats([6, 6, 6], sigma=0.1, delta=0.5, N=36)
        with pytest.raises(ConstraintViolation, match="N >="):
            fq.fnn_bound(stats, 1.0, 1.0, SIMPLIFIED)

    def test_simplified_threshold_survives_huge_dimensions(self):
        # the raw threshold power overflows float64 at this size; the check must
        # still classify the variant as inapplicable instead of crashing
        stats = _stats([784, 256, 256], sigma=1.0, delta=1 / 16, N=512)
        with pytest.raises(ConstraintViolation, match="N >="):
            fq.fnn_bound(stats, 1.0, 1.0, SIMPLIFIED)

    def test_bounds_reports_on_wide_network(self, rng):
        # 784-wide first layer: end-to-end report generation must not overflow
        model = random_fnn(rng, [784, 16, 10], scale=0.5)
        qmodel = fq.quantize_network(model, fq.uniform_config(model, 64, delta=0.25))
        X = rng.normal(size=(20, 784))
        reports = fq.network_bound_reports(model, qmodel, X)
        assert any(r.bound_kind == "fnn_general" for r in reports)
        for r in reports:
            assert r.empirical <= r.theoretical + 1e-9

    def test_simplified_value_when_applicable(self):
        # large sigma makes the threshold trivial
        stats = _stats([4, 4, 4], sigma=100.0, delta=1 / 16, N=16)
        got = fq.fnn_bound(stats, 1.0, 1.0, SIMPLIFIED)
        err = math.sqrt(2) * (1 / 16) * 16 * 16 ** (-1 / 4)
        expected = err * 100.0 ** 2 * (2 / 100.0 + 4 / 100.0)
        assert got == pytest.approx(expected)

    def test_zero_sigma_blocks_simplified(self):
        stats = _stats([4, 4], sigma=0.0, delta=0.5, N=16)
        with pytest.raises(ConstraintViolation, match="zero operator norm"):
            fq.fnn_bound(stats, 1.0, 1.0, SIMPLIFIED)


class TestResidualBound:
    def test_single_block_is_a_times_norm(self):
        lam, delta, k, N = 1.2, 0.25, 6, 64
        c = delta * k * math.sqrt(k * (k + 3))
        a = 4 * c * (c + lam) * N ** (-1 / k)
        assert fq.residual_bound(lam, delta, k, N, 1, 3.0) == pytest.approx(3.0 * a)

    def test_zero_delta_gives_zero(self):
        assert fq.residual_bound(1.0, 0.0, 6, 64, 3, 5.0) == 0.0

    def test_dominates_measured(self, rng):
        model = random_residual(rng, 8, 2, scale=0.6)
        qmodel = fq.quantize_network(model, fq.uniform_config(model, 64, delta=1 / 8))
        X = rng.normal(size=(300, 8))
        (report,) = fq.network_bound_reports(model, qmodel, X)
        assert report.bound_kind == "residual"
        assert report.empirical <= report.theoretical + 1e-9

    def test_width_precondition(self):
        with pytest.raises(ConstraintViolation):
            fq.residual_bound(1.0, 0.5, 2, 8, 1, 1.0)

    def test_nonincreasing_in_n(self):
        vals = [fq.residual_bound(1.0, 0.5, 5, n, 2, 1.0) for n in (8, 32, 128, 1024)]
        assert all(a >= b for a, b in zip(vals, vals[1:]))


class TestEmpiricalError:
    def test_exact_reconstruction_sentinel(self):
        frame = fq.Frame(d=3, N=3, vectors=np.eye(3))
        W = np.full((3, 3), 0.25)  # entries are alphabet values for K=2, delta=0.5
        cfg = fq.QuantizationConfig(
            (fq.LayerQuantConfig(frame=frame, K=2, delta=0.5, mode="column"),)
        )
        model = fq.Model((fq.AffineLayer(W),))
        qmodel = fq.quantize_network(model, cfg)
        assert np.allclose(qmodel.to_model().layers[0].W, W)
        err = fq.empirical_error(model, qmodel, np.eye(3))
        assert err.worst == 0.0 and err.mean == 0.0
        assert err.tightness == -math.inf

    def test_zero_dataset_biasless(self, rng):
        model = random_fnn(rng, [5, 4])
        qmodel = fq.quantize_network(model, fq.uniform_config(model, 16, delta=0.5))
        err = fq.empirical_error(model, qmodel, np.zeros((1, 5)))
        assert err.worst == 0.0 and err.mean == 0.0

    def test_empty_dataset_rejected(self, rng):
        model = random_fnn(rng, [5, 4])
        qmodel = fq.quantize_network(model, fq.uniform_config(model, 16, delta=0.5))
        with pytest.raises(ValueError, match="empty"):
            fq.empirical_error(model, qmodel, np.zeros((0, 5)))

    def test_tightness_stable_under_n_doubling(self, rng):
        model = random_fnn(rng, [12, 12, 12], scale=0.8)
        X = rng.normal(size=(300, 12))
        values = []
        for n in (128, 256):
            qmodel = fq.quantize_network(model, fq.uniform_config(model, n, delta=1 / 8))
            values.append(fq.empirical_error(model, qmodel, X).tightness)
        assert abs(values[0] - values[1]) < 1.0


class TestDominationSuite:
    """Randomized domination checks for every closed form, at volume."""

    def test_matrix_error_and_norm_guarantees_in_bulk(self, rng):
        frames = {}
        violations = 0
        for _ in range(1000):
            d = int(rng.integers(3, 13))
            n = int(rng.integers(d, 65))
            if (d, n) not in frames:
                frames[(d, n)] = fq.harmonic_frame(d, n)
            frame = frames[(d, n)]
            cols = int(rng.integers(1, 9))
            W = rng.normal(size=(d, cols))
            delta = float(rng.choice([1 / 16, 1 / 8, 1 / 4, 1 / 2]))
            K, _ = fq.select_K_delta(W, delta=delta)
            qm = fq.quantize_matrix(W, frame, fq.Permutation.identity(n), K, delta)
            stats = fq.layer_stats(W, qm, sigma=np.linalg.svd(W, compute_uv=False)[0])
            recon = fq.reconstruct(qm)
            err = np.linalg.svd(W - recon, compute_uv=False)[0]
            qnorm = np.linalg.svd(recon, compute_uv=False)[0]
            if err > fq.matrix_bound(delta, stats.m_out, stats.m_in, n) + 1e-9:
                violations += 1
            if err > fq.matrix_bound(delta, stats.m_out, stats.m_in, n, harmonic=True) + 1e-9:
                violations += 1
            if qnorm > fq.quantized_norm_bound(stats) + 1e-9:
                violations += 1
        assert violations == 0

    def test_same_width_simplified_and_harmonic_variants_in_bulk(self, rng):
        checked = {"fnn_same_width": 0, "fnn_simplified": 0, "fnn_harmonic": 0}
        for _ in range(30):
            h = int(rng.integers(6, 17))
            m0, mn = int(rng.integers(4, 17)), int(rng.integers(3, 9))
            n_layers = int(rng.integers(2, 5))
            widths = [m0] + [h] * (n_layers - 1) + [mn]
            scale = float(rng.uniform(0.8, 3.0))  # larger norms help the simplified threshold
            layers = tuple(
                fq.AffineLayer(scale * rng.normal(size=(dout, din)) / np.sqrt(din))
                for din, dout in zip(widths, widths[1:])
            )
            model = fq.Model(layers)
            n = int(rng.choice([64, 128, 256]))
            delta = float(rng.choice([1 / 16, 1 / 8]))
            qmodel = fq.quantize_network(model, fq.uniform_config(model, n, delta=delta))
            X = rng.normal(size=(1000, m0))
            for report in fq.network_bound_reports(model, qmodel, X):
                assert report.empirical <= report.theoretical + 1e-9, report.bound_kind
                if report.bound_kind in checked:
                    checked[report.bound_kind] += 1000
        assert checked["fnn_same_width"] >= 1000
        assert checked["fnn_harmonic"] >= 1000
        # the simplified form needs its N threshold; scaled norms make it reachable
        assert checked["fnn_simplified"] >= 1000


class TestMonotonicity:
    def test_vector_generic_nonincreasing_in_n(self):
        vals = [fq.vector_bound_generic(0.5, 4, n) for n in (8, 16, 64, 512, 4096)]
        assert all(a >= b for a, b in zip(vals, vals[1:]))

    def test_fnn_bound_nonincreasing_in_n_and_linear_in_delta(self):
        def bound(n, delta):
            return fq.fnn_bound(_stats([6, 6, 6], 1.2, delta, n), 1.0, 1.0, GENERAL)

        ns = (8, 32, 128, 1024)
        assert all(bound(a, 0.5) >= bound(b, 0.5) for a, b in zip(ns, ns[1:]))
        # each layer term is linear in delta, and products mix layers, so
        # compare single-layer nets for exact linearity
        one = fq.fnn_bound(_stats([6, 6], 1.2, 1.0, 64), 1.0, 1.0, GENERAL)
        for delta in (0.5, 0.25, 1 / 16):
            got = fq.fnn_bound(_stats([6, 6], 1.2, delta, 64), 1.0, 1.0, GENERAL)
            assert got == pytest.approx(delta * one)

    def test_residual_linear_in_input_norm(self):
        assert fq.residual_bound(1.0, 0.5, 5, 32, 2, 4.0) == pytest.approx(
            4.0 * fq.residual_bound(1.0, 0.5, 5, 32, 2, 1.0)
        )


class TestBoundReport:
    def test_holds_flag(self):
        assert fq.BoundReport("x", 1.0, 0.5, 1.0).holds
        assert not fq.BoundReport("x", 1.0, 2.0, 1.0).holds

    def test_as_dict_merges_params(self):
        d = fq.BoundReport("x", 1.0, 0.5, 2.0, {"N": 64}).as_dict()
        assert d["N"] == 64 and d["bound_kind"] == "x"

    def test_mixed_architecture_reports_residual_segment(self, rng):
        model = fq.Model(
            (
                fq.AffineLayer(rng.normal(size=(6, 9)) / 3),
                fq.ResidualBlock(rng.normal(size=(6, 6)) / 3, rng.normal(size=(6, 6)) / 3),
                fq.AffineLayer(rng.normal(size=(3, 6)) / 3),
            )
        )
        qmodel = fq.quantize_network(model, fq.uniform_config(model, 32, delta=0.25))
        X = rng.normal(size=(40, 9))
        reports = fq.network_bound_reports(model, qmodel, X)
        kinds = {r.bound_kind for r in reports}
        assert "residual" in kinds
        for r in reports:
            assert r.empirical <= r.theoretical + 1e-9
