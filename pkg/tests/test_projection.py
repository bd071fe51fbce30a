"""Scatter, fits, stack projection, and model serialization."""

import numpy as np
import pytest

from oracles import random_labeled, rayleigh
from undertext.annotations import DesignMatrix
from undertext.errors import DataError
from undertext.projection import (
    ProjectionModel,
    compute_scatter,
    fit_cva,
    fit_lda,
    fit_pca,
    fit_pca_unsupervised,
    project_stack,
    standardize,
)
from undertext.stack import BandMeta, SpectralStack


def _dm(values, labels, names=None):
    values = np.asarray(values, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.intp)
    if names is None:
        names = tuple(f"c{i}" for i in range(int(labels.max()) + 1))
    return DesignMatrix(values, labels, names)


def _stack_from_planes(planes, normalized=True):
    planes = np.asarray(planes, dtype=np.uint8)
    metas = tuple(BandMeta(i, 400.0 + i, "x") for i in range(planes.shape[0]))
    return SpectralStack(metas, planes, 8, normalized=normalized)


class TestStandardize:
    def test_hand_example(self):
        out, mean, std = standardize(_dm([[1.0, 3.0]], [0, 0], ("a",)))
        assert mean.tolist() == [2.0]
        assert std.tolist() == [np.sqrt(2.0)]
        assert np.allclose(out.values, [[-1 / np.sqrt(2), 1 / np.sqrt(2)]])

    def test_constant_row_centred_std_one(self):
        out, mean, std = standardize(_dm([[5.0, 5.0, 5.0]], [0, 0, 0], ("a",)))
        assert out.values.tolist() == [[0.0, 0.0, 0.0]]
        assert std.tolist() == [1.0]

    def test_idempotent_on_standardized_input(self):
        rng = np.random.default_rng(0)
        dm = _dm(rng.normal(size=(3, 40)), [0] * 40, ("a",))
        once, _, _ = standardize(dm)
        twice, mean, std = standardize(once)
        assert np.allclose(twice.values, once.values, atol=1e-12)
        assert np.allclose(mean, 0.0, atol=1e-12)
        assert np.allclose(std, 1.0, atol=1e-12)

    def test_needs_two_points(self):
        with pytest.raises(DataError):
            standardize(_dm([[1.0]], [0], ("a",)))


class TestScatter:
    def test_hand_oracle(self):
        dm = _dm([[0.0, 2.0, 10.0, 12.0]], [0, 0, 1, 1])
        sp = compute_scatter(dm)
        assert sp.within.tolist() == [[4.0]]
        assert sp.between.tolist() == [[100.0]]
        assert sp.grand_mean.tolist() == [6.0]
        assert sp.class_means.tolist() == [[1.0], [11.0]]

    def test_singleton_classes_zero_within(self):
        sp = compute_scatter(_dm([[1.0, 5.0], [2.0, 3.0]], [0, 1]))
        assert np.allclose(sp.within, 0.0)

    def test_identical_means_zero_between(self):
        dm = _dm([[1.0, 3.0, 1.0, 3.0]], [0, 0, 1, 1])
        sp = compute_scatter(dm)
        assert np.allclose(sp.between, 0.0)

    def test_needs_two_classes(self):
        with pytest.raises(DataError):
            compute_scatter(_dm([[1.0, 2.0]], [0, 0], ("a",)))

    def test_symmetric_and_psd(self):
        rng = np.random.default_rng(1)
        values, labels = random_labeled(rng, 6, 3, 20)
        sp = compute_scatter(_dm(values, labels))
        assert np.array_equal(sp.within, sp.within.T)
        assert np.array_equal(sp.between, sp.between.T)
        assert np.linalg.eigvalsh(sp.within).min() >= -1e-9


class TestFitCva:
    def test_separable_clouds_recover_axis(self):
        rng = np.random.default_rng(2)
        a = rng.normal(size=(2, 4000))
        b = np.array([[10.0], [0.0]]) + rng.normal(size=(2, 4000))
        dm = _dm(np.concatenate([a, b], axis=1), [0] * 4000 + [1] * 4000)
        model = fit_cva(dm)
        v = model.coefficients[:, 0]
        cosine = abs(v[0]) / np.linalg.norm(v)
        assert cosine >= 0.999

    def test_first_direction_beats_random_quotient(self):
        rng = np.random.default_rng(3)
        values, labels = random_labeled(rng, 5, 3, 30)
        dm = _dm(values, labels)
        sp = compute_scatter(dm)
        model = fit_cva(dm)
        top = rayleigh(model.coefficients[:, 0], sp.between, sp.within)
        for _ in range(10_000):
            v = rng.normal(size=5)
            assert rayleigh(v, sp.between, sp.within) <= top * (1 + 1e-9)

    def test_identical_classes_all_eigenvalues_near_zero(self):
        pts = np.array([[0.0, 1.0, 2.0], [5.0, 6.0, 7.0]])
        dm = _dm(np.concatenate([pts, pts], axis=1), [0, 0, 0, 1, 1, 1])
        model = fit_cva(dm)
        scale = np.trace(compute_scatter(dm).within)
        assert (np.abs(model.eigenvalues) <= 1e-10 * scale).all()

    def test_training_scores_consistent_with_apply(self):
        rng = np.random.default_rng(4)
        values, labels = random_labeled(rng, 4, 3, 15)
        dm = _dm(values, labels)
        model = fit_cva(dm)
        assert np.array_equal(model.apply(values.T), model.training_scores.T)

    def test_k_limits_components(self):
        rng = np.random.default_rng(5)
        values, labels = random_labeled(rng, 6, 4, 10)
        model = fit_cva(_dm(values, labels), k=2)
        assert model.coefficients.shape == (6, 2)
        assert model.eigenvalues.shape == (2,)
        with pytest.raises(DataError):
            fit_cva(_dm(values, labels), k=7)

    def test_eigenvalues_descending(self):
        rng = np.random.default_rng(6)
        values, labels = random_labeled(rng, 8, 5, 12)
        model = fit_cva(_dm(values, labels))
        assert (np.diff(model.eigenvalues) <= 1e-12).all()


class TestFitLda:
    def test_requires_exactly_two_classes(self):
        rng = np.random.default_rng(7)
        values, labels = random_labeled(rng, 3, 3, 10)
        with pytest.raises(DataError, match="exactly 2"):
            fit_lda(_dm(values, labels))

    def test_equals_cva_on_standardized_input(self):
        rng = np.random.default_rng(8)
        for _ in range(10):
            values, labels = random_labeled(rng, 5, 2, 25)
            dm = _dm(values, labels)
            lda = fit_lda(dm)
            sdm, _, _ = standardize(dm)
            cva = fit_cva(sdm)
            assert np.array_equal(lda.coefficients, cva.coefficients)
            assert np.array_equal(lda.eigenvalues, cva.eigenvalues)

    def test_records_standardization(self):
        rng = np.random.default_rng(9)
        values, labels = random_labeled(rng, 4, 2, 20)
        model = fit_lda(_dm(values, labels))
        assert model.std is not None
        assert np.allclose(model.mean, values.mean(axis=1))

    def test_one_dimensional_input(self):
        dm = _dm([[0.0, 1.0, 10.0, 11.0]], [0, 0, 1, 1])
        model = fit_lda(dm)
        assert model.coefficients.shape == (1, 1)
        assert model.coefficients[0, 0] > 0


class TestFitPca:
    def test_recovers_dominant_direction(self):
        rng = np.random.default_rng(10)
        t = rng.normal(size=400) * 5.0
        pts = np.stack([t, t]) + rng.normal(size=(2, 400)) * 0.1
        model = fit_pca(_dm(pts, [0] * 400, ("all",)))
        v = model.coefficients[:, 0]
        cosine = abs(v @ np.array([1.0, 1.0]) / np.sqrt(2.0))
        assert cosine >= 0.999

    def test_orthonormal_basis_and_variance_conservation(self):
        rng = np.random.default_rng(11)
        values = rng.normal(size=(6, 80))
        model = fit_pca(_dm(values, [0] * 80, ("all",)))
        c = model.coefficients
        assert np.allclose(c.T @ c, np.eye(6), atol=1e-10)
        # standardized covariance has trace B
        assert np.sum(model.eigenvalues) == pytest.approx(6.0, rel=1e-8)

    def test_matches_correlation_eigensystem(self):
        rng = np.random.default_rng(12)
        values = rng.normal(size=(5, 60)) * rng.uniform(1, 4, size=(5, 1))
        model = fit_pca(_dm(values, [0] * 60, ("all",)))
        corr = np.corrcoef(values)
        want = np.linalg.eigvalsh(corr)[::-1]
        assert np.allclose(model.eigenvalues, want, atol=1e-10)

    def test_ignores_labels(self):
        rng = np.random.default_rng(13)
        values = rng.normal(size=(4, 40))
        m1 = fit_pca(_dm(values, [0] * 40, ("a",)))
        m2 = fit_pca(_dm(values, [0] * 20 + [1] * 20, ("a", "b")))
        assert np.array_equal(m1.coefficients, m2.coefficients)


class TestFitPcaUnsupervised:
    def test_component_count(self, small_stack):
        model = fit_pca_unsupervised(small_stack, k=5)
        assert model.coefficients.shape == (6, 5)
        assert model.training_scores is None
        assert model.method == "pca_unsupervised"

    def test_matches_supervised_pca_on_same_pixels(self, small_stack):
        region = (8, 8, 16, 16)
        model = fit_pca_unsupervised(small_stack, region=region)
        x0, y0, w, h = region
        pixels = small_stack.planes[:, y0:y0 + h, x0:x0 + w].reshape(6, -1)
        dm = _dm(pixels.astype(np.float64), [0] * (w * h), ("all",))
        ref = fit_pca(dm)
        assert np.allclose(model.eigenvalues, ref.eigenvalues, atol=1e-9)
        assert np.allclose(model.coefficients, ref.coefficients, atol=1e-8)

    def test_single_pixel_region_rejected(self, small_stack):
        with pytest.raises(DataError):
            fit_pca_unsupervised(small_stack, region=(0, 0, 1, 1))

    def test_region_bounds_checked(self, small_stack):
        with pytest.raises(DataError):
            fit_pca_unsupervised(small_stack, region=(90, 90, 16, 16))

    def test_equal_bands_rank_one(self):
        plane = np.arange(64, dtype=np.uint8).reshape(8, 8)
        stack = _stack_from_planes(np.stack([plane, plane, plane]))
        model = fit_pca_unsupervised(stack)
        assert model.eigenvalues[0] == pytest.approx(3.0, rel=1e-8)
        assert np.allclose(model.eigenvalues[1:], 0.0, atol=1e-9)


class TestProjectStack:
    def test_identity_model_returns_bands(self):
        rng = np.random.default_rng(14)
        planes = rng.integers(0, 255, size=(3, 12, 9), dtype=np.uint8)
        stack = _stack_from_planes(planes)
        model = ProjectionModel(
            method="cva", mean=np.zeros(3), std=None,
            coefficients=np.eye(3), eigenvalues=np.ones(3),
        )
        out = project_stack(stack, model)
        for b in range(3):
            assert np.array_equal(out[b].values, planes[b].astype(np.float64))

    def test_difference_column(self):
        planes = np.stack([
            np.full((4, 4), 9, dtype=np.uint8),
            np.full((4, 4), 3, dtype=np.uint8),
        ])
        model = ProjectionModel(
            method="cva", mean=np.zeros(2), std=None,
            coefficients=np.array([[1.0], [-1.0]]), eigenvalues=np.ones(1),
        )
        out = project_stack(_stack_from_planes(planes), model)
        assert np.all(out[0].values == 6.0)

    def test_linearity_under_doubling(self):
        rng = np.random.default_rng(15)
        planes = rng.integers(0, 127, size=(2, 6, 6), dtype=np.uint8)
        model = ProjectionModel(
            method="cva", mean=np.zeros(2), std=None,
            coefficients=np.array([[0.5, 1.0], [2.0, -1.0]]),
            eigenvalues=np.ones(2),
        )
        one = project_stack(_stack_from_planes(planes), model)
        two = project_stack(_stack_from_planes(planes * 2), model)
        for k in range(2):
            assert np.allclose(two[k].values, 2.0 * one[k].values, atol=0)

    def test_workers_bit_identical(self, small_stack, small_page):
        from undertext.annotations import assemble_matrix

        model = fit_cva(assemble_matrix(small_stack, small_page.training))
        seq = project_stack(small_stack, model, workers=1)
        par = project_stack(small_stack, model, workers=4)
        for a, b in zip(seq, par):
            assert np.array_equal(a.values, b.values)

    def test_band_count_mismatch(self, small_stack):
        model = ProjectionModel(
            method="cva", mean=np.zeros(4), std=None,
            coefficients=np.eye(4), eigenvalues=np.ones(4),
        )
        with pytest.raises(DataError, match="bands"):
            project_stack(small_stack, model)

    def test_normalization_flag_mismatch(self, small_page):
        model = ProjectionModel(
            method="cva", mean=np.zeros(6), std=None,
            coefficients=np.eye(6), eigenvalues=np.ones(6),
            provenance={"normalized_input": True},
        )
        with pytest.raises(DataError, match="normalized"):
            project_stack(small_page.stack, model)

    def test_plane_variance_follows_eigenvalue_order(self):
        # A stack that is exactly the training multiset laid out as an
        # image: score variance is then proportional to 1 + eigenvalue.
        rng = np.random.default_rng(16)
        values = rng.integers(0, 255, size=(5, 64)).astype(np.float64)
        labels = np.array(([0] * 16) + ([1] * 16) + ([2] * 16) + ([3] * 16),
                          dtype=np.intp)
        dm = _dm(values, labels)
        model = fit_cva(dm)
        stack = _stack_from_planes(values.reshape(5, 8, 8).astype(np.uint8))
        planes = project_stack(stack, model)
        variances = [p.values.var() for p in planes]
        assert (np.diff(variances) <= 1e-9 * max(variances)).all()


class TestModelSerialization:
    def _model(self):
        rng = np.random.default_rng(17)
        values, labels = random_labeled(rng, 4, 3, 12)
        return fit_cva(_dm(values, labels), provenance={"manifest_sha256": "ab"})

    def test_round_trip_exact(self, tmp_path):
        model = self._model()
        path = tmp_path / "model.json"
        model.save(path)
        again = ProjectionModel.load(path)
        assert again.method == model.method
        assert np.array_equal(again.mean, model.mean)
        assert np.array_equal(again.coefficients, model.coefficients)
        assert np.array_equal(again.eigenvalues, model.eigenvalues)
        assert np.array_equal(again.training_scores, model.training_scores)
        assert again.std is None
        assert again.provenance == model.provenance

    def test_save_is_deterministic(self, tmp_path):
        model = self._model()
        model.save(tmp_path / "a.json")
        model.save(tmp_path / "b.json")
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()

    def test_version_checked(self, tmp_path):
        model = self._model()
        doc = model.to_dict()
        doc["version"] = 99
        with pytest.raises(DataError, match="version"):
            ProjectionModel.from_dict(doc)
        doc = model.to_dict()
        doc["format"] = "something-else"
        with pytest.raises(DataError, match="model"):
            ProjectionModel.from_dict(doc)

    def test_lda_round_trip_keeps_std(self, tmp_path):
        rng = np.random.default_rng(18)
        values, labels = random_labeled(rng, 3, 2, 10)
        model = fit_lda(_dm(values, labels))
        path = tmp_path / "lda.json"
        model.save(path)
        again = ProjectionModel.load(path)
        assert np.array_equal(again.std, model.std)
