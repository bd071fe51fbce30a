"""Estimator wrappers: sklearn API conformance and parity with the
functional fits."""

import numpy as np
import pytest
from sklearn.base import clone

from oracles import random_labeled
from undertext.annotations import DesignMatrix
from undertext.estimators import (
    CanonicalVariates,
    LinearDiscriminant,
    PrincipalComponents,
)
from undertext.projection import fit_cva, fit_lda, fit_pca


def _xy(seed, bands=5, classes=3, per_class=20):
    rng = np.random.default_rng(seed)
    values, labels = random_labeled(rng, bands, classes, per_class)
    return values.T.copy(), labels.copy()


def _dm(values, labels):
    # same layout the estimators build internally, so parity is bit-exact
    names = tuple(str(c) for c in np.unique(labels))
    return DesignMatrix(np.ascontiguousarray(values, dtype=np.float64),
                        np.asarray(labels, dtype=np.intp), names)


class TestApiConformance:
    @pytest.mark.parametrize("est", [
        CanonicalVariates(), LinearDiscriminant(), PrincipalComponents(),
    ])
    def test_get_params_round_trip(self, est):
        params = est.get_params()
        rebuilt = type(est)(**params)
        assert rebuilt.get_params() == params

    def test_clone_preserves_params(self):
        est = CanonicalVariates(n_components=2, ridge=1e-6)
        cloned = clone(est)
        assert cloned.n_components == 2
        assert cloned.ridge == 1e-6

    def test_set_params_chains(self):
        est = PrincipalComponents().set_params(n_components=3)
        assert est.n_components == 3

    def test_unfitted_transform_raises(self):
        x, _ = _xy(0)
        with pytest.raises(Exception):
            CanonicalVariates().transform(x)

    def test_feature_count_enforced(self):
        x, y = _xy(1)
        est = CanonicalVariates().fit(x, y)
        with pytest.raises(ValueError):
            est.transform(x[:, :3])


class TestCanonicalVariates:
    def test_matches_functional_fit(self):
        x, y = _xy(2)
        est = CanonicalVariates().fit(x, y)
        model = fit_cva(_dm(x.T, y))
        assert np.array_equal(est.coefficients_, model.coefficients)
        assert np.array_equal(est.eigenvalues_, model.eigenvalues)

    def test_transform_matches_model_apply(self):
        x, y = _xy(3)
        est = CanonicalVariates().fit(x, y)
        assert np.array_equal(est.transform(x), est.model_.apply(x))

    def test_n_components(self):
        x, y = _xy(4, bands=6, classes=4)
        est = CanonicalVariates(n_components=2).fit(x, y)
        assert est.transform(x).shape == (x.shape[0], 2)

    def test_classes_recorded(self):
        x, y = _xy(5)
        est = CanonicalVariates().fit(x, y)
        assert list(est.classes_) == [0, 1, 2]

    def test_string_labels_accepted(self):
        x, y = _xy(6, classes=2)
        names = np.array(["parchment", "underwriting"])[y]
        est = CanonicalVariates().fit(x, names)
        assert list(est.classes_) == ["parchment", "underwriting"]


class TestLinearDiscriminant:
    def test_matches_functional_fit(self):
        x, y = _xy(7, classes=2)
        est = LinearDiscriminant().fit(x, y)
        model = fit_lda(_dm(x.T, y))
        assert np.array_equal(est.coefficients_, model.coefficients)
        assert np.array_equal(est.scale_, model.std)

    def test_rejects_three_classes(self):
        x, y = _xy(8, classes=3)
        with pytest.raises(ValueError):
            LinearDiscriminant().fit(x, y)


class TestPrincipalComponents:
    def test_matches_functional_fit(self):
        x, _ = _xy(9)
        est = PrincipalComponents().fit(x)
        labels = np.zeros(x.shape[0], dtype=np.intp)
        model = fit_pca(DesignMatrix(x.T.copy(), labels, ("all",)))
        assert np.array_equal(est.coefficients_, model.coefficients)
        assert np.array_equal(est.eigenvalues_, model.eigenvalues)

    def test_y_optional(self):
        x, y = _xy(10)
        a = PrincipalComponents().fit(x)
        b = PrincipalComponents().fit(x, y)
        assert np.array_equal(a.coefficients_, b.coefficients_)

    def test_fit_transform_shape(self):
        x, _ = _xy(11, bands=7)
        out = PrincipalComponents(n_components=3).fit_transform(x)
        assert out.shape == (x.shape[0], 3)
