"""Scikit-learn style estimators over the projection core.

These wrappers follow the fit/transform contract: X is (n_samples,
n_features) with one spectral band per feature, y holds class labels for the
supervised methods. The functional core works on bands-x-points matrices, so
the wrappers transpose, validate, and encode labels, then delegate.

    >>> cva = CanonicalVariates(n_components=3).fit(X, y)
    >>> scores = cva.transform(X)

The fitted ``model_`` is the same serializable ProjectionModel the pipeline
uses, so an estimator fitted here can drive the command-line renderer.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .annotations import DesignMatrix
from .eigen import DEFAULT_RIDGE
from .errors import DataError
from .projection import ProjectionModel, fit_cva, fit_lda, fit_pca


class _ProjectionEstimator(TransformerMixin, BaseEstimator):
    """Shared plumbing: validation, label encoding, transform."""

    def __init__(self, n_components=None):
        self.n_components = n_components

    def _encode(self, X, y) -> DesignMatrix:
        X, y = check_X_y(X, y, dtype=np.float64)
        self.classes_, codes = np.unique(y, return_inverse=True)
        self.n_features_in_ = X.shape[1]
        return DesignMatrix(
            np.ascontiguousarray(X.T),
            codes.astype(np.intp),
            tuple(str(c) for c in self.classes_),
        )

    def _adopt(self, model: ProjectionModel) -> "_ProjectionEstimator":
        self.model_ = model
        self.coefficients_ = model.coefficients
        self.eigenvalues_ = model.eigenvalues
        self.mean_ = model.mean
        self.scale_ = model.std
        return self

    def transform(self, X) -> np.ndarray:
        """Project samples onto the fitted directions -> (n, k) scores."""
        check_is_fitted(self, "model_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, fitted with {self.n_features_in_}"
            )
        return self.model_.apply(X)


class CanonicalVariates(_ProjectionEstimator):
    """Supervised projection maximizing between-class over within-class
    scatter, fitted on raw band values (no standardization).

    With C classes only the first C-1 eigenvalues are significant, but up to
    n_features directions are available for inspection.
    """

    def __init__(self, n_components=None, ridge=DEFAULT_RIDGE):
        super().__init__(n_components)
        self.ridge = ridge

    def fit(self, X, y):
        dm = self._encode(X, y)
        return self._adopt(fit_cva(dm, k=self.n_components, ridge=self.ridge))


class LinearDiscriminant(_ProjectionEstimator):
    """Two-class discriminant: the same scatter quotient, on standardized
    inputs. Requires exactly two classes in y."""

    def __init__(self, n_components=None, ridge=DEFAULT_RIDGE):
        super().__init__(n_components)
        self.ridge = ridge

    def fit(self, X, y):
        dm = self._encode(X, y)
        try:
            model = fit_lda(dm, k=self.n_components, ridge=self.ridge)
        except DataError as exc:
            # sklearn convention: bad y is a ValueError
            raise ValueError(str(exc)) from exc
        return self._adopt(model)


class PrincipalComponents(_ProjectionEstimator):
    """Principal components of the standardized samples; y is ignored."""

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        self.n_features_in_ = X.shape[1]
        dm = DesignMatrix(
            np.ascontiguousarray(X.T),
            np.zeros(X.shape[0], dtype=np.intp),
            ("all",),
        )
        return self._adopt(fit_pca(dm, k=self.n_components))
