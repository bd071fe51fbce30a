"""Scatter computation and the CVA / LDA / PCA fitting and projection core.

All fits are deterministic: the eigensolver's sign convention plus fixed
summation orders make repeated runs on identical input bit-identical. The
supervised fits consume a bands-x-points design matrix; the unsupervised PCA
treats every pixel of a stack region as a sample.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .annotations import DesignMatrix
from .eigen import DEFAULT_RIDGE, sign_normalize, solve_gen_eig_sym
from .errors import DataError, NumericError
from .rendering import ScorePlane
from .stack import SpectralStack

METHOD_CVA = "cva"
METHOD_LDA = "lda"
METHOD_PCA = "pca"
METHOD_PCA_UNSUPERVISED = "pca_unsupervised"
SUPERVISED_METHODS = (METHOD_CVA, METHOD_LDA, METHOD_PCA)
ALL_METHODS = SUPERVISED_METHODS + (METHOD_PCA_UNSUPERVISED,)

MODEL_FORMAT = "undertext-projection-model"
MODEL_VERSION = 1

# Row chunks used when sweeping whole stacks; fixed so results never depend
# on available memory.
_CHUNK_ROWS = 64


@dataclass(frozen=True)
class ScatterPair:
    """Pooled within-class and between-class scatter of a labeled matrix.

    within = sum_c sum_{j in c} (x_j - m_c)(x_j - m_c)^T
    between = sum_c n_c (m_c - m)(m_c - m)^T, m the grand mean over all points.
    """

    within: np.ndarray
    between: np.ndarray
    class_means: np.ndarray
    class_ids: tuple[int, ...]
    counts: np.ndarray
    grand_mean: np.ndarray


@dataclass(frozen=True)
class ProjectionModel:
    """A fitted linear projection.

    ``coefficients`` holds one direction per column (bands x components).
    ``std`` is None for methods fitted on raw values; otherwise samples are
    standardized as (x - mean) / std before the dot product.
    ``training_scores`` (components x points) are the projected training
    columns, used by the training-range rescale; absent for unsupervised fits.
    """

    method: str
    mean: np.ndarray
    std: np.ndarray | None
    coefficients: np.ndarray
    eigenvalues: np.ndarray
    training_scores: np.ndarray | None = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.method not in ALL_METHODS:
            raise DataError(f"unknown method {self.method!r}")
        for arr in (self.mean, self.std, self.coefficients, self.eigenvalues,
                    self.training_scores):
            if arr is not None:
                arr.setflags(write=False)

    @property
    def band_count(self) -> int:
        return int(self.coefficients.shape[0])

    @property
    def component_count(self) -> int:
        return int(self.coefficients.shape[1])

    def apply(self, samples: np.ndarray) -> np.ndarray:
        """Project (n, B) samples onto all components -> (n, K) scores."""
        samples = np.asarray(samples, dtype=np.float64)
        centered = samples - self.mean
        if self.std is not None:
            centered = centered / self.std
        return centered @ self.coefficients

    def to_dict(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "method": self.method,
            "bands": self.band_count,
            "components": self.component_count,
            "mean": self.mean.tolist(),
            "std": None if self.std is None else self.std.tolist(),
            "eigenvalues": self.eigenvalues.tolist(),
            "coefficients": self.coefficients.tolist(),
            "training_scores": (
                None if self.training_scores is None
                else self.training_scores.tolist()
            ),
            "provenance": self.provenance,
        }

    def save(self, path: str | Path) -> None:
        """Write the model as JSON. Floats serialize via repr, which
        round-trips binary64 exactly."""
        Path(path).write_text(
            json.dumps(self.to_dict(), indent=1) + "\n", encoding="utf-8"
        )

    @classmethod
    def from_dict(cls, doc: dict) -> "ProjectionModel":
        if doc.get("format") != MODEL_FORMAT:
            raise DataError(f"not a projection model document: {doc.get('format')!r}")
        if doc.get("version") != MODEL_VERSION:
            raise DataError(f"unsupported model version {doc.get('version')!r}")
        std = doc["std"]
        scores = doc["training_scores"]
        return cls(
            method=doc["method"],
            mean=np.asarray(doc["mean"], dtype=np.float64),
            std=None if std is None else np.asarray(std, dtype=np.float64),
            coefficients=np.asarray(doc["coefficients"], dtype=np.float64),
            eigenvalues=np.asarray(doc["eigenvalues"], dtype=np.float64),
            training_scores=(
                None if scores is None else np.asarray(scores, dtype=np.float64)
            ),
            provenance=doc.get("provenance", {}),
        )

    @classmethod
    def load(cls, path: str | Path) -> "ProjectionModel":
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: not a model file: {exc}") from exc
        return cls.from_dict(doc)


def standardize(dm: DesignMatrix) -> tuple[DesignMatrix, np.ndarray, np.ndarray]:
    """Recentre each band row to mean 0 and sample standard deviation 1.

    The divisor is N-1. Constant rows are centred only and their std recorded
    as 1 so downstream division is a no-op. Requires N >= 2.
    """
    if dm.point_count < 2:
        raise DataError("standardization needs at least 2 points")
    mean = dm.values.mean(axis=1)
    centered = dm.values - mean[:, None]
    var = (centered * centered).sum(axis=1) / (dm.point_count - 1)
    std = np.sqrt(var)
    std[std == 0.0] = 1.0
    return (
        DesignMatrix(centered / std[:, None], np.array(dm.labels), dm.class_names),
        mean,
        std,
    )


def compute_scatter(dm: DesignMatrix) -> ScatterPair:
    """Pooled within-class and between-class scatter matrices.

    Classes are the label values actually present; at least two are required.
    Both outputs are explicitly symmetrized so the eigensolver's symmetry
    check never trips on BLAS round-off.
    """
    class_ids = [int(c) for c in np.unique(dm.labels)]
    if len(class_ids) < 2:
        raise DataError(
            f"scatter needs at least 2 classes with points, got {len(class_ids)}"
        )
    b = dm.band_count
    within = np.zeros((b, b))
    between = np.zeros((b, b))
    grand_mean = dm.values.mean(axis=1)
    means = np.empty((len(class_ids), b))
    counts = np.empty(len(class_ids), dtype=np.intp)
    for i, cid in enumerate(class_ids):
        cols = dm.values[:, dm.labels == cid]
        m_c = cols.mean(axis=1)
        means[i] = m_c
        counts[i] = cols.shape[1]
        dev = cols - m_c[:, None]
        within += dev @ dev.T
        gap = m_c - grand_mean
        between += counts[i] * np.outer(gap, gap)
    within = (within + within.T) / 2.0
    between = (between + between.T) / 2.0
    return ScatterPair(within, between, means, tuple(class_ids), counts, grand_mean)


def _top_k(requested: int | None, band_count: int) -> int:
    k = band_count if requested is None else int(requested)
    if not (1 <= k <= band_count):
        raise DataError(f"requested {k} components from {band_count} bands")
    return k


def fit_cva(
    dm: DesignMatrix,
    k: int | None = None,
    ridge: float = DEFAULT_RIDGE,
    provenance: dict | None = None,
) -> ProjectionModel:
    """Canonical variates: maximize between-class over within-class scatter.

    Operates on raw (unstandardized) values. Only the first
    (class count - 1) eigenvalues rise above the ridge floor, but all k
    directions are kept: every projected plane may still carry usable
    contrast for inspection.
    """
    sp = compute_scatter(dm)
    sol = solve_gen_eig_sym(sp.between, sp.within, ridge)
    k = _top_k(k, dm.band_count)
    coeffs = np.ascontiguousarray(sol.eigenvectors[:, :k])
    scores = coeffs.T @ (dm.values - sp.grand_mean[:, None])
    return ProjectionModel(
        method=METHOD_CVA,
        mean=sp.grand_mean,
        std=None,
        coefficients=coeffs,
        eigenvalues=np.ascontiguousarray(sol.eigenvalues[:k]),
        training_scores=scores,
        provenance=provenance or {},
    )


def fit_lda(
    dm: DesignMatrix,
    k: int | None = None,
    ridge: float = DEFAULT_RIDGE,
    provenance: dict | None = None,
) -> ProjectionModel:
    """Two-class discriminant: the CVA core on standardized input."""
    present = np.unique(dm.labels)
    if len(present) != 2:
        raise DataError(f"LDA requires exactly 2 classes, got {len(present)}")
    sdm, mean, std = standardize(dm)
    core = fit_cva(sdm, k=k, ridge=ridge)
    return ProjectionModel(
        method=METHOD_LDA,
        mean=mean,
        std=std,
        coefficients=core.coefficients,
        eigenvalues=core.eigenvalues,
        training_scores=core.training_scores,
        provenance=provenance or {},
    )


def _pca_from_covariance(
    cov: np.ndarray, k: int
) -> tuple[np.ndarray, np.ndarray]:
    cov = (cov + cov.T) / 2.0
    eigenvalues, vectors = np.linalg.eigh(cov)  # ascending
    eigenvalues = np.ascontiguousarray(eigenvalues[::-1][:k])
    vectors = sign_normalize(np.ascontiguousarray(vectors[:, ::-1][:, :k]))
    return eigenvalues, vectors


def fit_pca(
    dm: DesignMatrix,
    k: int | None = None,
    provenance: dict | None = None,
) -> ProjectionModel:
    """Principal components of the standardized design matrix.

    Labels are ignored. Components are orthonormal, sorted by descending
    eigenvalue of the (N-1)-divisor covariance, sign-normalized.
    """
    sdm, mean, std = standardize(dm)
    k = _top_k(k, dm.band_count)
    cov = (sdm.values @ sdm.values.T) / (dm.point_count - 1)
    eigenvalues, coeffs = _pca_from_covariance(cov, k)
    return ProjectionModel(
        method=METHOD_PCA,
        mean=mean,
        std=std,
        coefficients=coeffs,
        eigenvalues=eigenvalues,
        training_scores=coeffs.T @ sdm.values,
        provenance=provenance or {},
    )


def fit_pca_unsupervised(
    stack: SpectralStack,
    region: tuple[int, int, int, int] | None = None,
    k: int | None = None,
    provenance: dict | None = None,
) -> ProjectionModel:
    """PCA over every pixel of a stack region; no annotations involved.

    The covariance is accumulated in fixed row chunks so memory stays bounded
    on full-page stacks and results do not depend on image size. No training
    scores are recorded: rescaling such models uses the full-range mode.
    """
    if region is None:
        x0, y0, w, h = 0, 0, stack.width, stack.height
    else:
        x0, y0, w, h = region
        if w <= 0 or h <= 0:
            raise DataError(f"empty region {region}")
        if x0 < 0 or y0 < 0 or x0 + w > stack.width or y0 + h > stack.height:
            raise DataError(
                f"region {region} outside {stack.width}x{stack.height} stack"
            )
    n = w * h
    if n < 2:
        raise DataError("unsupervised PCA needs at least 2 pixels")
    k = _top_k(k, stack.band_count)

    planes = stack.planes[:, y0 : y0 + h, x0 : x0 + w]
    b = stack.band_count
    mean = np.empty(b)
    for i in range(b):
        mean[i] = planes[i].astype(np.float64).mean()
    scatter = np.zeros((b, b))
    for r0 in range(0, h, _CHUNK_ROWS):
        chunk = planes[:, r0 : r0 + _CHUNK_ROWS, :].reshape(b, -1).astype(np.float64)
        chunk -= mean[:, None]
        scatter += chunk @ chunk.T
    std = np.sqrt(np.diag(scatter) / (n - 1))
    std[std == 0.0] = 1.0
    cov = scatter / (n - 1) / np.outer(std, std)
    eigenvalues, coeffs = _pca_from_covariance(cov, k)
    return ProjectionModel(
        method=METHOD_PCA_UNSUPERVISED,
        mean=mean,
        std=std,
        coefficients=coeffs,
        eigenvalues=eigenvalues,
        training_scores=None,
        provenance=provenance or {},
    )


def fit(
    method: str,
    dm: DesignMatrix | None = None,
    stack: SpectralStack | None = None,
    region: tuple[int, int, int, int] | None = None,
    k: int | None = None,
    ridge: float = DEFAULT_RIDGE,
    provenance: dict | None = None,
) -> ProjectionModel:
    """Dispatch a fit by method tag (CLI and service entry point)."""
    if method == METHOD_CVA:
        return fit_cva(dm, k=k, ridge=ridge, provenance=provenance)
    if method == METHOD_LDA:
        return fit_lda(dm, k=k, ridge=ridge, provenance=provenance)
    if method == METHOD_PCA:
        return fit_pca(dm, k=k, provenance=provenance)
    if method == METHOD_PCA_UNSUPERVISED:
        return fit_pca_unsupervised(stack, region=region, k=k, provenance=provenance)
    raise DataError(f"unknown method {method!r}; expected one of {ALL_METHODS}")


def _project_rows(
    planes: np.ndarray,
    model: ProjectionModel,
    components: list[int],
    out: np.ndarray,
    r0: int,
    r1: int,
) -> None:
    b = planes.shape[0]
    chunk = planes[:, r0:r1, :].astype(np.float64)
    chunk -= model.mean[:, None, None]
    if model.std is not None:
        chunk /= model.std[:, None, None]
    for slot, k in enumerate(components):
        acc = np.zeros_like(chunk[0])
        for i in range(b):  # fixed band order; never reassociated
            acc += model.coefficients[i, k] * chunk[i]
        out[slot, r0:r1, :] = acc


def project_stack(
    stack: SpectralStack,
    model: ProjectionModel,
    components: list[int] | None = None,
    workers: int = 1,
) -> list[ScorePlane]:
    """Project every pixel onto the model's coefficient columns.

    Returns one floating-point score plane per requested component (all of
    them by default), NOT yet rescaled. The per-pixel dot product always runs
    in band order, so parallel execution (``workers`` > 1 splits row chunks
    across threads) is bit-identical to the sequential sweep.
    """
    if stack.band_count != model.band_count:
        raise DataError(
            f"stack has {stack.band_count} bands but model expects "
            f"{model.band_count}"
        )
    fitted_normalized = model.provenance.get("normalized_input")
    if fitted_normalized is not None and fitted_normalized != stack.normalized:
        raise DataError(
            "model was fitted on normalized data"
            if fitted_normalized
            else "model was fitted on unnormalized data"
        )
    if components is None:
        components = list(range(model.component_count))
    for k in components:
        if not (0 <= k < model.component_count):
            raise DataError(f"component {k} out of range")

    out = np.empty((len(components), stack.height, stack.width))
    starts = list(range(0, stack.height, _CHUNK_ROWS))
    if workers <= 1:
        for r0 in starts:
            _project_rows(stack.planes, model, components, out,
                          r0, min(r0 + _CHUNK_ROWS, stack.height))
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(
                    _project_rows, stack.planes, model, components, out,
                    r0, min(r0 + _CHUNK_ROWS, stack.height),
                )
                for r0 in starts
            ]
            for f in futures:
                f.result()
    return [ScorePlane(out[i]) for i in range(len(components))]
