"""Davies-Bouldin and Dunn cluster-validity indices for rendered images.

Scores quantify how well an enhancement separates undertext pixels from
parchment: lower Davies-Bouldin and higher Dunn mean better separation. The
Dunn variant here takes the inter-cluster distance as the centroid gap minus
both scatters, so it can go negative when clusters overlap; negative values
are legal output, not an error.

Both indices are invariant under shifting and positive scaling of the pixel
values, so they compare renderings across rescale modes fairly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, NumericError


@dataclass(frozen=True)
class Cluster:
    """A sample of d-dimensional points (one row each) with a norm order."""

    points: np.ndarray
    p_norm: float = 2.0

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise DataError("cluster needs a non-empty (points, dims) array")
        if not np.isfinite(pts).all():
            raise DataError("cluster points must be finite")
        if self.p_norm < 1:
            raise DataError(f"norm order must be >= 1, got {self.p_norm}")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def size(self) -> int:
        return int(self.points.shape[0])

    @property
    def dim(self) -> int:
        return int(self.points.shape[1])

    @property
    def centroid(self) -> np.ndarray:
        return self.points.mean(axis=0)


@dataclass(frozen=True)
class IndexReport:
    """Scatters, centroid distance, and both indices for one image.

    ``dunn`` is None when its denominator degenerates (both clusters are
    singletons or duplicated points); ``dunn_error`` then says why, so batch
    evaluation can report the row instead of aborting.
    """

    s_under: float
    s_parchment: float
    m: float
    db: float
    dunn: float | None
    dunn_error: str | None = None

    def csv_line(self, image: str) -> str:
        dunn = "" if self.dunn is None else repr(self.dunn)
        return (
            f"{image},{self.s_under!r},{self.s_parchment!r},{self.m!r},"
            f"{self.db!r},{dunn}"
        )


CSV_HEADER = "image,S_i,S_j,M,db,dunn"


def scatter(cluster: Cluster) -> float:
    """Mean p-norm distance of members from their centroid."""
    gaps = cluster.points - cluster.centroid
    return float(
        np.linalg.norm(gaps, ord=cluster.p_norm, axis=1).sum() / cluster.size
    )


def centroid_distance(ci: Cluster, cj: Cluster) -> float:
    """p-norm distance between the two centroids."""
    if ci.dim != cj.dim:
        raise DataError(f"dimension mismatch: {ci.dim} vs {cj.dim}")
    if ci.p_norm != cj.p_norm:
        raise DataError(f"norm mismatch: {ci.p_norm} vs {cj.p_norm}")
    return float(np.linalg.norm(ci.centroid - cj.centroid, ord=ci.p_norm))


def db_index(ci: Cluster, cj: Cluster) -> float:
    """(S_i + S_j) / M; lower is better separation."""
    m = centroid_distance(ci, cj)
    if m == 0.0:
        raise NumericError("clusters indistinguishable by centroid")
    return (scatter(ci) + scatter(cj)) / m


def dunn_index(ci: Cluster, cj: Cluster) -> float:
    """(M - S_i - S_j) / max(S_i, S_j); higher is better, may be negative."""
    si = scatter(ci)
    sj = scatter(cj)
    widest = max(si, sj)
    if widest == 0.0:
        raise NumericError("degenerate: singleton clusters")
    return (centroid_distance(ci, cj) - si - sj) / widest


def _sample_values(img: np.ndarray, points: list[tuple[int, int]], name: str) -> np.ndarray:
    if img.ndim != 2:
        raise DataError(f"evaluation expects a grayscale image, got shape {img.shape}")
    if not points:
        raise DataError(f"no {name} points given")
    h, w = img.shape
    values = np.empty(len(points))
    for i, (x, y) in enumerate(points):
        if not (0 <= x < w and 0 <= y < h):
            raise DataError(f"{name} point ({x},{y}) outside {w}x{h} image")
        values[i] = float(img[y, x])
    return values


def evaluate_image(
    img: np.ndarray,
    under_pts: list[tuple[int, int]],
    parch_pts: list[tuple[int, int]],
    p_norm: float = 2.0,
) -> IndexReport:
    """Score one grayscale image by sampling undertext and parchment points.

    The two samples become 1-D clusters of pixel values. A zero centroid gap
    propagates as an error (the image carries no signal at all); a zero Dunn
    denominator is recorded in the report instead, since the DB figure is
    still meaningful there.
    """
    under = Cluster(_sample_values(img, under_pts, "underwriting"), p_norm)
    parch = Cluster(_sample_values(img, parch_pts, "parchment"), p_norm)
    si = scatter(under)
    sj = scatter(parch)
    m = centroid_distance(under, parch)
    if m == 0.0:
        raise NumericError("clusters indistinguishable by centroid")
    db = (si + sj) / m
    widest = max(si, sj)
    if widest == 0.0:
        return IndexReport(si, sj, m, db, None, "degenerate: singleton clusters")
    return IndexReport(si, sj, m, db, (m - si - sj) / widest)


def format_table(rows: list[tuple[str, IndexReport]]) -> str:
    """Render labeled reports as an aligned table sorted ascending by db."""
    rows = sorted(rows, key=lambda r: r[1].db)
    name_w = max([len(r[0]) for r in rows] + [len("image")])
    lines = [
        f"{'image':<{name_w}}  {'db':>12}  {'dunn':>12}  {'S_i':>12}  "
        f"{'S_j':>12}  {'M':>12}"
    ]
    for name, rep in rows:
        dunn = f"{rep.dunn:>12.6g}" if rep.dunn is not None else f"{'n/a':>12}"
        lines.append(
            f"{name:<{name_w}}  {rep.db:>12.6g}  {dunn}  {rep.s_under:>12.6g}  "
            f"{rep.s_parchment:>12.6g}  {rep.m:>12.6g}"
        )
    return "\n".join(lines)
