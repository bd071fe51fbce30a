"""Composed processing stages shared by the command line and the service.

Both front ends call these functions with the same arguments, so a run
launched either way writes byte-identical artifacts. Nothing here touches a
clock or a random generator; provenance records hashes, not timestamps.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .annotations import TrainingSet, assemble_matrix
from .eigen import DEFAULT_RIDGE
from .errors import DataError, NumericError
from .metrics import CSV_HEADER, IndexReport, evaluate_image, format_table
from .projection import (
    METHOD_PCA_UNSUPERVISED,
    ProjectionModel,
    fit,
    project_stack,
)
from .rendering import (
    CompositeRecipe,
    RenderSpec,
    ScorePlane,
    compose_rgb,
    rescale,
    save_image,
)
from .stack import SpectralStack, crop, load_stack, normalize_stack

# Planes projected per batch while rendering; bounds peak memory on
# full-page stacks without changing any output byte.
_RENDER_BATCH = 8

RUN_META_NAME = "run.meta"


def sha256_file(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def load_normalized(
    manifest: str | Path,
    crop_rect: tuple[int, int, int, int] | None = None,
    scope: str = "per-band",
) -> SpectralStack:
    """Manifest -> loaded, optionally cropped, normalized stack."""
    stack = load_stack(manifest)
    if crop_rect is not None:
        stack = crop(stack, *crop_rect)
    return normalize_stack(stack, scope)


def model_provenance(
    stack_meta: dict,
    annotations_text: str | None,
    method: str,
    k: int | None,
    ridge: float,
) -> dict:
    """The provenance dict embedded in a model file, in canonical key order.

    Every front end must build it through here: the model JSON is compared
    byte for byte across entry points, so key set and order are part of the
    format. Only content hashes identify the annotations (never a local
    path), keeping a model fitted from an uploaded point set identical to
    one fitted from the same points saved to disk.
    """
    prov = {
        key: stack_meta[key]
        for key in ("manifest", "manifest_sha256", "crop", "scope")
        if key in stack_meta
    }
    if annotations_text is not None:
        prov["annotations_sha256"] = sha256_text(annotations_text)
    prov["method"] = method
    prov["k"] = k if k is not None else "all"
    prov["ridge"] = ridge
    return prov


def fit_model(
    stack: SpectralStack,
    training: TrainingSet | None,
    method: str,
    k: int | None = None,
    ridge: float = DEFAULT_RIDGE,
    region: tuple[int, int, int, int] | None = None,
    provenance: dict | None = None,
) -> ProjectionModel:
    """Fit any method against a normalized stack.

    Supervised methods sample the stack at the training points; the
    unsupervised PCA uses every pixel of ``region`` (whole stack when None).
    """
    provenance = dict(provenance or {})
    provenance.setdefault("normalized_input", stack.normalized)
    if method == METHOD_PCA_UNSUPERVISED:
        return fit(method, stack=stack, region=region, k=k, provenance=provenance)
    if training is None:
        raise DataError(f"method {method!r} needs annotations")
    dm = assemble_matrix(stack, training)
    return fit(method, dm=dm, k=k, ridge=ridge, provenance=provenance)


@dataclass
class RenderResult:
    """Artifact paths written by render_planes, in deterministic order."""

    plane_paths: list[Path] = field(default_factory=list)
    composite_path: Path | None = None


def plane_filename(run_name: str, k: int, spec: RenderSpec, fmt: str) -> str:
    return f"{run_name}_plane{k:02d}{spec.suffix()}.{fmt}"


def composite_filename(run_name: str, recipe: CompositeRecipe) -> str:
    return f"{run_name}{recipe.suffix()}.png"


def render_planes(
    stack: SpectralStack,
    model: ProjectionModel,
    specs: list[RenderSpec],
    out_dir: str | Path,
    run_name: str = "run",
    components: list[int] | None = None,
    recipe: CompositeRecipe | None = None,
    workers: int = 1,
    fmt: str = "png",
    compression: str = "none",
) -> RenderResult:
    """Project, rescale per spec, and write one grayscale per plane per spec.

    Projection runs in fixed plane batches to bound memory. The optional
    composite is built from the first spec's rendering of the recipe's three
    planes and always saved as PNG.
    """
    if fmt not in ("png", "tif"):
        raise DataError(f"format must be png or tif, got {fmt!r}")
    if not specs:
        raise DataError("at least one render spec required")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if components is None:
        components = list(range(model.component_count))

    result = RenderResult()
    needed = {} if recipe is None else {recipe.red, recipe.green, recipe.blue}
    recipe_planes: dict[int, np.ndarray] = {}
    for i in range(0, len(components), _RENDER_BATCH):
        batch = components[i : i + _RENDER_BATCH]
        planes = project_stack(stack, model, components=batch, workers=workers)
        for k, plane in zip(batch, planes):
            for s, spec in enumerate(specs):
                img = rescale(plane, spec, model=model, k=k)
                path = out_dir / plane_filename(run_name, k, spec, fmt)
                save_image(img, path, compression=compression)
                result.plane_paths.append(path)
                if s == 0 and k in needed:
                    recipe_planes[k] = img
    if recipe is not None:
        missing = sorted(needed - set(recipe_planes))
        if missing:
            raise DataError(f"recipe needs planes {missing}, not rendered")
        trio = [
            recipe_planes[recipe.red],
            recipe_planes[recipe.green],
            recipe_planes[recipe.blue],
        ]
        composite = compose_rgb(trio, CompositeRecipe(0, 1, 2, swap=recipe.swap))
        path = out_dir / composite_filename(run_name, recipe)
        save_image(composite, path)
        result.composite_path = path
    return result


def project_single(
    stack: SpectralStack, model: ProjectionModel, k: int, workers: int = 1
) -> ScorePlane:
    return project_stack(stack, model, components=[k], workers=workers)[0]


EVAL_CLASSES = ("underwriting", "parchment")


def eval_points(training: TrainingSet) -> tuple[list, list]:
    """Extract the two evaluation point lists from an annotation set."""
    for name in EVAL_CLASSES:
        if not training.points_for(name):
            raise DataError(
                f"evaluation annotations need points for class {name!r}"
            )
    under = [(p.x, p.y) for p in training.points_for("underwriting")]
    parch = [(p.x, p.y) for p in training.points_for("parchment")]
    return under, parch


@dataclass(frozen=True)
class EvalRow:
    name: str
    report: IndexReport | None
    error: str | None = None


def evaluate_images(
    named_images: list[tuple[str, np.ndarray]],
    under_pts: list[tuple[int, int]],
    parch_pts: list[tuple[int, int]],
) -> list[EvalRow]:
    """Score each image; degenerate ones become error rows, not aborts.

    Rows come back sorted ascending by Davies-Bouldin (best separation
    first), error rows last."""
    rows = []
    for name, img in named_images:
        try:
            rows.append(EvalRow(name, evaluate_image(img, under_pts, parch_pts)))
        except NumericError as exc:
            rows.append(EvalRow(name, None, str(exc)))
    rows.sort(key=lambda r: (r.report is None, r.report.db if r.report else 0.0))
    return rows


def eval_csv(rows: list[EvalRow]) -> str:
    lines = [CSV_HEADER]
    for row in rows:
        if row.report is None:
            lines.append(f"{row.name},,,,ERROR: {row.error},")
        else:
            lines.append(row.report.csv_line(row.name))
    return "\n".join(lines) + "\n"


def eval_table(rows: list[EvalRow]) -> str:
    scored = [(r.name, r.report) for r in rows if r.report is not None]
    parts = []
    if scored:
        parts.append(format_table(scored))
    for row in rows:
        if row.report is None:
            parts.append(f"{row.name}  ERROR: {row.error}")
    return "\n".join(parts)


def write_run_meta(out_dir: str | Path, entries: dict) -> Path:
    """Echo the run's inputs and config as stable `key = value` lines."""
    path = Path(out_dir) / RUN_META_NAME
    lines = [f"version = {__version__}"]
    for key, value in entries.items():
        lines.append(f"{key} = {value}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
