"""Seeded synthetic palimpsest pages for tests and benchmarking.

A page mixes four deterministic ingredients per band:

  value = base_b + gain_b * illumination(x, y) + signature(class, b) + noise

The illumination field is a smooth, class-independent surface shared by all
bands. Its amplitude dwarfs the undertext signature, which lives in only two
bands, so no single raw band separates undertext from parchment well, while
a supervised projection can cancel the shared field and recover the text.
That reproduces the situation the toolkit exists for.

All randomness flows from one seed; identical calls return identical pages.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from pathlib import Path

from .annotations import AnnotatedPoint, ClassLabel, TrainingSet, serialize_annotations
from .errors import DataError
from .quantize import round_half_away
from .stack import BandMeta, SpectralStack

CLASS_NAMES = ("overwriting", "underwriting", "parchment", "both")


@dataclass(frozen=True)
class SyntheticPage:
    """A generated stack plus ground truth: training points, evaluation
    points (disjoint from training), and the per-class pixel masks."""

    stack: SpectralStack
    training: TrainingSet
    eval_under: list[tuple[int, int]]
    eval_parchment: list[tuple[int, int]]
    masks: dict[str, np.ndarray]


def _band_metas(bands: int) -> tuple[BandMeta, ...]:
    metas = []
    for i in range(bands):
        frac = i / max(bands - 1, 1)
        wavelength = 365.0 + frac * (1050.0 - 365.0)
        if wavelength < 420:
            source = "uv"
        elif wavelength < 700:
            source = "visible"
        elif wavelength < 940:
            source = "infrared"
        else:
            source = "tungsten"
        metas.append(BandMeta(i, wavelength, source))
    return tuple(metas)


def _text_masks(width: int, height: int) -> dict[str, np.ndarray]:
    """Deterministic stroke lattices: undertext in dashed horizontal lines,
    overtext in a denser vertical grid; 'both' where they cross."""
    y = np.arange(height)[:, None]
    x = np.arange(width)[None, :]
    under = ((y % 24) < 6) & ((x % 24) < 18)
    over = ((x % 16) < 5) & ((y % 16) < 12)
    return {
        "overwriting": over & ~under,
        "underwriting": under & ~over,
        "parchment": ~under & ~over,
        "both": under & over,
    }


def _draw_points(
    mask: np.ndarray, count: int, rng: np.random.Generator, forbidden: set
) -> list[tuple[int, int]]:
    ys, xs = np.nonzero(mask)
    order = rng.permutation(len(ys))
    picked = []
    for idx in order:
        pt = (int(xs[idx]), int(ys[idx]))
        if pt in forbidden:
            continue
        picked.append(pt)
        if len(picked) == count:
            return picked
    raise DataError(
        f"mask has only {len(picked)} free pixels, need {count}"
    )


def make_palimpsest(
    width: int = 512,
    height: int = 512,
    bands: int = 23,
    seed: int = 0,
    train_per_class: int = 50,
    eval_per_class: int = 200,
    delta: float = 12.0,
    noise_sd: float = 2.0,
) -> SyntheticPage:
    """Generate a page whose undertext hides under shared illumination.

    Per-band memory stays bounded: each band is synthesized, quantized to
    8-bit and stored before the next, so full benchmark pages (2000x2000x23)
    fit comfortably.
    """
    if bands < 3:
        raise DataError(f"need at least 3 bands, got {bands}")
    rng = np.random.default_rng(seed)

    # Undertext is visible in exactly two bands, oppositely signed. Pixels
    # where both inks overlap get a third, weaker signature of their own so
    # the four class means are affinely independent (ink over ink does not
    # reflect as the sum of its layers).
    sig_band_a = bands // 3
    sig_band_b = (2 * bands) // 3
    inter_band = next(i for i in range(bands) if i not in (sig_band_a, sig_band_b))
    masks = _text_masks(width, height)

    xs = np.arange(width) / max(width - 1, 1)
    ys = np.arange(height) / max(height - 1, 1)
    tilt = rng.uniform(0.5, 1.0, size=2)
    illum = (
        tilt[0] * xs[None, :]
        + tilt[1] * ys[:, None]
        + 0.6 * np.sin(2 * np.pi * xs)[None, :] * np.sin(2 * np.pi * ys)[:, None]
    )
    illum -= illum.min()
    illum /= illum.max()

    base = rng.uniform(90.0, 130.0, size=bands)
    gain = rng.uniform(0.8, 1.2, size=bands) * 60.0
    over_depth = rng.uniform(35.0, 45.0, size=bands)

    planes = np.empty((bands, height, width), dtype=np.uint8)
    over_any = masks["overwriting"] | masks["both"]
    under_any = masks["underwriting"] | masks["both"]
    for b in range(bands):
        field = base[b] + gain[b] * illum
        field = field - over_depth[b] * over_any
        if b == sig_band_a:
            field = field + delta * under_any
        elif b == sig_band_b:
            field = field - delta * under_any
        if b == inter_band:
            field = field + 0.5 * delta * masks["both"]
        field = field + rng.normal(0.0, noise_sd, size=(height, width))
        planes[b] = np.clip(round_half_away(field), 0, 255).astype(np.uint8)

    stack = SpectralStack(_band_metas(bands), planes, bit_depth=8)

    taken: set = set()
    classes = tuple(ClassLabel(name, i) for i, name in enumerate(CLASS_NAMES))
    points = []
    for label in classes:
        for x, y in _draw_points(masks[label.name], train_per_class, rng, taken):
            taken.add((x, y))
            points.append(AnnotatedPoint(x, y, label))
    eval_under = _draw_points(masks["underwriting"], eval_per_class, rng, taken)
    taken.update(eval_under)
    eval_parch = _draw_points(masks["parchment"], eval_per_class, rng, taken)
    training = TrainingSet(
        classes, tuple(points), {"generator-seed": str(seed)}
    )
    return SyntheticPage(stack, training, eval_under, eval_parch, masks)


def write_page_fixture(page: SyntheticPage, directory: str | Path) -> dict[str, Path]:
    """Write a page to disk as the CLI consumes it: one TIFF per band, a
    manifest, the training annotations, and an evaluation point set built
    from the page's held-out points."""
    from .rendering import save_image  # local import: rendering pulls in cv2

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    lines = []
    for i, meta in enumerate(page.stack.bands):
        name = f"band{meta.band_id:02d}.tif"
        save_image(page.stack.planes[i], directory / name)
        lines.append(f"{name},{meta.wavelength_nm!r},{meta.illumination}")
    manifest = directory / "manifest.txt"
    manifest.write_text("\n".join(lines) + "\n", encoding="utf-8")

    training_path = directory / "training.csv"
    training_path.write_text(serialize_annotations(page.training), encoding="utf-8")

    eval_classes = (ClassLabel("underwriting", 0), ClassLabel("parchment", 1))
    eval_points = tuple(
        AnnotatedPoint(x, y, eval_classes[0]) for x, y in page.eval_under
    ) + tuple(AnnotatedPoint(x, y, eval_classes[1]) for x, y in page.eval_parchment)
    eval_path = directory / "eval.csv"
    eval_path.write_text(
        serialize_annotations(TrainingSet(eval_classes, eval_points)),
        encoding="utf-8",
    )
    return {"manifest": manifest, "training": training_path, "eval": eval_path}

