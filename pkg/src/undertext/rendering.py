"""Score-plane rescaling, RGB composition, and contrast baselines.

Three rescale modes turn floating-point score planes into 8- or 16-bit
grayscale: full range, training range (clamped to the span of the projected
training points), and symmetric percentile clipping. Composites place chosen
planes into color channels; the double-threshold and polynomial operators
work directly on code-valued images.

Everything here is pure and deterministic, so planes can be rendered
concurrently with bit-identical results.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING

import cv2
import numpy as np

from .errors import DataError, UndertextWarning
from .quantize import code_dtype, linear_to_codes, max_code, round_half_away

if TYPE_CHECKING:  # pragma: no cover
    from .projection import ProjectionModel
    from .stack import SpectralStack

MODE_FULL_RANGE = "full"
MODE_TRAINING_RANGE = "training"
MODE_PERCENTILE = "percentile"
RESCALE_MODES = (MODE_FULL_RANGE, MODE_TRAINING_RANGE, MODE_PERCENTILE)

PERCENTILE_CHOICES = (0.01, 0.1, 1.0, 5.0)


@dataclass(frozen=True)
class ScorePlane:
    """One projected plane of floating-point scores, shape (height, width)."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise DataError(f"score plane must be 2-D, got shape {values.shape}")
        if not np.isfinite(values).all():
            raise DataError("score plane contains NaN or Inf")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def height(self) -> int:
        return int(self.values.shape[0])

    @property
    def width(self) -> int:
        return int(self.values.shape[1])


@dataclass(frozen=True)
class RenderSpec:
    """How to quantize score planes: mode, optional percentile, bit depth."""

    mode: str = MODE_FULL_RANGE
    percentile_p: float | None = None
    out_depth: int = 8
    one_tail: bool = False

    def __post_init__(self):
        if self.mode not in RESCALE_MODES:
            raise DataError(f"unknown rescale mode {self.mode!r}")
        if self.out_depth not in (8, 16):
            raise DataError(f"bit depth must be 8 or 16, got {self.out_depth}")
        if self.mode == MODE_PERCENTILE:
            if self.percentile_p not in PERCENTILE_CHOICES:
                raise DataError(
                    f"percentile must be one of {PERCENTILE_CHOICES}, "
                    f"got {self.percentile_p!r}"
                )
        elif self.percentile_p is not None:
            raise DataError(f"percentile given but mode is {self.mode!r}")

    def suffix(self) -> str:
        """Filename fragment naming this spec, e.g. '_full' or '_p5'."""
        if self.mode == MODE_PERCENTILE:
            p = self.percentile_p
            text = str(int(p)) if float(p).is_integer() else str(p).replace(".", "_")
            return f"_p{text}"
        return f"_{self.mode}"


@dataclass(frozen=True)
class CompositeRecipe:
    """Which rendered planes land in R, G, B, with an optional channel swap
    (a pair of channel indices, 0=R 1=G 2=B, exchanged after assignment)."""

    red: int
    green: int
    blue: int
    swap: tuple[int, int] | None = None

    def __post_init__(self):
        if self.swap is not None:
            a, b = self.swap
            if not {a, b} <= {0, 1, 2} or a == b:
                raise DataError(f"swap must name two distinct channels, got {self.swap}")

    def suffix(self) -> str:
        """Filename fragment, e.g. '_R0G1B2' or '_R0G1B2_swap12'."""
        text = f"_R{self.red}G{self.green}B{self.blue}"
        if self.swap is not None:
            text += f"_swap{self.swap[0]}{self.swap[1]}"
        return text


def _zeros_like_plane(plane: ScorePlane, depth: int, reason: str) -> np.ndarray:
    warnings.warn(f"{reason}; rendering all zeros", UndertextWarning, stacklevel=3)
    return np.zeros(plane.values.shape, dtype=code_dtype(depth))


def rescale_full(plane: ScorePlane, depth: int = 8) -> np.ndarray:
    """Map the plane's min to 0 and max to the top code, linearly between."""
    lo = float(plane.values.min())
    hi = float(plane.values.max())
    if lo == hi:
        return _zeros_like_plane(plane, depth, "constant score plane")
    return linear_to_codes(plane.values, lo, hi, depth)


def rescale_training_range(
    plane: ScorePlane, model: "ProjectionModel", k: int, depth: int = 8
) -> np.ndarray:
    """Map the training-score span of component k onto the code range.

    Pixels scoring below the lowest training point clamp to 0, above the
    highest to the top code: the training points define the contrast window.
    """
    if model.training_scores is None:
        raise DataError(
            "model has no training scores (unsupervised fit); use full-range"
        )
    if not (0 <= k < model.training_scores.shape[0]):
        raise DataError(f"component {k} out of range")
    row = model.training_scores[k]
    lo = float(row.min())
    hi = float(row.max())
    if lo == hi:
        return _zeros_like_plane(plane, depth, f"training scores constant for component {k}")
    return linear_to_codes(plane.values, lo, hi, depth)


def nearest_rank_percentile(sorted_values: np.ndarray, p: float) -> float:
    """The p-th percentile by the nearest-rank rule: element ceil(p/100 * n)
    of the ascending sample (1-based)."""
    n = len(sorted_values)
    rank = max(1, math.ceil(p / 100.0 * n))
    return float(sorted_values[rank - 1])


def rescale_percentile(
    plane: ScorePlane, p: float, depth: int = 8, one_tail: bool = False
) -> np.ndarray:
    """Clip the darkest and brightest p percent, then map linearly.

    lo and hi are the nearest-rank p-th and (100-p)-th percentiles; values
    beyond them saturate at 0 and the top code. ``one_tail`` clips only the
    bright tail, keeping the plane minimum as lo.
    """
    if p not in PERCENTILE_CHOICES:
        raise DataError(f"percentile must be one of {PERCENTILE_CHOICES}, got {p!r}")
    flat = np.sort(plane.values, axis=None)
    lo = float(flat[0]) if one_tail else nearest_rank_percentile(flat, p)
    hi = nearest_rank_percentile(flat, 100.0 - p)
    if lo == hi:
        return _zeros_like_plane(plane, depth, f"percentile window empty at p={p}")
    return linear_to_codes(plane.values, lo, hi, depth)


def rescale(
    plane: ScorePlane,
    spec: RenderSpec,
    model: "ProjectionModel | None" = None,
    k: int | None = None,
) -> np.ndarray:
    """Apply the rescale mode named by ``spec`` to one plane."""
    if spec.mode == MODE_FULL_RANGE:
        return rescale_full(plane, spec.out_depth)
    if spec.mode == MODE_TRAINING_RANGE:
        if model is None or k is None:
            raise DataError("training-range rescale needs the fitted model and plane index")
        return rescale_training_range(plane, model, k, spec.out_depth)
    return rescale_percentile(plane, spec.percentile_p, spec.out_depth, spec.one_tail)


def _check_code_image(img: np.ndarray, name: str = "image") -> int:
    if img.dtype == np.uint8:
        return 8
    if img.dtype == np.uint16:
        return 16
    raise DataError(f"{name} must be uint8 or uint16, got {img.dtype}")


def compose_rgb(planes: list[np.ndarray], recipe: CompositeRecipe) -> np.ndarray:
    """Stack three rendered planes into an RGB image per the recipe.

    Recipe indices select from ``planes`` (repeats allowed); the optional
    swap exchanges two finished channels afterwards.
    """
    for idx in (recipe.red, recipe.green, recipe.blue):
        if not (0 <= idx < len(planes)):
            raise DataError(f"recipe index {idx} outside plane set of {len(planes)}")
    channels = [planes[recipe.red], planes[recipe.green], planes[recipe.blue]]
    depths = {_check_code_image(c) for c in channels}
    shapes = {c.shape for c in channels}
    if len(shapes) != 1 or len(depths) != 1:
        raise DataError("composite channels must share dimensions and bit depth")
    if any(c.ndim != 2 for c in channels):
        raise DataError("composite channels must be grayscale")
    if recipe.swap is not None:
        a, b = recipe.swap
        channels[a], channels[b] = channels[b], channels[a]
    return np.stack(channels, axis=-1)


def pseudocolor(stack: "SpectralStack", red_band: int, uv_band: int) -> np.ndarray:
    """Red channel from one band, green and blue both from another.

    With a tungsten red band and an ultraviolet band, overwriting that
    absorbs in both renders gray (equal channels) while undertext visible
    only under UV shifts red.
    """
    r = stack.band_by_id(red_band)
    u = stack.band_by_id(uv_band)
    return np.stack([r, u, u], axis=-1)


def double_threshold(
    img: np.ndarray, t1: int, t2: int, alpha: float = 0.5
) -> np.ndarray:
    """Whiten dark overtext, darken the midtone undertext band.

    v <= t1 -> top code; t1 < v <= t2 -> round(alpha * v); v > t2 unchanged.
    """
    depth = _check_code_image(img)
    top = max_code(depth)
    if not (0 <= t1 < t2 <= top):
        raise DataError(f"need 0 <= t1 < t2 <= {top}, got t1={t1}, t2={t2}")
    if not (0.0 < alpha <= 1.0):
        raise DataError(f"alpha must lie in (0, 1], got {alpha}")
    values = img.astype(np.float64)
    out = np.where(
        values <= t1,
        float(top),
        np.where(values <= t2, round_half_away(alpha * values), values),
    )
    return out.astype(img.dtype)


def enhance_polynomial(img: np.ndarray, order: int) -> np.ndarray:
    """Gamma-like contrast boost: v -> round(top * (v/top)^order)."""
    depth = _check_code_image(img)
    if order not in (2, 3, 4):
        raise DataError(f"order must be 2, 3 or 4, got {order}")
    top = float(max_code(depth))
    out = round_half_away(top * (img.astype(np.float64) / top) ** order)
    return out.astype(img.dtype)


def downsample_mean(img: np.ndarray, factor: int) -> np.ndarray:
    """Shrink a grayscale image by averaging factor x factor blocks.

    Edge blocks of a non-divisible image average over the pixels that exist,
    so the output is ceil(size/factor) along each axis. factor=1 returns the
    input unchanged.
    """
    depth = _check_code_image(img)
    if img.ndim != 2:
        raise DataError(f"downsampling expects grayscale, got shape {img.shape}")
    if factor < 1:
        raise DataError(f"factor must be >= 1, got {factor}")
    if factor == 1:
        return img
    h, w = img.shape
    out_h = -(-h // factor)
    out_w = -(-w // factor)
    sums = np.zeros((out_h, out_w))
    counts = np.zeros((out_h, out_w))
    for dy in range(factor):
        for dx in range(factor):
            block = img[dy::factor, dx::factor].astype(np.float64)
            sums[: block.shape[0], : block.shape[1]] += block
            counts[: block.shape[0], : block.shape[1]] += 1.0
    out = round_half_away(sums / counts)
    return np.clip(out, 0, max_code(depth)).astype(img.dtype)


_TIFF_COMPRESSION = {"none": 1, "deflate": 8}


def save_image(img: np.ndarray, path: str | Path, compression: str = "none") -> None:
    """Write a grayscale or RGB image as TIFF or PNG; reload is bit-exact.

    Format follows the file suffix. ``compression`` applies to TIFF only
    ('none' or 'deflate'); PNG is always losslessly compressed. RGB inputs
    are channel-ordered R,G,B in memory.
    """
    path = Path(path)
    _check_code_image(img)
    if img.ndim == 3:
        if img.shape[2] != 3:
            raise DataError(f"color image must have 3 channels, got {img.shape[2]}")
        payload = np.ascontiguousarray(img[:, :, ::-1])  # RGB -> BGR for the codec
    elif img.ndim == 2:
        payload = np.ascontiguousarray(img)
    else:
        raise DataError(f"image must be 2-D or 3-D, got shape {img.shape}")
    suffix = path.suffix.lower()
    if suffix in (".tif", ".tiff"):
        if compression not in _TIFF_COMPRESSION:
            raise DataError(f"TIFF compression must be 'none' or 'deflate', got {compression!r}")
        params = [cv2.IMWRITE_TIFF_COMPRESSION, _TIFF_COMPRESSION[compression]]
    elif suffix == ".png":
        params = []
    else:
        raise DataError(f"unsupported image format {suffix!r} (use .tif/.tiff/.png)")
    path.parent.mkdir(parents=True, exist_ok=True)
    if not cv2.imwrite(str(path), payload, params):
        raise DataError(f"failed to write image {path}")


def load_image(path: str | Path) -> np.ndarray:
    """Read a TIFF or PNG back as uint8/uint16, RGB channel order."""
    img = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if img is None:
        raise DataError(f"cannot read image {path}")
    if img.ndim == 3:
        if img.shape[2] != 3:
            raise DataError(f"{path}: expected 3 channels, got {img.shape[2]}")
        img = img[:, :, ::-1]  # BGR -> RGB
    _check_code_image(img, str(path))
    return np.ascontiguousarray(img)
