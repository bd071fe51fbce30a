"""Multiband image stacks: loading, validation, normalization, cropping.

A stack is an ordered list of co-registered single-channel planes, one per
illumination band, with per-band acquisition metadata. Stacks are immutable
after construction; every operation returns a new stack, so they are safe to
share across worker threads.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import cv2
import numpy as np

from .errors import DataError, UndertextWarning
from .quantize import round_half_away


@dataclass(frozen=True)
class BandMeta:
    """Acquisition metadata for one band."""

    band_id: int
    wavelength_nm: float
    illumination: str
    filter: str | None = None

    def __post_init__(self):
        if self.wavelength_nm <= 0:
            raise DataError(
                f"band {self.band_id}: wavelength must be positive, "
                f"got {self.wavelength_nm}"
            )


@dataclass(frozen=True)
class SpectralStack:
    """B co-registered single-channel planes sharing one geometry.

    ``planes`` is a (B, H, W) unsigned integer array; ``bands`` carries the
    matching metadata in band order. ``normalized`` records whether each band
    has been min-max mapped onto [0, 255].
    """

    bands: tuple[BandMeta, ...]
    planes: np.ndarray = field(repr=False)
    bit_depth: int
    normalized: bool = False

    def __post_init__(self):
        if self.bit_depth not in (8, 16):
            raise DataError(f"bit depth must be 8 or 16, got {self.bit_depth}")
        if self.planes.ndim != 3 or self.planes.shape[0] != len(self.bands):
            raise DataError(
                f"planes shape {self.planes.shape} does not match "
                f"{len(self.bands)} bands"
            )
        if len(self.bands) < 1:
            raise DataError("a stack needs at least one band")
        ids = [b.band_id for b in self.bands]
        if len(set(ids)) != len(ids):
            raise DataError(f"duplicate band ids in stack: {ids}")
        if self.planes.size and int(self.planes.max()) >= (1 << self.bit_depth):
            raise DataError(
                f"sample value {int(self.planes.max())} exceeds "
                f"{self.bit_depth}-bit range"
            )
        self.planes.setflags(write=False)

    @property
    def band_count(self) -> int:
        return len(self.bands)

    @property
    def width(self) -> int:
        return int(self.planes.shape[2])

    @property
    def height(self) -> int:
        return int(self.planes.shape[1])

    def band_by_id(self, band_id: int) -> np.ndarray:
        """Plane for a band id. Raises DataError for unknown ids."""
        for i, meta in enumerate(self.bands):
            if meta.band_id == band_id:
                return self.planes[i]
        raise DataError(f"unknown band id {band_id}")

    def pixel_vector(self, x: int, y: int) -> np.ndarray:
        """The B samples at (x, y) in band order, as float64."""
        if not (0 <= x < self.width and 0 <= y < self.height):
            raise DataError(
                f"pixel ({x}, {y}) outside {self.width}x{self.height} stack"
            )
        return self.planes[:, y, x].astype(np.float64)


def _parse_manifest_line(line: str, lineno: int, base: Path):
    parts = [p.strip() for p in line.split(",")]
    if len(parts) not in (3, 4):
        raise DataError(
            f"manifest line {lineno}: expected "
            f"'path,wavelength_nm,illumination[,filter]', got {line!r}"
        )
    path = base / parts[0]
    try:
        wavelength = float(parts[1])
    except ValueError:
        raise DataError(
            f"manifest line {lineno}: bad wavelength {parts[1]!r}"
        ) from None
    filt = parts[3] if len(parts) == 4 else None
    return path, wavelength, parts[2], filt


def load_stack(manifest: str | Path) -> SpectralStack:
    """Load a stack from a manifest file.

    One band per line, ``relative/path.tif,wavelength_nm,illumination[,filter]``,
    ``#`` comments allowed. Paths are resolved relative to the manifest's
    directory; band ids are assigned in manifest order. All bands must decode
    as single-channel images of one shared size and bit depth.
    """
    manifest = Path(manifest)
    if not manifest.is_file():
        raise DataError(f"manifest not found: {manifest}")
    entries = []
    for lineno, raw in enumerate(manifest.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        entries.append(_parse_manifest_line(line, lineno, manifest.parent))
    if not entries:
        raise DataError(f"manifest {manifest} lists no bands")

    metas, planes = [], []
    shape, depth = None, None
    for band_id, (path, wavelength, illum, filt) in enumerate(entries):
        if not path.is_file():
            raise DataError(f"band {band_id}: image file not found: {path}")
        img = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
        if img is None:
            raise DataError(f"band {band_id}: could not decode {path}")
        if img.ndim != 2:
            raise DataError(
                f"band {band_id}: {path} has {img.shape[2]} channels; "
                f"stacks are built from single-channel images"
            )
        if img.dtype == np.uint8:
            band_depth = 8
        elif img.dtype == np.uint16:
            band_depth = 16
        else:
            raise DataError(
                f"band {band_id}: {path} has unsupported sample type {img.dtype}"
            )
        if shape is None:
            shape, depth = img.shape, band_depth
        else:
            if img.shape != shape:
                raise DataError(
                    f"band {band_id}: size {img.shape[1]}x{img.shape[0]} does not "
                    f"match band 0 ({shape[1]}x{shape[0]})"
                )
            if band_depth != depth:
                raise DataError(
                    f"band {band_id}: {band_depth}-bit plane in a {depth}-bit stack"
                )
        metas.append(BandMeta(band_id, wavelength, illum, filt))
        planes.append(img)

    return SpectralStack(
        bands=tuple(metas), planes=np.stack(planes), bit_depth=depth
    )


def normalize_stack(stack: SpectralStack, scope: str = "per-band") -> SpectralStack:
    """Min-max map samples onto [0, 255], rounded (ties away from zero).

    ``scope="per-band"`` (default) maps each band by its own min/max;
    ``scope="global"`` uses one min/max over the whole stack. A constant band
    (or constant stack, for global scope) maps to all zeros with a warning.
    Refuses stacks that are already normalized.
    """
    if stack.normalized:
        raise DataError("stack is already normalized")
    if scope not in ("per-band", "global"):
        raise DataError(f"unknown normalization scope {scope!r}")

    out = np.empty_like(stack.planes, dtype=np.uint8)
    if scope == "global":
        lo, hi = float(stack.planes.min()), float(stack.planes.max())
    for i in range(stack.band_count):
        plane = stack.planes[i]
        if scope == "per-band":
            lo, hi = float(plane.min()), float(plane.max())
        if lo == hi:
            warnings.warn(
                f"band {stack.bands[i].band_id} is constant (value {int(lo)}); "
                f"normalized to all zeros",
                UndertextWarning,
                stacklevel=2,
            )
            out[i] = 0
            continue
        scaled = 255.0 * (plane.astype(np.float64) - lo) / (hi - lo)
        out[i] = round_half_away(scaled).astype(np.uint8)
    return SpectralStack(
        bands=stack.bands, planes=out, bit_depth=8, normalized=True
    )


def crop(stack: SpectralStack, x0: int, y0: int, width: int, height: int) -> SpectralStack:
    """Crop all bands identically to the given rectangle."""
    if width <= 0 or height <= 0:
        raise DataError(f"crop rectangle has zero area: {width}x{height}")
    if x0 < 0 or y0 < 0 or x0 + width > stack.width or y0 + height > stack.height:
        raise DataError(
            f"crop ({x0},{y0},{width},{height}) outside "
            f"{stack.width}x{stack.height} stack"
        )
    return replace(stack, planes=stack.planes[:, y0 : y0 + height, x0 : x0 + width].copy())


def pixel_vector(stack: SpectralStack, x: int, y: int) -> np.ndarray:
    """Module-level alias for :meth:`SpectralStack.pixel_vector`."""
    return stack.pixel_vector(x, y)
