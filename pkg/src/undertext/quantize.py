"""Shared quantization helpers.

Every place the toolkit turns floating-point values into integer codes uses
the same rounding rule (nearest integer, ties away from zero) so that
independently rendered outputs stay bit-identical across modules.
"""

from __future__ import annotations

import numpy as np


def round_half_away(values: np.ndarray | float) -> np.ndarray:
    """Round to nearest integer with ties away from zero.

    numpy's own ``round`` rounds ties to even, which would make 127.5 land on
    128 but 128.5 land on 128 as well; the toolkit's contract is the ordinary
    away-from-zero tie break.
    """
    v = np.asarray(values, dtype=np.float64)
    return np.sign(v) * np.floor(np.abs(v) + 0.5)


def max_code(depth: int) -> int:
    """Largest code value for a bit depth (255 for 8, 65535 for 16)."""
    if depth not in (8, 16):
        raise ValueError(f"unsupported bit depth {depth}; expected 8 or 16")
    return (1 << depth) - 1


def code_dtype(depth: int):
    """Integer dtype used for images of the given depth."""
    return np.uint8 if depth == 8 else np.uint16


def linear_to_codes(values: np.ndarray, lo: float, hi: float, depth: int) -> np.ndarray:
    """Map [lo, hi] linearly onto [0, max_code(depth)] and quantize.

    Values outside [lo, hi] clamp to the end codes. Requires lo < hi; callers
    handle the degenerate lo == hi case (constant data) themselves.
    """
    if not np.isfinite(lo) or not np.isfinite(hi) or lo >= hi:
        raise ValueError(f"invalid rescale range [{lo}, {hi}]")
    top = max_code(depth)
    scaled = (np.asarray(values, dtype=np.float64) - lo) * (top / (hi - lo))
    return round_half_away(np.clip(scaled, 0.0, top)).astype(code_dtype(depth))
