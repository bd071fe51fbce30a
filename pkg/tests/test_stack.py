"""Stack loading, validation, normalization, cropping."""

import numpy as np
import pytest

from undertext.errors import DataError, UndertextWarning
from undertext.rendering import save_image
from undertext.stack import (
    BandMeta,
    SpectralStack,
    crop,
    load_stack,
    normalize_stack,
    pixel_vector,
)


def _metas(n):
    return tuple(BandMeta(i, 400.0 + i, "visible") for i in range(n))


def _write_manifest(directory, lines):
    path = directory / "manifest.txt"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def _write_band(directory, name, array):
    save_image(np.asarray(array), directory / name)


class TestConstruction:
    def test_basic_properties(self):
        planes = np.zeros((3, 4, 5), dtype=np.uint8)
        stack = SpectralStack(_metas(3), planes, 8)
        assert (stack.band_count, stack.width, stack.height) == (3, 5, 4)

    def test_duplicate_band_ids_rejected(self):
        metas = (BandMeta(0, 400.0, "uv"), BandMeta(0, 500.0, "visible"))
        with pytest.raises(DataError):
            SpectralStack(metas, np.zeros((2, 2, 2), dtype=np.uint8), 8)

    def test_nonpositive_wavelength_rejected(self):
        with pytest.raises(DataError):
            BandMeta(0, 0.0, "uv")

    def test_planes_immutable(self):
        stack = SpectralStack(_metas(1), np.zeros((1, 2, 2), dtype=np.uint8), 8)
        with pytest.raises(ValueError):
            stack.planes[0, 0, 0] = 1


class TestLoadStack:
    def test_loads_bands_in_manifest_order(self, tmp_path):
        rng = np.random.default_rng(0)
        arrays = [rng.integers(0, 256, size=(8, 10), dtype=np.uint8)
                  for _ in range(3)]
        for i, arr in enumerate(arrays):
            _write_band(tmp_path, f"b{i}.tif", arr)
        manifest = _write_manifest(tmp_path, [
            "# acquisition comment",
            "b0.tif,365,uv",
            "b1.tif,500,visible,longpass",
            "b2.tif,940,infrared",
        ])
        stack = load_stack(manifest)
        assert stack.band_count == 3
        assert (stack.width, stack.height) == (10, 8)
        assert stack.bands[1].filter == "longpass"
        assert stack.bands[2].illumination == "infrared"
        for i, arr in enumerate(arrays):
            assert np.array_equal(stack.planes[i], arr)

    def test_single_band_stack_valid(self, tmp_path):
        _write_band(tmp_path, "only.tif", np.zeros((4, 4), dtype=np.uint8))
        stack = load_stack(_write_manifest(tmp_path, ["only.tif,365,uv"]))
        assert stack.band_count == 1

    def test_dimension_mismatch_names_band(self, tmp_path):
        _write_band(tmp_path, "a.tif", np.zeros((8, 10), dtype=np.uint8))
        _write_band(tmp_path, "b.tif", np.zeros((8, 9), dtype=np.uint8))
        manifest = _write_manifest(tmp_path, ["a.tif,365,uv", "b.tif,400,uv"])
        with pytest.raises(DataError, match="band 1"):
            load_stack(manifest)

    def test_missing_file(self, tmp_path):
        manifest = _write_manifest(tmp_path, ["gone.tif,365,uv"])
        with pytest.raises(DataError, match="gone.tif"):
            load_stack(manifest)

    def test_mixed_bit_depths_rejected(self, tmp_path):
        _write_band(tmp_path, "a.tif", np.zeros((4, 4), dtype=np.uint8))
        _write_band(tmp_path, "b.tif", np.zeros((4, 4), dtype=np.uint16))
        manifest = _write_manifest(tmp_path, ["a.tif,365,uv", "b.tif,400,uv"])
        with pytest.raises(DataError, match=r"16-bit plane in a 8-bit stack"):
            load_stack(manifest)

    def test_multichannel_source_rejected(self, tmp_path):
        _write_band(tmp_path, "rgb.png", np.zeros((4, 4, 3), dtype=np.uint8))
        manifest = _write_manifest(tmp_path, ["rgb.png,365,uv"])
        with pytest.raises(DataError, match="channel"):
            load_stack(manifest)

    def test_malformed_line_reports_number(self, tmp_path):
        manifest = _write_manifest(tmp_path, ["# header", "not enough fields"])
        with pytest.raises(DataError, match="line 2"):
            load_stack(manifest)

    def test_empty_manifest(self, tmp_path):
        manifest = _write_manifest(tmp_path, ["# nothing"])
        with pytest.raises(DataError):
            load_stack(manifest)


class TestNormalize:
    def test_full_range_16_bit_example(self):
        plane = np.array([[0, 32768, 65535]], dtype=np.uint16)
        stack = SpectralStack(_metas(1), plane[None], 16)
        out = normalize_stack(stack)
        # 32768 maps to 255*32768/65535 = 127.502... -> 128
        assert out.planes[0].tolist() == [[0, 128, 255]]
        assert out.bit_depth == 8 and out.normalized

    def test_full_span_8_bit_identity(self):
        plane = np.arange(256, dtype=np.uint8).reshape(16, 16)
        stack = SpectralStack(_metas(1), plane[None], 8)
        out = normalize_stack(stack)
        assert np.array_equal(out.planes[0], plane)

    def test_per_band_independent(self):
        planes = np.stack([
            np.array([[10, 20], [30, 40]], dtype=np.uint8),
            np.array([[0, 100], [200, 250]], dtype=np.uint8),
        ])
        out = normalize_stack(SpectralStack(_metas(2), planes, 8))
        for b in range(2):
            assert out.planes[b].min() == 0 and out.planes[b].max() == 255

    def test_global_scope_shares_window(self):
        planes = np.stack([
            np.array([[0, 50]], dtype=np.uint8),
            np.array([[50, 100]], dtype=np.uint8),
        ])
        out = normalize_stack(SpectralStack(_metas(2), planes, 8), scope="global")
        # window is [0, 100] across the stack
        assert out.planes[0].tolist() == [[0, 128]]
        assert out.planes[1].tolist() == [[128, 255]]

    def test_constant_band_zeros_with_warning(self):
        planes = np.full((1, 2, 2), 7, dtype=np.uint8)
        stack = SpectralStack(_metas(1), planes, 8)
        with pytest.warns(UndertextWarning):
            out = normalize_stack(stack)
        assert out.planes.max() == 0

    def test_renormalization_refused(self, small_stack):
        with pytest.raises(DataError):
            normalize_stack(small_stack)

    def test_ordering_preserved(self):
        rng = np.random.default_rng(1)
        plane = rng.integers(3, 220, size=(30, 30), dtype=np.uint8)
        out = normalize_stack(SpectralStack(_metas(1), plane[None], 8))
        flat_in = plane.ravel()
        flat_out = out.planes[0].ravel().astype(int)
        order = np.argsort(flat_in, kind="stable")
        assert (np.diff(flat_out[order]) >= 0).all()


class TestCrop:
    def _stack(self):
        rng = np.random.default_rng(2)
        planes = rng.integers(0, 255, size=(3, 80, 100), dtype=np.uint8)
        return SpectralStack(_metas(3), planes, 8)

    def test_geometry(self):
        out = crop(self._stack(), 10, 10, 50, 40)
        assert (out.width, out.height, out.band_count) == (50, 40, 3)

    def test_full_extent_identity(self):
        stack = self._stack()
        out = crop(stack, 0, 0, 100, 80)
        assert np.array_equal(out.planes, stack.planes)

    def test_out_of_bounds(self):
        with pytest.raises(DataError):
            crop(self._stack(), 90, 70, 20, 20)

    def test_zero_area(self):
        with pytest.raises(DataError):
            crop(self._stack(), 0, 0, 0, 10)

    def test_composition(self):
        stack = self._stack()
        twice = crop(crop(stack, 10, 20, 60, 50), 5, 5, 20, 20)
        once = crop(stack, 15, 25, 20, 20)
        assert np.array_equal(twice.planes, once.planes)


class TestPixelVector:
    def test_reads_band_order(self):
        planes = np.array([[[10]], [[20]], [[30]]], dtype=np.uint8)
        stack = SpectralStack(_metas(3), planes, 8)
        assert pixel_vector(stack, 0, 0).tolist() == [10.0, 20.0, 30.0]

    def test_out_of_bounds(self):
        stack = SpectralStack(_metas(1), np.zeros((1, 2, 3), dtype=np.uint8), 8)
        with pytest.raises(DataError):
            pixel_vector(stack, 3, 0)

    def test_single_band(self):
        stack = SpectralStack(_metas(1), np.full((1, 1, 1), 9, np.uint8), 8)
        assert pixel_vector(stack, 0, 0).tolist() == [9.0]
