"""Float PFM and 8-bit PGM round trips."""

import numpy as np
import pytest

from evdepth.imgio import read_pfm, read_pgm, write_pfm, write_pgm


class TestPfm:
    def test_round_trip_exact(self, tmp_path):
        rng = np.random.default_rng(0)
        img = rng.normal(size=(7, 5)).astype(np.float32)
        img[0, 0] = -1.0     # sentinel value survives
        path = tmp_path / "depth.pfm"
        write_pfm(path, img)
        out = read_pfm(path)
        assert out.dtype == np.float32
        np.testing.assert_array_equal(out, img)

    def test_rows_stored_bottom_up(self, tmp_path):
        img = np.array([[1.0, 2.0], [3.0, 4.0]], dtype=np.float32)
        path = tmp_path / "img.pfm"
        write_pfm(path, img)
        raw = path.read_bytes()
        # header: magic, dims, scale; payload starts with the last row
        payload = raw.split(b"\n", 3)[3]
        np.testing.assert_array_equal(
            np.frombuffer(payload[:8], dtype="<f4"), [3.0, 4.0])

    def test_rejects_non_2d(self, tmp_path):
        with pytest.raises(ValueError):
            write_pfm(tmp_path / "x.pfm", np.zeros((2, 2, 3)))

    def test_rejects_wrong_magic(self, tmp_path):
        path = tmp_path / "bad.pfm"
        path.write_bytes(b"PF\n2 2\n-1.0\n" + b"\x00" * 48)
        with pytest.raises(ValueError):
            read_pfm(path)

    def test_float64_input_downcast(self, tmp_path):
        img = np.array([[0.1, 0.2]], dtype=np.float64)
        path = tmp_path / "img.pfm"
        write_pfm(path, img)
        np.testing.assert_array_equal(read_pfm(path),
                                      img.astype(np.float32))


class TestPgm:
    def test_round_trip_uint8(self, tmp_path):
        img = np.arange(12, dtype=np.uint8).reshape(3, 4)
        path = tmp_path / "img.pgm"
        write_pgm(path, img, normalize=False)
        np.testing.assert_array_equal(read_pgm(path), img)

    def test_normalization_maps_peak_to_255(self, tmp_path):
        img = np.array([[0.0, 0.5, 2.0]])
        path = tmp_path / "img.pgm"
        write_pgm(path, img)
        out = read_pgm(path)
        np.testing.assert_array_equal(out, [[0, 64, 255]])

    def test_all_zero_image(self, tmp_path):
        path = tmp_path / "img.pgm"
        write_pgm(path, np.zeros((2, 2)))
        assert not read_pgm(path).any()

    def test_rejects_wrong_magic(self, tmp_path):
        path = tmp_path / "bad.pgm"
        path.write_bytes(b"P6\n2 2\n255\n" + b"\x00" * 12)
        with pytest.raises(ValueError):
            read_pgm(path)
