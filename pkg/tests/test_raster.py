from __future__ import annotations

import numpy as np
import pytest

from motionscaffold.errors import DimensionMismatch, FormatError, TruncatedFile
from motionscaffold.raster import (
    Raster,
    binarize,
    is_binary,
    pgm_bytes,
    ppm_bytes,
    quantize,
    raster_from_pgm_bytes,
    raster_from_ppm_bytes,
    read_ppm,
    write_ppm,
)


def test_quantize_rounds_half_up():
    data = np.array([[[0.0, 0.5, 1.0]]])
    assert quantize(data).tolist() == [[[0, 128, 255]]]
    # 0.4999/255 boundary: floor(x*255 + 0.5)
    assert quantize(np.array([[[1.0 / 510.0]]])).item() == 1


def test_ppm_write_read_write_is_stable(tmp_path):
    rng = np.random.default_rng(3)
    raster = Raster(rng.uniform(0, 1, (5, 7, 3)))
    path = tmp_path / "a.ppm"
    write_ppm(raster, path)
    first = path.read_bytes()
    back = read_ppm(path)
    write_ppm(back, path)
    assert path.read_bytes() == first
    assert back.data.shape == (5, 7, 3)


def test_pgm_round_trip_preserves_binary_masks():
    mask = Raster((np.random.default_rng(4).uniform(size=(6, 6, 1)) < 0.5).astype(float))
    back = raster_from_pgm_bytes(pgm_bytes(mask))
    assert is_binary(back)
    assert np.array_equal(back.data, mask.data)


def test_netpbm_header_comments_supported():
    blob = ppm_bytes(Raster.full(2, 2, 1.0, channels=3))
    commented = blob[:2] + b"\n# a comment\n" + blob[3:]
    raster = raster_from_ppm_bytes(commented)
    assert raster.data.shape == (2, 2, 3)


def test_netpbm_errors():
    good = ppm_bytes(Raster.full(2, 2, 0.5, channels=3))
    with pytest.raises(FormatError):
        raster_from_pgm_bytes(good)  # P6 payload where P5 expected
    with pytest.raises(TruncatedFile):
        raster_from_ppm_bytes(good[:-1])
    with pytest.raises(FormatError):
        raster_from_ppm_bytes(good.replace(b"255", b"65535", 1))


def test_channel_discipline():
    with pytest.raises(DimensionMismatch):
        ppm_bytes(Raster.full(2, 2, 0.5, channels=1))
    with pytest.raises(DimensionMismatch):
        pgm_bytes(Raster.full(2, 2, 0.5, channels=3))
    with pytest.raises(DimensionMismatch):
        Raster(np.zeros((2, 2, 4)))
    with pytest.raises(FormatError):
        Raster(np.full((2, 2, 1), 1.5))


def test_binarize_threshold():
    raster = Raster(np.array([[[0.49], [0.5], [0.51]]]))
    assert binarize(raster).data[0, :, 0].tolist() == [0.0, 1.0, 1.0]
