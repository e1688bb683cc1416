"""Float rasters in [0, 1] with binary netpbm file I/O.

Color images are 3-channel, masks and grayscale 1-channel; pixel data lives in
a (height, width, channels) float64 array. Files use binary PPM (P6) for color
and binary PGM (P5) for masks, 8 bits per sample with maxval 255; samples are
quantized with round-half-up: byte = floor(sample * 255 + 0.5).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch, FormatError, TruncatedFile


@dataclass(frozen=True)
class Raster:
    data: np.ndarray  # (h, w, c), float64, values in [0, 1]

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 3 or arr.shape[2] not in (1, 3):
            raise DimensionMismatch(f"expected (h, w, 1|3) array, got {arr.shape}")
        if arr.size and (not np.isfinite(arr).all() or arr.min() < 0.0 or arr.max() > 1.0):
            raise FormatError("raster samples must be finite and in [0, 1]")
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    def same_size(self, other: "Raster") -> bool:
        return self.data.shape[:2] == other.data.shape[:2]

    @classmethod
    def full(cls, width: int, height: int, value: float, channels: int = 3) -> "Raster":
        return cls(np.full((height, width, channels), value, dtype=np.float64))

    @classmethod
    def zeros(cls, width: int, height: int, channels: int = 1) -> "Raster":
        return cls(np.zeros((height, width, channels), dtype=np.float64))


def is_binary(raster: Raster) -> bool:
    return bool(np.isin(raster.data, (0.0, 1.0)).all())


def binarize(raster: Raster, threshold: float = 0.5) -> Raster:
    return Raster((raster.data >= threshold).astype(np.float64))


def quantize(data: np.ndarray) -> np.ndarray:
    return np.floor(data * 255.0 + 0.5).astype(np.uint8)


def ppm_bytes(raster: Raster) -> bytes:
    if raster.channels != 3:
        raise DimensionMismatch("PPM requires a 3-channel raster")
    header = b"P6\n%d %d\n255\n" % (raster.width, raster.height)
    return header + quantize(raster.data).tobytes()


def pgm_bytes(raster: Raster) -> bytes:
    if raster.channels != 1:
        raise DimensionMismatch("PGM requires a 1-channel raster")
    header = b"P5\n%d %d\n255\n" % (raster.width, raster.height)
    return header + quantize(raster.data).tobytes()


def write_ppm(raster: Raster, path) -> None:
    Path(path).write_bytes(ppm_bytes(raster))


def write_pgm(raster: Raster, path) -> None:
    Path(path).write_bytes(pgm_bytes(raster))


def _parse_netpbm(blob: bytes, magic: bytes, channels: int, path="<bytes>") -> Raster:
    if not blob.startswith(magic):
        raise FormatError(f"{path}: expected magic {magic.decode()}")
    # Header = magic + width + height + maxval as whitespace-separated tokens,
    # with optional '#' comment lines; pixel data starts after the single
    # whitespace byte that ends the maxval token.
    pos = len(magic)
    tokens = []
    while len(tokens) < 3:
        while pos < len(blob) and blob[pos : pos + 1].isspace():
            pos += 1
        if pos < len(blob) and blob[pos : pos + 1] == b"#":
            while pos < len(blob) and blob[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(blob) and not blob[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise TruncatedFile(f"{path}: header ends early")
        tokens.append(blob[start:pos])
    pos += 1  # single whitespace after maxval
    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError:
        raise FormatError(f"{path}: non-numeric header token") from None
    if width <= 0 or height <= 0:
        raise FormatError(f"{path}: bad dimensions {width}x{height}")
    if maxval != 255:
        raise FormatError(f"{path}: only maxval 255 is supported, got {maxval}")
    expected = width * height * channels
    payload = blob[pos : pos + expected]
    if len(payload) < expected:
        raise TruncatedFile(f"{path}: expected {expected} pixel bytes, got {len(payload)}")
    arr = np.frombuffer(payload, dtype=np.uint8).reshape(height, width, channels)
    return Raster(arr.astype(np.float64) / 255.0)


def raster_from_ppm_bytes(blob: bytes) -> Raster:
    return _parse_netpbm(blob, b"P6", 3)


def raster_from_pgm_bytes(blob: bytes) -> Raster:
    return _parse_netpbm(blob, b"P5", 1)


def read_ppm(path) -> Raster:
    return _parse_netpbm(Path(path).read_bytes(), b"P6", 3, path)


def read_pgm(path) -> Raster:
    return _parse_netpbm(Path(path).read_bytes(), b"P5", 1, path)
