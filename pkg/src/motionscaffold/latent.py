"""Latent tensors: a toy codec standing in for the video VAE, occupancy-mask
downsampling to latent resolution, bit-exact tensor file I/O, and seeded
noise initialization.

Tensors are (frames, channels, height, width) float64 in memory. The file
format is little-endian: magic "PHYL", version u32 = 1, dtype u8 = 0 (f32),
rank u8 = 4, dims 4 x u32, then the f32 payload row-major; writing therefore
rounds values to float32, and read-back is bit-identical exactly when the
in-memory values are float32-representable (as everything the pipeline
persists is).

The codec is deliberately simple (identity copy or per-channel block
averaging) so the whole sampling stack stays self-contained; a real encoder
can be swapped in behind CodecSpec without touching callers.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError, NonFinite, ShapeMismatch, StrideMismatch, TruncatedFile
from .raster import Raster
from .compositor import CoarseVideo

MAGIC = b"PHYL"
VERSION = 1
DTYPE_F32 = 0
_HEADER = struct.Struct("<4sIBB4I")

# Generator identity for seeded noise; part of the reproducibility contract.
NOISE_GENERATOR = "splitmix64-boxmuller-v1"


@dataclass(frozen=True)
class LatentTensor:
    data: np.ndarray  # (F, C, H, W) float64, finite

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 4:
            raise ShapeMismatch(f"expected a rank-4 tensor, got shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise NonFinite("latent tensor contains NaN or infinity")
        object.__setattr__(self, "data", arr)

    @property
    def shape(self) -> tuple[int, int, int, int]:
        return tuple(self.data.shape)  # type: ignore[return-value]


@dataclass(frozen=True)
class LatentMask:
    data: np.ndarray  # (F, 1, H, W), values in {0, 1}; broadcasts over C

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 4 or arr.shape[1] != 1:
            raise ShapeMismatch(f"expected shape (F, 1, H, W), got {arr.shape}")
        if not np.isin(arr, (0.0, 1.0)).all():
            raise ShapeMismatch("latent mask must be binary")
        object.__setattr__(self, "data", arr)

    @property
    def shape(self) -> tuple[int, int, int, int]:
        return tuple(self.data.shape)  # type: ignore[return-value]


@dataclass(frozen=True)
class CodecSpec:
    kind: str = "identity"  # "identity" | "block"
    spatial_stride: int = 1
    temporal_stride: int = 1
    channels: int = 3

    def __post_init__(self):
        if self.kind not in ("identity", "block"):
            raise StrideMismatch(f"unknown codec kind {self.kind!r}")
        if self.spatial_stride < 1 or self.temporal_stride < 1:
            raise StrideMismatch("strides must be >= 1")
        if self.kind == "identity" and (
            self.spatial_stride != 1 or self.temporal_stride != 1
        ):
            raise StrideMismatch("identity codec requires strides of 1")
        if self.channels != 3:
            raise StrideMismatch("toy codecs are per-channel; channels must be 3")


def _check_strides(frames: int, height: int, width: int, spec: CodecSpec) -> None:
    if frames % spec.temporal_stride:
        raise StrideMismatch(
            f"{frames} frames not divisible by temporal stride {spec.temporal_stride}"
        )
    if height % spec.spatial_stride or width % spec.spatial_stride:
        raise StrideMismatch(
            f"{width}x{height} not divisible by spatial stride {spec.spatial_stride}"
        )


def encode_coarse(video: CoarseVideo, spec: CodecSpec) -> LatentTensor:
    """Encode frames to a latent: identity copy or per-channel block means."""
    frames = len(video.frames)
    _check_strides(frames, video.height, video.width, spec)
    # (T, H, W, 3) -> (T, 3, H, W)
    pixels = np.stack([f.data for f in video.frames]).transpose(0, 3, 1, 2)
    if spec.kind == "identity":
        return LatentTensor(pixels)
    ss, ts = spec.spatial_stride, spec.temporal_stride
    t_out = frames // ts
    h_out = video.height // ss
    w_out = video.width // ss
    blocks = pixels.reshape(t_out, ts, 3, h_out, ss, w_out, ss)
    return LatentTensor(blocks.mean(axis=(1, 4, 6)))


def decode_latent(latent: LatentTensor, spec: CodecSpec) -> list[Raster]:
    """Invert encode_coarse for inspection; block cells tile their block."""
    f, c, h, w = latent.shape
    if c != spec.channels:
        raise StrideMismatch(f"latent has {c} channels, codec expects {spec.channels}")
    if spec.kind == "identity":
        frames = latent.data
    else:
        ss, ts = spec.spatial_stride, spec.temporal_stride
        frames = np.repeat(np.repeat(np.repeat(latent.data, ts, axis=0), ss, axis=2), ss, axis=3)
    clipped = np.clip(frames.transpose(0, 2, 3, 1), 0.0, 1.0)
    return [Raster(frame) for frame in clipped]


def downsample_mask(
    occupancy: list[Raster], spec: CodecSpec, dilation: int = 1
) -> LatentMask:
    """Max-pool occupancy to latent resolution, then dilate spatially.

    A latent cell activates when any pixel of its spatiotemporal block is
    active, so planned motion is never lost to downsampling; dilation by a
    square element absorbs warp edge aliasing.
    """
    if dilation < 0:
        raise StrideMismatch("dilation must be >= 0")
    if not occupancy:
        raise StrideMismatch("occupancy list is empty")
    height, width = occupancy[0].height, occupancy[0].width
    _check_strides(len(occupancy), height, width, spec)
    stack = np.stack([m.data[..., 0] for m in occupancy])  # (T, H, W)
    ss, ts = spec.spatial_stride, spec.temporal_stride
    t_out = stack.shape[0] // ts
    blocks = stack.reshape(t_out, ts, height // ss, ss, width // ss, ss)
    pooled = blocks.max(axis=(1, 3, 5))
    for _ in range(dilation):
        padded = np.pad(pooled, ((0, 0), (1, 1), (1, 1)))
        pooled = np.maximum.reduce([
            padded[:, 1 + dy : padded.shape[1] - 1 + dy, 1 + dx : padded.shape[2] - 1 + dx]
            for dy in (-1, 0, 1)
            for dx in (-1, 0, 1)
        ])
    return LatentMask(pooled[:, None, :, :])


def write_latent(path, tensor: LatentTensor) -> None:
    f, c, h, w = tensor.shape
    header = _HEADER.pack(MAGIC, VERSION, DTYPE_F32, 4, f, c, h, w)
    payload = tensor.data.astype("<f4").tobytes()
    Path(path).write_bytes(header + payload)


def read_latent(path) -> LatentTensor:
    blob = Path(path).read_bytes()
    if len(blob) < _HEADER.size:
        if blob[:4] != MAGIC and len(blob) >= 4:
            raise FormatError(f"{path}: bad magic {blob[:4]!r}")
        raise TruncatedFile(f"{path}: {len(blob)} bytes is shorter than the header")
    magic, version, dtype, rank, f, c, h, w = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    if dtype != DTYPE_F32:
        raise FormatError(f"{path}: unsupported dtype {dtype}")
    if rank != 4:
        raise FormatError(f"{path}: unsupported rank {rank}")
    expected = 4 * f * c * h * w
    payload = blob[_HEADER.size :]
    if len(payload) < expected:
        raise TruncatedFile(f"{path}: payload has {len(payload)} of {expected} bytes")
    if len(payload) > expected:
        raise FormatError(f"{path}: {len(payload) - expected} trailing bytes")
    data = np.frombuffer(payload, dtype="<f4").reshape(f, c, h, w)
    return LatentTensor(data.astype(np.float64))


def _splitmix64(indices: np.ndarray, seed: int) -> np.ndarray:
    """Stateless SplitMix64: mix(seed + (i+1) * golden gamma) per index."""
    z = (np.uint64(seed) + (indices + np.uint64(1)) * np.uint64(0x9E3779B97F4A7C15))
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def seeded_normal(seed: int, shape: tuple[int, int, int, int]) -> LatentTensor:
    """Standard-normal latent from a seed via SplitMix64 + Box-Muller.

    The generator is fixed by name (NOISE_GENERATOR) rather than delegated to
    a library RNG so the same seed yields the same bytes across library
    versions.
    """
    if seed < 0 or seed >= 2**64:
        raise ValueError("seed must be an unsigned 64-bit integer")
    n = int(np.prod(shape))
    pairs = (n + 1) // 2
    with np.errstate(over="ignore"):
        bits1 = _splitmix64(np.arange(pairs, dtype=np.uint64), seed)
        bits2 = _splitmix64(np.arange(pairs, dtype=np.uint64) + np.uint64(pairs), seed)
    # 53-bit mantissa uniforms; u1 shifted into (0, 1] so log never sees 0.
    u1 = ((bits1 >> np.uint64(11)).astype(np.float64) + 1.0) / float(1 << 53)
    u2 = (bits2 >> np.uint64(11)).astype(np.float64) / float(1 << 53)
    radius = np.sqrt(-2.0 * np.log(u1))
    angle = 2.0 * np.pi * u2
    normals = np.concatenate([radius * np.cos(angle), radius * np.sin(angle)])[:n]
    return LatentTensor(normals.reshape(shape))
