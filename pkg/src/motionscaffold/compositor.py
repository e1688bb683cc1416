"""Coarse video rendering: warp entity crops by their per-frame states and
composite them over an inpainted background, tracking a binary occupancy map.

Geometry conventions: a normalized coordinate u maps to pixel u * (size - 1)
with pixel centers on integer coordinates; rotation is positive clockwise on
screen (y grows downward); an entity's anchor point (crop-local, normalized)
lands on the state's (x, y). Warping samples the crop through the inverse
similarity transform with bilinear filtering and zero (transparent) outside
the crop. Overlapping entities are resolved by ordered alpha-over in z-order,
which reduces to the plain masked sum whenever masks are pairwise disjoint.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, EmptyMask, MissingAsset, Unfillable
from .raster import Raster, is_binary
from .script import MotionScript, StateVector
from .trajectory import FrameStateTable, PrimitiveDefaults, plan_frames


@dataclass(frozen=True)
class EntityAsset:
    """Appearance crop and binary mask for one entity, cut from a keyframe."""

    entity_id: str
    crop: Raster      # 3-channel
    mask: Raster      # 1-channel, values in {0, 1}
    anchor: tuple[float, float] = (0.5, 0.5)

    def __post_init__(self):
        if self.crop.channels != 3 or self.mask.channels != 1:
            raise DimensionMismatch("asset needs a 3-channel crop and 1-channel mask")
        if not self.crop.same_size(self.mask):
            raise DimensionMismatch(
                f"asset {self.entity_id!r}: crop {self.crop.data.shape[:2]} vs "
                f"mask {self.mask.data.shape[:2]}"
            )
        if not is_binary(self.mask):
            raise DimensionMismatch(f"asset {self.entity_id!r}: mask must be binary")


@dataclass(frozen=True)
class CoarseVideo:
    frames: tuple[Raster, ...]     # 3-channel
    occupancy: tuple[Raster, ...]  # 1-channel binary
    width: int
    height: int
    fps: float

    def __post_init__(self):
        if len(self.frames) != len(self.occupancy):
            raise DimensionMismatch("frames and occupancy lists must have equal length")
        for r in (*self.frames, *self.occupancy):
            if (r.width, r.height) != (self.width, self.height):
                raise DimensionMismatch("all frames must share the video dimensions")
        for occ in self.occupancy:
            if occ.channels != 1 or not is_binary(occ):
                raise DimensionMismatch("occupancy maps must be 1-channel binary")


def _bilinear(data: np.ndarray, qx: np.ndarray, qy: np.ndarray) -> np.ndarray:
    """Sample (h, w, c) data at float coords, zero outside the raster."""
    h, w = data.shape[:2]
    x0 = np.floor(qx).astype(np.int64)
    y0 = np.floor(qy).astype(np.int64)
    wx = qx - x0
    wy = qy - y0
    out = np.zeros(qx.shape + (data.shape[2],), dtype=np.float64)
    for dy in (0, 1):
        for dx in (0, 1):
            xs = x0 + dx
            ys = y0 + dy
            weight = (wx if dx else 1.0 - wx) * (wy if dy else 1.0 - wy)
            valid = (xs >= 0) & (xs < w) & (ys >= 0) & (ys < h)
            if not valid.any():
                continue
            sample = np.zeros_like(out)
            sample[valid] = data[ys[valid], xs[valid]]
            out += weight[..., None] * sample
    return out


def warp_asset(
    asset: EntityAsset, state: StateVector, out_w: int, out_h: int
) -> tuple[Raster, Raster]:
    """Warp crop and mask into an (out_w, out_h) canvas by the state's pose.

    The mask is re-binarized at 0.5 after bilinear sampling.
    """
    if out_w <= 0 or out_h <= 0:
        raise DimensionMismatch("output canvas must be positive-sized")
    ys, xs = np.mgrid[0:out_h, 0:out_w].astype(np.float64)
    tx = state.x * (out_w - 1)
    ty = state.y * (out_h - 1)
    dx = xs - tx
    dy = ys - ty
    cos_r = math.cos(state.r)
    sin_r = math.sin(state.r)
    ax = asset.anchor[0] * (asset.crop.width - 1)
    ay = asset.anchor[1] * (asset.crop.height - 1)
    # Inverse of p = t + s * R(r) (q - a): rotate back, unscale, re-anchor.
    qx = ax + (cos_r * dx + sin_r * dy) / state.s
    qy = ay + (-sin_r * dx + cos_r * dy) / state.s
    crop = np.clip(_bilinear(asset.crop.data, qx, qy), 0.0, 1.0)
    mask = _bilinear(asset.mask.data, qx, qy)
    return Raster(crop), Raster((mask >= 0.5).astype(np.float64))


def occupancy_map(
    warped_masks: list[Raster], width: int | None = None, height: int | None = None
) -> Raster:
    """Binary union of warped masks; width/height are required when empty."""
    if not warped_masks:
        if width is None or height is None:
            raise DimensionMismatch("empty mask list needs explicit dimensions")
        return Raster.zeros(width, height)
    first = warped_masks[0]
    out = np.zeros_like(first.data)
    for mask in warped_masks:
        if mask.channels != 1:
            raise DimensionMismatch("occupancy expects 1-channel masks")
        if not mask.same_size(first):
            raise DimensionMismatch(
                f"mask {mask.data.shape[:2]} differs from {first.data.shape[:2]}"
            )
        np.maximum(out, mask.data, out=out)
    return Raster(out)


def inpaint_background(keyframe: Raster, holes: Raster) -> Raster:
    """Fill hole pixels by repeated 4-neighbor averaging, then smooth.

    Filling proceeds in waves from the hole boundary until every hole pixel
    has a value, followed by 8 Jacobi smoothing passes restricted to the hole
    region. Non-hole pixels are returned bit-identical.
    """
    if holes.channels != 1 or not keyframe.same_size(holes):
        raise DimensionMismatch("holes must be a 1-channel raster matching the keyframe")
    hole = holes.data[..., 0] >= 0.5
    if not hole.any():
        return keyframe
    if hole.all():
        raise Unfillable("every pixel is a hole; nothing to propagate")

    values = keyframe.data.copy()
    known = ~hole

    def neighbor_mean(mask: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Sum and count of 4-neighbor values where the neighbor is in mask."""
        total = np.zeros_like(values)
        count = np.zeros(values.shape[:2], dtype=np.float64)
        for axis, shift in ((0, 1), (0, -1), (1, 1), (1, -1)):
            shifted_vals = np.roll(values, shift, axis=axis)
            shifted_mask = np.roll(mask, shift, axis=axis)
            # np.roll wraps; sever the wrapped edge.
            edge = [slice(None)] * 2
            edge[axis] = 0 if shift == 1 else -1
            shifted_mask = shifted_mask.copy()
            shifted_mask[tuple(edge)] = False
            total += shifted_vals * shifted_mask[..., None]
            count += shifted_mask
        return total, count

    unfilled = hole.copy()
    while unfilled.any():
        total, count = neighbor_mean(known)
        frontier = unfilled & (count > 0)
        values[frontier] = total[frontier] / count[frontier][..., None]
        known |= frontier
        unfilled &= ~frontier

    for _ in range(8):
        total, count = neighbor_mean(np.ones_like(hole))
        values[hole] = total[hole] / count[hole][..., None]

    values[~hole] = keyframe.data[~hole]
    return Raster(np.clip(values, 0.0, 1.0))


def composite_frame(
    background: Raster,
    entities: list[tuple[Raster, Raster, float]],
) -> tuple[Raster, Raster]:
    """Alpha-over each (warped_crop, warped_mask, alpha) layer in list order.

    The caller passes layers already sorted by draw priority. Returns the
    composited frame and the binary union of the layer masks; pixels no mask
    touches keep the background value bit-for-bit.
    """
    out = background.data.copy()
    masks = []
    for crop, mask, alpha in entities:
        if not (crop.same_size(background) and mask.same_size(background)):
            raise DimensionMismatch("layer dimensions differ from the background")
        coverage = alpha * mask.data
        out = out * (1.0 - coverage) + crop.data * coverage
        masks.append(mask)
    frame = Raster(np.clip(out, 0.0, 1.0))
    return frame, occupancy_map(masks, background.width, background.height)


def extract_asset(
    keyframe: Raster,
    mask: Raster,
    entity_id: str,
    anchor: tuple[float, float] = (0.5, 0.5),
) -> EntityAsset:
    """Cut the mask's bounding box out of a keyframe as an entity asset."""
    if not keyframe.same_size(mask) or mask.channels != 1:
        raise DimensionMismatch("mask must be 1-channel and match the keyframe")
    active = mask.data[..., 0] >= 0.5
    if not active.any():
        raise EmptyMask(f"entity {entity_id!r}: mask has no active pixels")
    rows = np.flatnonzero(active.any(axis=1))
    cols = np.flatnonzero(active.any(axis=0))
    r0, r1 = rows[0], rows[-1] + 1
    c0, c1 = cols[0], cols[-1] + 1
    return EntityAsset(
        entity_id=entity_id,
        crop=Raster(keyframe.data[r0:r1, c0:c1]),
        mask=Raster(active[r0:r1, c0:c1, None].astype(np.float64)),
        anchor=anchor,
    )


def render_coarse(
    script: MotionScript,
    assets: list[EntityAsset],
    background_key: Raster,
    width: int,
    height: int,
    defaults: PrimitiveDefaults | None = None,
    table: FrameStateTable | None = None,
) -> CoarseVideo:
    """Render the full coarse video for a script.

    The background is inpainted once from the union of all frame-0 warped
    masks and reused for every frame. Entities draw in ascending z_order,
    ties broken by entity_id.
    """
    if (background_key.width, background_key.height) != (width, height):
        raise DimensionMismatch(
            f"background is {background_key.width}x{background_key.height}, "
            f"expected {width}x{height}"
        )
    by_id = {a.entity_id: a for a in assets}
    order = sorted(range(len(script.entities)),
                   key=lambda k: (script.entities[k].z_order, script.entities[k].entity_id))
    for entity in script.entities:
        if entity.entity_id not in by_id:
            raise MissingAsset(f"no asset for script entity {entity.entity_id!r}")

    if table is None:
        table = plan_frames(script, defaults)

    def warped_layers(frame: int) -> list[tuple[Raster, Raster, float]]:
        layers = []
        for k in order:
            entity = script.entities[k]
            state = table.states[frame][k]
            crop, mask = warp_asset(by_id[entity.entity_id], state, width, height)
            layers.append((crop, mask, state.alpha))
        return layers

    if script.entities:
        first = warped_layers(0)
        holes = occupancy_map([m for _, m, _ in first], width, height)
        background = inpaint_background(background_key, holes)
    else:
        background = background_key

    frames = []
    occupancy = []
    for t in range(script.total_frames):
        frame, occ = composite_frame(background, warped_layers(t))
        frames.append(frame)
        occupancy.append(occ)
    return CoarseVideo(
        frames=tuple(frames),
        occupancy=tuple(occupancy),
        width=width,
        height=height,
        fps=script.fps,
    )
