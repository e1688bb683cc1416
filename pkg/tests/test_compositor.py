from __future__ import annotations

import math

import numpy as np
import pytest

from motionscaffold.compositor import (
    EntityAsset,
    composite_frame,
    extract_asset,
    inpaint_background,
    occupancy_map,
    render_coarse,
    warp_asset,
)
from motionscaffold.errors import DimensionMismatch, EmptyMask, MissingAsset, Unfillable
from motionscaffold.raster import Raster
from motionscaffold.script import StateVector, parse_script

from conftest import MINIMAL_SCRIPT


def square_asset(size: int = 4, value: float = 1.0) -> EntityAsset:
    return EntityAsset(
        entity_id="probe",
        crop=Raster.full(size, size, value, channels=3),
        mask=Raster.full(size, size, 1.0, channels=1),
    )


def literal_composite_oracle(background, layers):
    """Independent evaluation of the masked-sum compositing equation.

    coverage = sum of alpha-weighted masks; out = B * (1 - coverage) + sum of
    per-entity contributions. Valid for pairwise disjoint masks.
    """
    coverage = np.zeros_like(layers[0][1].data) if layers else 0.0
    contributions = np.zeros_like(background.data)
    for crop, mask, alpha in layers:
        coverage = coverage + alpha * mask.data
        contributions = contributions + crop.data * alpha * mask.data
    return background.data * (1.0 - coverage) + contributions


def test_warp_identity_centers_block():
    asset = square_asset(4)
    state = StateVector(x=0.5, y=0.5, s=1.0, r=0.0, alpha=1.0)
    crop, mask = warp_asset(asset, state, 8, 8)
    assert mask.data.sum() == 16
    active = mask.data[..., 0]
    assert active[2:6, 2:6].all()
    assert crop.data[2:6, 2:6].min() == 1.0


def test_warp_half_turn_moves_corner_opposite():
    crop = np.zeros((5, 5, 3))
    crop[0, 0] = 1.0
    mask = np.ones((5, 5, 1))
    asset = EntityAsset("probe", Raster(crop), Raster(mask))
    tx, ty = 10.0 / 19.0, 10.0 / 19.0  # pixel (10, 10) on a 20x20 canvas
    identity = warp_asset(asset, StateVector(tx, ty, 1.0, 0.0, 1.0), 20, 20)[0]
    flipped = warp_asset(asset, StateVector(tx, ty, 1.0, math.pi, 1.0), 20, 20)[0]
    iy, ix = np.unravel_index(np.argmax(identity.data[..., 0]), (20, 20))
    fy, fx = np.unravel_index(np.argmax(flipped.data[..., 0]), (20, 20))
    # corner offset is (-2, -2) from the anchor; the half turn negates it
    assert abs((ix - 10) + (fx - 10)) <= 1
    assert abs((iy - 10) + (fy - 10)) <= 1
    assert (ix, iy) == (8, 8)


def test_warp_double_scale_quadruples_area():
    asset = square_asset(4)
    base = warp_asset(asset, StateVector(0.5, 0.5, 1.0, 0.0, 1.0), 24, 24)[1]
    big = warp_asset(asset, StateVector(0.5, 0.5, 2.0, 0.0, 1.0), 24, 24)[1]
    ratio = big.data.sum() / base.data.sum()
    assert 3.5 <= ratio <= 4.5


def test_occupancy_empty_union():
    occ = occupancy_map([], width=8, height=8)
    assert occ.data.shape == (8, 8, 1)
    assert occ.data.sum() == 0


def test_occupancy_disjoint_and_idempotent():
    a = Raster.zeros(8, 8)
    a.data[1, 1, 0] = 1.0
    b = Raster.zeros(8, 8)
    b.data[5, 6, 0] = 1.0
    union = occupancy_map([a, b])
    assert union.data.sum() == 2
    same = occupancy_map([a, a])
    assert np.array_equal(same.data, a.data)


def test_occupancy_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        occupancy_map([Raster.zeros(8, 8), Raster.zeros(4, 4)])


def test_inpaint_no_holes_is_identity():
    rng = np.random.default_rng(0)
    image = Raster(rng.uniform(0, 1, (10, 10, 3)))
    out = inpaint_background(image, Raster.zeros(10, 10))
    assert np.array_equal(out.data, image.data)


def test_inpaint_constant_image_fixed_point():
    image = Raster.full(12, 12, 0.5, channels=3)
    holes = Raster.zeros(12, 12)
    holes.data[3:9, 2:7] = 1.0
    out = inpaint_background(image, holes)
    assert np.all(out.data == 0.5)


def test_inpaint_single_hole_four_neighbor_mean():
    image = Raster.full(3, 3, 0.5, channels=1)
    image.data[0, 1] = 0.2
    image.data[2, 1] = 0.4
    image.data[1, 0] = 0.6
    image.data[1, 2] = 0.8
    holes = Raster.zeros(3, 3)
    holes.data[1, 1] = 1.0
    out = inpaint_background(image, holes)
    assert out.data[1, 1, 0] == pytest.approx(0.5, abs=1e-15)
    untouched = ~holes.data.astype(bool)[..., 0]
    assert np.array_equal(out.data[untouched], image.data[untouched])


def test_inpaint_all_holes_unfillable():
    with pytest.raises(Unfillable):
        inpaint_background(Raster.full(4, 4, 0.3, channels=3), Raster.full(4, 4, 1.0, channels=1))


def test_composite_opaque_over():
    bg = Raster.full(8, 8, 0.5, channels=3)
    crop = Raster.full(8, 8, 1.0, channels=3)
    mask = Raster.zeros(8, 8)
    mask.data[2:5, 2:5] = 1.0
    frame, occ = composite_frame(bg, [(crop, mask, 1.0)])
    inside = mask.data.astype(bool)[..., 0]
    assert np.all(frame.data[inside] == 1.0)
    assert np.all(frame.data[~inside] == 0.5)
    assert np.array_equal(occ.data, mask.data)


def test_composite_half_alpha():
    bg = Raster.full(8, 8, 0.5, channels=3)
    crop = Raster.full(8, 8, 1.0, channels=3)
    mask = Raster.zeros(8, 8)
    mask.data[0, 0] = 1.0
    frame, _ = composite_frame(bg, [(crop, mask, 0.5)])
    assert frame.data[0, 0, 0] == pytest.approx(0.75, abs=1e-15)


def test_composite_matches_literal_oracle_on_disjoint_masks():
    rng = np.random.default_rng(41)
    for _ in range(25):
        bg = Raster(rng.uniform(0, 1, (12, 12, 3)))
        layers = []
        # carve disjoint 3-column strips
        for i in range(3):
            mask = Raster.zeros(12, 12)
            mask.data[:, 4 * i : 4 * i + 3] = (
                rng.uniform(0, 1, (12, 3, 1)) < 0.6
            ).astype(float)
            crop = Raster(rng.uniform(0, 1, (12, 12, 3)))
            layers.append((crop, mask, float(rng.uniform(0, 1))))
        frame, occ = composite_frame(bg, layers)
        oracle = literal_composite_oracle(bg, layers)
        assert np.max(np.abs(frame.data - oracle)) <= 1e-12
        outside = occ.data[..., 0] == 0
        assert np.array_equal(frame.data[outside], bg.data[outside])


def test_extract_asset_bounding_box():
    keyframe = Raster(np.linspace(0, 1, 8 * 8 * 3).reshape(8, 8, 3))
    mask = Raster.zeros(8, 8)
    mask.data[2:5, 3:7] = 1.0
    asset = extract_asset(keyframe, mask, "thing")
    assert asset.crop.data.shape == (3, 4, 3)
    assert np.array_equal(asset.crop.data, keyframe.data[2:5, 3:7])
    assert asset.mask.data.min() == 1.0
    with pytest.raises(EmptyMask):
        extract_asset(keyframe, Raster.zeros(8, 8), "ghost")


def _single_entity_scene(width=40, height=40):
    script = parse_script(MINIMAL_SCRIPT)
    crop = Raster.full(6, 6, 1.0, channels=3)
    mask = Raster.full(6, 6, 1.0, channels=1)
    asset = EntityAsset("ball", crop, mask)
    background = Raster.full(width, height, 0.25, channels=3)
    return script, [asset], background


def test_render_centroid_tracks_plan():
    script, assets, background = _single_entity_scene()
    video = render_coarse(script, assets, background, 40, 40)
    occ = video.occupancy[8].data[..., 0]
    ys, xs = np.nonzero(occ)
    cx, cy = xs.mean(), ys.mean()
    assert abs(cx - 0.52 * 39) <= 1.0
    assert abs(cy - 0.5 * 39) <= 1.0
    assert len(video.frames) == script.total_frames


def test_render_invisible_entities_keep_background_but_occupy():
    script, assets, background = _single_entity_scene()
    doc = MINIMAL_SCRIPT.replace('"alpha": 1.0', '"alpha": 0.0')
    script = parse_script(doc)
    video = render_coarse(script, assets, background, 40, 40)
    inpainted = inpaint_background(
        background,
        occupancy_map(
            [warp_asset(assets[0], script.entities[0].milestones[0], 40, 40)[1]]
        ),
    )
    for frame in video.frames:
        assert np.array_equal(frame.data, inpainted.data)
    assert video.occupancy[8].data.sum() > 0


def test_render_zero_entities_passes_background_through():
    script = parse_script(
        '{"milestone_count": 2, "total_frames": 3, "fps": 1.0, "entities": []}'
    )
    background = Raster(np.random.default_rng(1).uniform(0, 1, (10, 10, 3)))
    video = render_coarse(script, [], background, 10, 10)
    for frame in video.frames:
        assert np.array_equal(frame.data, background.data)
    for occ in video.occupancy:
        assert occ.data.sum() == 0


def test_render_missing_asset():
    script, _, background = _single_entity_scene()
    with pytest.raises(MissingAsset):
        render_coarse(script, [], background, 40, 40)


def test_render_is_deterministic():
    script, assets, background = _single_entity_scene()
    one = render_coarse(script, assets, background, 40, 40)
    two = render_coarse(script, assets, background, 40, 40)
    for a, b in zip(one.frames, two.frames):
        assert np.array_equal(a.data, b.data)


def test_render_output_samples_in_range():
    script, assets, background = _single_entity_scene()
    video = render_coarse(script, assets, background, 40, 40)
    for frame in video.frames:
        assert frame.data.min() >= 0.0 and frame.data.max() <= 1.0
