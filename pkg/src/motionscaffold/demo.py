"""Self-contained demo scenario: synthetic keyframes, masks and recorded
fixtures for a 2-entity scene (a tossed ball, a drifting leaf) on a 64x64
canvas with 3 milestones over 24 frames.

The fixtures are produced by running the real reasoning clients in record
mode against a scripted transport, so the stored digests always match what a
replay run will ask for. `python -m motionscaffold.demo OUTDIR` materializes
the fixture directory plus a ready-to-run config file.
"""

from __future__ import annotations

import base64
import sys
from pathlib import Path

import numpy as np

from .raster import Raster, pgm_bytes, ppm_bytes, raster_from_ppm_bytes
from .reason import FixtureStore, ReasonClient, run_reason_stage
from .script import (
    EntityPlan,
    MotionScript,
    PrimitiveKind,
    StateVector,
    serialize_script,
)

DEMO_PROMPT = "A red ball is tossed across the room while a green leaf drifts down to the floor."
DEMO_LABELS = ("ball", "leaf")
DEMO_SIZE = 64
DEMO_TIMESTAMP = "2026-01-01T00:00:00+00:00"

_STATE_PROMPTS = (
    "The red ball rests at the left near the floor; the green leaf hangs high on the right.",
    "The red ball reaches the top of its arc at mid-room; the leaf has swayed to mid-height.",
    "The red ball lands on the right near the floor; the leaf settles just above the floor.",
)
_EDIT_INSTRUCTIONS = (
    "Move the red ball up and toward the center at the top of its arc; "
    "lower the green leaf to mid-height, drifting slightly left.",
    "Bring the red ball down to the right at floor height; "
    "settle the green leaf near the floor, tilted by its sway.",
)

_BALL_MILESTONES = (
    StateVector(x=0.20, y=0.70),
    StateVector(x=0.50, y=0.40),
    StateVector(x=0.80, y=0.70),
)
_LEAF_MILESTONES = (
    StateVector(x=0.70, y=0.15),
    StateVector(x=0.62, y=0.45, r=0.35),
    StateVector(x=0.70, y=0.80, r=0.70),
)


def demo_script() -> MotionScript:
    return MotionScript(
        entities=(
            EntityPlan("ball", PrimitiveKind.BALLISTIC, _BALL_MILESTONES, z_order=1),
            EntityPlan("leaf", PrimitiveKind.DRIFTING, _LEAF_MILESTONES, z_order=0),
        ),
        milestone_count=3,
        total_frames=24,
        fps=8.0,
    )


def _background() -> np.ndarray:
    rows = np.linspace(0.0, 1.0, DEMO_SIZE)[:, None, None]
    top = np.array([0.55, 0.70, 0.90])
    bottom = np.array([0.38, 0.32, 0.26])
    return np.broadcast_to(
        (1.0 - rows) * top + rows * bottom, (DEMO_SIZE, DEMO_SIZE, 3)
    ).copy()


def _disc_mask(cx: float, cy: float, radius: float) -> np.ndarray:
    ys, xs = np.mgrid[0:DEMO_SIZE, 0:DEMO_SIZE]
    return (xs - cx) ** 2 + (ys - cy) ** 2 <= radius**2


def _rect_mask(cx: float, cy: float, half_w: int, half_h: int) -> np.ndarray:
    ys, xs = np.mgrid[0:DEMO_SIZE, 0:DEMO_SIZE]
    return (np.abs(xs - cx) <= half_w) & (np.abs(ys - cy) <= half_h)


def _px(v: float) -> float:
    return float(np.floor(v * (DEMO_SIZE - 1) + 0.5))


def _milestone_art(ball: StateVector, leaf: StateVector) -> tuple[Raster, Raster, Raster]:
    """Keyframe plus the two entity masks for one milestone."""
    ball_mask = _disc_mask(_px(ball.x), _px(ball.y), 5.0)
    leaf_mask = _rect_mask(_px(leaf.x), _px(leaf.y), 4, 2)
    image = _background()
    image[leaf_mask] = (0.20, 0.65, 0.25)
    image[ball_mask] = (0.85, 0.15, 0.12)
    keyframe = raster_from_ppm_bytes(ppm_bytes(Raster(image)))  # quantize once
    return (
        keyframe,
        Raster(ball_mask[..., None].astype(np.float64)),
        Raster(leaf_mask[..., None].astype(np.float64)),
    )


def _b64(blob: bytes) -> str:
    return base64.b64encode(blob).decode("ascii")


def _scripted_transport():
    """Deterministic stand-in backend serving the canned demo responses."""
    art = [
        _milestone_art(b, l) for b, l in zip(_BALL_MILESTONES, _LEAF_MILESTONES)
    ]
    keyframes = [a[0] for a in art]
    responses = {
        "state_prompts": [{"states": list(_STATE_PROMPTS)}],
        "t2i": [{"image": _b64(ppm_bytes(keyframes[0]))}],
        "edit": [
            {"edit": _EDIT_INSTRUCTIONS[0], "image": _b64(ppm_bytes(keyframes[1]))},
            {"edit": _EDIT_INSTRUCTIONS[1], "image": _b64(ppm_bytes(keyframes[2]))},
        ],
        "segment": [
            {"masks": [_b64(pgm_bytes(ball)), _b64(pgm_bytes(leaf))]}
            for _, ball, leaf in art
        ],
        "direct_motion": [{"script": serialize_script(demo_script())}],
    }

    def transport(request: dict) -> dict:
        queue = responses.get(request["role"])
        if not queue:
            raise RuntimeError(f"demo backend has no response left for {request['role']}")
        return queue.pop(0)

    return transport


def build_demo_fixtures(fixtures_dir) -> FixtureStore:
    """Record the demo conversation into fixtures_dir and return the store."""
    store = FixtureStore(Path(fixtures_dir), mode="record", fixed_timestamp=DEMO_TIMESTAMP)
    client = ReasonClient(store=store, transport=_scripted_transport())
    run_reason_stage(DEMO_PROMPT, list(DEMO_LABELS), client)
    return store


def demo_config(fixtures_dir) -> str:
    lines = [
        f"prompt={DEMO_PROMPT}",
        f"labels={','.join(DEMO_LABELS)}",
        f"fixtures={fixtures_dir}",
        "mode=replay",
        f"width={DEMO_SIZE}",
        f"height={DEMO_SIZE}",
        "steps=64",
        "sigma_min=0.6",
        "dilation=1",
        "seed=7",
        "codec=block:2:2:3",
        "model=oracle",
    ]
    return "\n".join(lines) + "\n"


def build_demo(target_dir) -> Path:
    """Materialize fixtures plus a config file; returns the config path."""
    target = Path(target_dir)
    fixtures = target / "fixtures"
    build_demo_fixtures(fixtures)
    config_path = target / "demo.config"
    # absolute fixture path so the config works from any working directory
    config_path.write_text(demo_config(fixtures.resolve()), encoding="utf-8")
    return config_path


def main(argv: list[str] | None = None) -> int:
    args = sys.argv[1:] if argv is None else argv
    if len(args) != 1:
        print("usage: python -m motionscaffold.demo OUTDIR", file=sys.stderr)
        return 2
    config_path = build_demo(args[0])
    print(f"wrote demo fixtures; run: motionscaffold pipeline --config {config_path} --out OUT")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
