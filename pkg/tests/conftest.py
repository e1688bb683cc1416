from __future__ import annotations

import numpy as np
import pytest

from motionscaffold.script import EntityPlan, MotionScript, PrimitiveKind, StateVector

MINIMAL_SCRIPT = """{
  "milestone_count": 2,
  "total_frames": 16,
  "fps": 8.0,
  "entities": [
    {
      "entity_id": "ball",
      "kind": "Linear",
      "z_order": 0,
      "milestones": [
        {"x": 0.2, "y": 0.5, "s": 1.0, "r": 0.0, "alpha": 1.0},
        {"x": 0.8, "y": 0.5, "s": 1.0, "r": 0.0, "alpha": 1.0}
      ]
    }
  ]
}"""


@pytest.fixture
def minimal_script_text() -> str:
    return MINIMAL_SCRIPT


def random_state(rng: np.random.Generator) -> StateVector:
    return StateVector(
        x=float(rng.uniform(0.0, 1.0)),
        y=float(rng.uniform(0.0, 1.0)),
        s=float(rng.uniform(0.05, 3.0)),
        r=float(rng.uniform(-12.0, 12.0)),
        alpha=float(rng.uniform(0.0, 1.0)),
    )


def random_script(rng: np.random.Generator) -> MotionScript:
    """A random script satisfying every type invariant."""
    milestone_count = int(rng.integers(2, 6))
    total_frames = int(rng.integers(milestone_count, 40))
    kinds = list(PrimitiveKind)
    entities = tuple(
        EntityPlan(
            entity_id=f"entity{k}",
            kind=kinds[int(rng.integers(0, len(kinds)))],
            milestones=tuple(random_state(rng) for _ in range(milestone_count)),
            z_order=int(rng.integers(-3, 4)),
        )
        for k in range(int(rng.integers(0, 4)))
    )
    milestone_frames = None
    if rng.random() < 0.5 and total_frames >= 2 * milestone_count:
        picks = rng.choice(
            np.arange(1, total_frames - 1), size=milestone_count - 2, replace=False
        )
        milestone_frames = tuple([0, *sorted(int(p) for p in picks), total_frames - 1])
    return MotionScript(
        entities=entities,
        milestone_count=milestone_count,
        total_frames=total_frames,
        fps=float(rng.uniform(1.0, 60.0)),
        milestone_frames=milestone_frames,
    )
