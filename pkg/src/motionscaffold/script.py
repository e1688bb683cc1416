"""Motion script model: parse, validate, serialize, resolve milestones to frames.

A script is a JSON document describing per-entity motion as a primitive kind
plus L milestone state vectors on a timeline of T frames:

    {
      "milestone_count": 2,
      "total_frames": 16,
      "fps": 8.0,
      "milestone_frames": [0, 15],
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
    }

"milestone_frames" is optional; when absent, milestones are placed uniformly
over [0, T-1]. Coordinates are normalized to [0, 1] with the origin at the
top-left corner and y increasing downward; rotation is in radians, positive
clockwise on screen, and deliberately unwrapped so multi-turn spins are
expressible. Parsing is strict: invalid input is rejected with the offending
field path, never repaired or clamped.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass

from .errors import DegenerateTimeline, ScriptSyntaxError, ScriptValidationError


class PrimitiveKind(enum.Enum):
    LINEAR = "Linear"
    BALLISTIC = "Ballistic"
    DRIFTING = "Drifting"


@dataclass(frozen=True)
class StateVector:
    """Per-entity pose at one moment: position, scale, rotation, opacity."""

    x: float
    y: float
    s: float = 1.0
    r: float = 0.0
    alpha: float = 1.0

    def position(self) -> tuple[float, float]:
        return (self.x, self.y)


@dataclass(frozen=True)
class EntityPlan:
    entity_id: str
    kind: PrimitiveKind
    milestones: tuple[StateVector, ...]
    z_order: int = 0


@dataclass(frozen=True)
class MotionScript:
    entities: tuple[EntityPlan, ...]
    milestone_count: int
    total_frames: int
    fps: float
    milestone_frames: tuple[int, ...] | None = None


_STATE_FIELDS = ("x", "y", "s", "r", "alpha")
_ENTITY_FIELDS = ("entity_id", "kind", "z_order", "milestones")
_SCRIPT_FIELDS = ("milestone_count", "total_frames", "fps", "milestone_frames", "entities")


def _require_number(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScriptValidationError(path, f"expected a number, got {type(value).__name__}")
    value = float(value)
    if not math.isfinite(value):
        raise ScriptValidationError(path, "must be finite")
    return value


def _require_int(value, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ScriptValidationError(path, f"expected an integer, got {type(value).__name__}")
    return value


def _require_keys(obj: dict, allowed: tuple[str, ...], path: str) -> None:
    for key in obj:
        if key not in allowed:
            raise ScriptValidationError(f"{path}.{key}" if path else key, "unknown field")


def _parse_state(obj, path: str) -> StateVector:
    if not isinstance(obj, dict):
        raise ScriptValidationError(path, "expected an object")
    _require_keys(obj, _STATE_FIELDS, path)
    values = {}
    for name in _STATE_FIELDS:
        if name not in obj:
            raise ScriptValidationError(f"{path}.{name}", "missing field")
        values[name] = _require_number(obj[name], f"{path}.{name}")
    for name in ("x", "y", "alpha"):
        if not 0.0 <= values[name] <= 1.0:
            raise ScriptValidationError(f"{path}.{name}", "must be in [0, 1]")
    if values["s"] <= 0.0:
        raise ScriptValidationError(f"{path}.s", "must be > 0")
    return StateVector(**values)


def _parse_entity(obj, path: str, milestone_count: int, seen_ids: set[str]) -> EntityPlan:
    if not isinstance(obj, dict):
        raise ScriptValidationError(path, "expected an object")
    _require_keys(obj, _ENTITY_FIELDS, path)
    for name in ("entity_id", "kind", "milestones"):
        if name not in obj:
            raise ScriptValidationError(f"{path}.{name}", "missing field")

    entity_id = obj["entity_id"]
    if not isinstance(entity_id, str) or not entity_id:
        raise ScriptValidationError(f"{path}.entity_id", "expected a non-empty string")
    if entity_id in seen_ids:
        raise ScriptValidationError(f"{path}.entity_id", f"duplicate entity_id {entity_id!r}")
    seen_ids.add(entity_id)

    kind_name = obj["kind"]
    try:
        kind = PrimitiveKind(kind_name)
    except ValueError:
        known = ", ".join(k.value for k in PrimitiveKind)
        raise ScriptValidationError(
            f"{path}.kind", f"unknown primitive {kind_name!r} for entity {entity_id!r} (one of: {known})"
        ) from None

    z_order = _require_int(obj.get("z_order", 0), f"{path}.z_order")

    raw = obj["milestones"]
    if not isinstance(raw, list):
        raise ScriptValidationError(f"{path}.milestones", "expected a list")
    if len(raw) != milestone_count:
        raise ScriptValidationError(
            f"{path}.milestones",
            f"expected {milestone_count} milestones, got {len(raw)}",
        )
    milestones = tuple(
        _parse_state(m, f"{path}.milestones[{i}]") for i, m in enumerate(raw)
    )
    return EntityPlan(entity_id=entity_id, kind=kind, milestones=milestones, z_order=z_order)


def parse_script(text: str) -> MotionScript:
    """Parse and validate a script document; rejects rather than repairs."""
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScriptSyntaxError(f"not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise ScriptValidationError("", "top level must be an object")
    _require_keys(obj, _SCRIPT_FIELDS, "")
    for name in ("milestone_count", "total_frames", "fps", "entities"):
        if name not in obj:
            raise ScriptValidationError(name, "missing field")

    milestone_count = _require_int(obj["milestone_count"], "milestone_count")
    if milestone_count < 2:
        raise ScriptValidationError("milestone_count", "must be >= 2")
    total_frames = _require_int(obj["total_frames"], "total_frames")
    if total_frames < milestone_count:
        raise ScriptValidationError("total_frames", "must be >= milestone_count")
    fps = _require_number(obj["fps"], "fps")
    if fps <= 0.0:
        raise ScriptValidationError("fps", "must be > 0")

    milestone_frames = None
    if obj.get("milestone_frames") is not None:
        raw = obj["milestone_frames"]
        if not isinstance(raw, list):
            raise ScriptValidationError("milestone_frames", "expected a list")
        if len(raw) != milestone_count:
            raise ScriptValidationError(
                "milestone_frames", f"expected {milestone_count} entries, got {len(raw)}"
            )
        frames = [_require_int(v, f"milestone_frames[{i}]") for i, v in enumerate(raw)]
        if frames[0] != 0:
            raise ScriptValidationError("milestone_frames[0]", "must be 0")
        if frames[-1] != total_frames - 1:
            raise ScriptValidationError(
                f"milestone_frames[{len(frames) - 1}]", f"must be {total_frames - 1}"
            )
        for i in range(1, len(frames)):
            if frames[i] <= frames[i - 1]:
                raise ScriptValidationError(
                    f"milestone_frames[{i}]", "must be strictly increasing"
                )
        milestone_frames = tuple(frames)

    raw_entities = obj["entities"]
    if not isinstance(raw_entities, list):
        raise ScriptValidationError("entities", "expected a list")
    seen: set[str] = set()
    entities = tuple(
        _parse_entity(e, f"entities[{i}]", milestone_count, seen)
        for i, e in enumerate(raw_entities)
    )
    return MotionScript(
        entities=entities,
        milestone_count=milestone_count,
        total_frames=total_frames,
        fps=fps,
        milestone_frames=milestone_frames,
    )


def serialize_script(script: MotionScript) -> str:
    """Emit a document that parses back field-for-field equal.

    Floats are written with Python repr (shortest exact round-trip), which
    exceeds the required 9 significant digits.
    """
    doc = {
        "milestone_count": script.milestone_count,
        "total_frames": script.total_frames,
        "fps": script.fps,
    }
    if script.milestone_frames is not None:
        doc["milestone_frames"] = list(script.milestone_frames)
    doc["entities"] = [
        {
            "entity_id": e.entity_id,
            "kind": e.kind.value,
            "z_order": e.z_order,
            "milestones": [
                {"x": m.x, "y": m.y, "s": m.s, "r": m.r, "alpha": m.alpha}
                for m in e.milestones
            ],
        }
        for e in script.entities
    ]
    return json.dumps(doc, indent=2) + "\n"


def resolve_timeline(script: MotionScript) -> list[int]:
    """Frame index of each milestone: explicit indices verbatim, else uniform.

    Uniform placement rounds (i * (T-1) / (L-1)) half-up for i = 0..L-1, which
    is strictly increasing whenever T >= L.
    """
    if script.milestone_frames is not None:
        return list(script.milestone_frames)
    length = script.milestone_count
    total = script.total_frames
    if total < length:
        raise DegenerateTimeline(
            f"cannot place {length} milestones on {total} frames without collision"
        )
    step = (total - 1) / (length - 1)
    return [int(math.floor(i * step + 0.5)) for i in range(length)]
