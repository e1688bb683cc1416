"""Motion primitives, boundary-condition fitting, and dense frame-state planning.

Every primitive is a parametric position curve c(t) over one segment between
two milestones, fitted so that c(0) = c_start and c(duration) = c_end hold
exactly. Positions may leave [0, 1]^2 during a segment (objects can exit the
frame); clamping is the compositor's concern. Scale, rotation and opacity are
interpolated linearly between the milestone states.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DegenerateSegment, OutOfDomain
from .script import MotionScript, PrimitiveKind, StateVector, resolve_timeline

Vec2 = tuple[float, float]

# Normalized units/s^2; produces a visible arc over ~1 s segments in unit
# coordinates (y grows downward, so positive y is toward the floor).
DEFAULT_GRAVITY: Vec2 = (0.0, 0.4)
DEFAULT_DRIFT_AMPLITUDE = 0.05
DEFAULT_DRIFT_CYCLES = 1


@dataclass(frozen=True)
class LinearParams:
    pass


@dataclass(frozen=True)
class BallisticParams:
    gravity: Vec2 = DEFAULT_GRAVITY
    initial_velocity: Vec2 = (0.0, 0.0)


@dataclass(frozen=True)
class DriftingParams:
    amplitude: float = DEFAULT_DRIFT_AMPLITUDE  # fraction of segment length
    cycles: int = DEFAULT_DRIFT_CYCLES


PrimitiveParams = LinearParams | BallisticParams | DriftingParams


@dataclass(frozen=True)
class PrimitiveDefaults:
    """Per-kind parameter defaults applied when fitting a script's segments."""

    gravity: Vec2 = DEFAULT_GRAVITY
    amplitude: float = DEFAULT_DRIFT_AMPLITUDE
    cycles: int = DEFAULT_DRIFT_CYCLES


@dataclass(frozen=True)
class Segment:
    start_state: StateVector
    end_state: StateVector
    start_frame: int
    end_frame: int
    kind: PrimitiveKind
    params: PrimitiveParams

    def __post_init__(self):
        if self.end_frame <= self.start_frame:
            raise DegenerateSegment(
                f"segment frames [{self.start_frame}, {self.end_frame}] are not increasing"
            )


def fit_primitive(
    kind: PrimitiveKind,
    c_start: Vec2,
    c_end: Vec2,
    duration: float,
    config: PrimitiveParams | None = None,
) -> PrimitiveParams:
    """Solve the primitive's free parameters from the segment boundary conditions.

    Ballistic has the closed form v0 = (c_end - c_start)/T - g*T/2; Linear and
    Drifting satisfy their boundary conditions by construction.
    """
    if duration <= 0.0:
        raise DegenerateSegment(f"duration must be positive, got {duration}")
    if kind is PrimitiveKind.LINEAR:
        return LinearParams()
    if kind is PrimitiveKind.BALLISTIC:
        gravity = config.gravity if isinstance(config, BallisticParams) else DEFAULT_GRAVITY
        v0 = tuple(
            (c_end[i] - c_start[i]) / duration - 0.5 * gravity[i] * duration
            for i in range(2)
        )
        return BallisticParams(gravity=gravity, initial_velocity=v0)
    if isinstance(config, DriftingParams):
        return config
    return DriftingParams()


def _perpendicular(c_start: Vec2, c_end: Vec2) -> tuple[float, float, float]:
    """Unit vector normal to the segment direction, plus the segment length.

    A degenerate (zero-length) segment gets the straight-up normal (0, -1).
    """
    dx = c_end[0] - c_start[0]
    dy = c_end[1] - c_start[1]
    length = math.hypot(dx, dy)
    if length == 0.0:
        return 0.0, -1.0, 0.0
    return dy / length, -dx / length, length


def eval_position(
    kind: PrimitiveKind,
    params: PrimitiveParams,
    c_start: Vec2,
    c_end: Vec2,
    duration: float,
    t: float,
) -> Vec2:
    """Position on the segment curve at time t in [0, duration] seconds."""
    if not 0.0 <= t <= duration:
        raise OutOfDomain(f"t={t} outside [0, {duration}]")
    if kind is PrimitiveKind.LINEAR:
        u = t / duration
        # convex form: exact at both endpoints, unlike a + u * (b - a)
        return (
            (1.0 - u) * c_start[0] + u * c_end[0],
            (1.0 - u) * c_start[1] + u * c_end[1],
        )
    if kind is PrimitiveKind.BALLISTIC:
        assert isinstance(params, BallisticParams)
        v0 = params.initial_velocity
        g = params.gravity
        return (
            c_start[0] + v0[0] * t + 0.5 * g[0] * t * t,
            c_start[1] + v0[1] * t + 0.5 * g[1] * t * t,
        )
    assert isinstance(params, DriftingParams)
    u = t / duration
    px, py, length = _perpendicular(c_start, c_end)
    sway = params.amplitude * length * math.sin(2.0 * math.pi * params.cycles * u)
    return (
        (1.0 - u) * c_start[0] + u * c_end[0] + sway * px,
        (1.0 - u) * c_start[1] + u * c_end[1] + sway * py,
    )


def interp_state(start: StateVector, end: StateVector, u: float, position: Vec2) -> StateVector:
    """State at fraction u of a segment: given position, lerped s/r/alpha."""
    w = 1.0 - u
    return StateVector(
        x=position[0],
        y=position[1],
        s=w * start.s + u * end.s,
        r=w * start.r + u * end.r,
        alpha=w * start.alpha + u * end.alpha,
    )


@dataclass(frozen=True)
class FrameStateTable:
    """Dense per-frame, per-entity states; states[t][k] for frame t, entity k."""

    entity_ids: tuple[str, ...]
    states: tuple[tuple[StateVector, ...], ...]
    fps: float

    @property
    def total_frames(self) -> int:
        return len(self.states)

    def state(self, frame: int, entity_id: str) -> StateVector:
        return self.states[frame][self.entity_ids.index(entity_id)]

    def rows(self):
        """Yield (frame, entity_id, state) in frame-major order."""
        for t, per_entity in enumerate(self.states):
            for k, state in enumerate(per_entity):
                yield t, self.entity_ids[k], state


def build_segments(
    plan_milestones: tuple[StateVector, ...],
    kind: PrimitiveKind,
    frame_indices: list[int],
    fps: float,
    defaults: PrimitiveDefaults,
) -> list[Segment]:
    config: PrimitiveParams | None
    if kind is PrimitiveKind.BALLISTIC:
        config = BallisticParams(gravity=defaults.gravity)
    elif kind is PrimitiveKind.DRIFTING:
        config = DriftingParams(amplitude=defaults.amplitude, cycles=defaults.cycles)
    else:
        config = None
    segments = []
    for i in range(len(plan_milestones) - 1):
        start_f, end_f = frame_indices[i], frame_indices[i + 1]
        duration = (end_f - start_f) / fps
        start, end = plan_milestones[i], plan_milestones[i + 1]
        params = fit_primitive(kind, start.position(), end.position(), duration, config)
        segments.append(Segment(start, end, start_f, end_f, kind, params))
    return segments


def plan_frames(
    script: MotionScript, defaults: PrimitiveDefaults | None = None
) -> FrameStateTable:
    """Expand a script into states for every (frame, entity) cell.

    Each segment owns frames [start_frame, end_frame); the shared boundary
    frame belongs to the following segment, and the last frame of the timeline
    takes the final milestone verbatim. Milestone frames therefore reproduce
    their milestone states exactly, not merely within tolerance.
    """
    defaults = defaults or PrimitiveDefaults()
    frame_indices = resolve_timeline(script)
    table: list[list[StateVector | None]] = [
        [None] * len(script.entities) for _ in range(script.total_frames)
    ]
    for k, entity in enumerate(script.entities):
        segments = build_segments(
            entity.milestones, entity.kind, frame_indices, script.fps, defaults
        )
        for seg in segments:
            span = seg.end_frame - seg.start_frame
            duration = span / script.fps
            for t in range(seg.start_frame, seg.end_frame):
                seconds = (t - seg.start_frame) / script.fps
                pos = eval_position(
                    seg.kind, seg.params,
                    seg.start_state.position(), seg.end_state.position(),
                    duration, seconds,
                )
                u = (t - seg.start_frame) / span
                table[t][k] = interp_state(seg.start_state, seg.end_state, u, pos)
        table[script.total_frames - 1][k] = entity.milestones[-1]
    return FrameStateTable(
        entity_ids=tuple(e.entity_id for e in script.entities),
        states=tuple(tuple(row) for row in table),  # type: ignore[arg-type]
        fps=script.fps,
    )
