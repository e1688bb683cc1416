from __future__ import annotations

import json
import math

import numpy as np
import pytest

from motionscaffold.errors import DegenerateTimeline, ScriptSyntaxError, ScriptValidationError
from motionscaffold.script import (
    MotionScript,
    PrimitiveKind,
    StateVector,
    parse_script,
    resolve_timeline,
    serialize_script,
)

from conftest import MINIMAL_SCRIPT, random_script


def test_parse_minimal_linear(minimal_script_text):
    script = parse_script(minimal_script_text)
    assert script.milestone_count == 2
    assert script.total_frames == 16
    assert len(script.entities) == 1
    entity = script.entities[0]
    assert entity.kind is PrimitiveKind.LINEAR
    assert entity.milestones[0] == StateVector(0.2, 0.5, 1.0, 0.0, 1.0)
    assert entity.milestones[1].x == 0.8


def test_unknown_primitive_is_rejected(minimal_script_text):
    doc = json.loads(minimal_script_text)
    doc["entities"][0]["kind"] = "Teleport"
    with pytest.raises(ScriptValidationError) as info:
        parse_script(json.dumps(doc))
    assert info.value.path == "entities[0].kind"
    assert "ball" in str(info.value)
    assert "Teleport" in str(info.value)


def test_alpha_out_of_range_names_exact_path(minimal_script_text):
    doc = json.loads(minimal_script_text)
    doc["entities"][0]["milestones"][1]["alpha"] = 1.5
    with pytest.raises(ScriptValidationError) as info:
        parse_script(json.dumps(doc))
    assert info.value.path == "entities[0].milestones[1].alpha"


def test_not_json_is_a_syntax_error():
    with pytest.raises(ScriptSyntaxError):
        parse_script("kind: Linear\n")


def test_round_trip_minimal(minimal_script_text):
    script = parse_script(minimal_script_text)
    assert parse_script(serialize_script(script)) == script


def test_round_trip_preserves_rotation_precision(minimal_script_text):
    doc = json.loads(minimal_script_text)
    doc["entities"][0]["milestones"][0]["r"] = math.pi / 3
    script = parse_script(json.dumps(doc))
    again = parse_script(serialize_script(script))
    assert abs(again.entities[0].milestones[0].r - math.pi / 3) < 1e-9


def test_empty_entity_list_round_trips():
    script = MotionScript(entities=(), milestone_count=2, total_frames=4, fps=10.0)
    assert parse_script(serialize_script(script)) == script


def test_round_trip_random_scripts_exact():
    rng = np.random.default_rng(11)
    for _ in range(200):
        script = random_script(rng)
        again = parse_script(serialize_script(script))
        assert again == script  # repr round-trip makes floats exact


@pytest.mark.parametrize(
    "mutate,path",
    [
        (lambda d: d["entities"][0]["milestones"][0].update(x=-0.1), "entities[0].milestones[0].x"),
        (lambda d: d["entities"][0]["milestones"][0].update(y=1.2), "entities[0].milestones[0].y"),
        (lambda d: d["entities"][0]["milestones"][0].update(s=0.0), "entities[0].milestones[0].s"),
        (lambda d: d["entities"][0]["milestones"][1].update(alpha=-0.5), "entities[0].milestones[1].alpha"),
        (lambda d: d["entities"][0]["milestones"][0].update(r=float("inf")), "entities[0].milestones[0].r"),
        (lambda d: d["entities"][0]["milestones"].pop(), "entities[0].milestones"),
        (lambda d: d.update(milestone_count=1), "milestone_count"),
        (lambda d: d.update(total_frames=1), "total_frames"),
        (lambda d: d.update(fps=0.0), "fps"),
        (lambda d: d.update(fps=True), "fps"),
        (lambda d: d.update(milestone_frames=[0, 3]), "milestone_frames[1]"),
        (lambda d: d.update(milestone_frames=[1, 15]), "milestone_frames[0]"),
        (lambda d: d.update(milestone_frames=[0, 15, 15]), "milestone_frames"),
        (lambda d: d.update(unknown_extra=1), "unknown_extra"),
        (lambda d: d["entities"][0].update(entity_id=""), "entities[0].entity_id"),
    ],
)
def test_each_invariant_violation_is_rejected_with_path(mutate, path):
    doc = json.loads(MINIMAL_SCRIPT)
    mutate(doc)
    with pytest.raises(ScriptValidationError) as info:
        parse_script(json.dumps(doc))
    assert info.value.path == path


def test_duplicate_entity_id_rejected(minimal_script_text):
    doc = json.loads(minimal_script_text)
    doc["entities"].append(json.loads(json.dumps(doc["entities"][0])))
    with pytest.raises(ScriptValidationError) as info:
        parse_script(json.dumps(doc))
    assert info.value.path == "entities[1].entity_id"


def test_non_monotone_explicit_frames_rejected(minimal_script_text):
    doc = json.loads(minimal_script_text)
    doc["milestone_count"] = 3
    doc["total_frames"] = 16
    doc["milestone_frames"] = [0, 9, 9]
    doc["entities"][0]["milestones"].append(doc["entities"][0]["milestones"][0])
    with pytest.raises(ScriptValidationError) as info:
        parse_script(json.dumps(doc))
    assert info.value.path == "milestone_frames[2]"


def test_resolve_timeline_uniform_by_hand():
    script = MotionScript(entities=(), milestone_count=3, total_frames=9, fps=1.0)
    assert resolve_timeline(script) == [0, 4, 8]


def test_resolve_timeline_endpoints_only():
    script = MotionScript(entities=(), milestone_count=2, total_frames=16, fps=1.0)
    assert resolve_timeline(script) == [0, 15]


def test_resolve_timeline_explicit_passthrough():
    script = MotionScript(
        entities=(), milestone_count=3, total_frames=16, fps=1.0,
        milestone_frames=(0, 3, 15),
    )
    assert resolve_timeline(script) == [0, 3, 15]


def test_resolve_timeline_degenerate():
    script = MotionScript(entities=(), milestone_count=5, total_frames=3, fps=1.0)
    with pytest.raises(DegenerateTimeline):
        resolve_timeline(script)


def test_resolve_timeline_strictly_increasing_property():
    rng = np.random.default_rng(3)
    for _ in range(500):
        length = int(rng.integers(2, 12))
        total = int(rng.integers(length, 200))
        script = MotionScript(
            entities=(), milestone_count=length, total_frames=total, fps=1.0
        )
        frames = resolve_timeline(script)
        assert frames[0] == 0 and frames[-1] == total - 1
        assert all(b > a for a, b in zip(frames, frames[1:]))
