"""Wire protocol and record/replay clients for the external reasoning stage.

The external services (state-sequence reasoner, text-to-image, instruction
editing, segmentation, motion director) sit behind one request/response
document format:

    request  = {template_version, role, prompt, images: [base64 PPM/PGM],
                labels: [str]}
    response = {states: [str]}            role "state_prompts"
             | {image: b64}               role "t2i"
             | {edit: str, image: b64}    role "edit"
             | {masks: [b64]}             role "segment"
             | {script: str}              role "direct_motion"
             | {latent: b64}              role "velocity"

Requests are content-addressed: the digest is SHA-256 over the canonical
(sorted-key, compact) JSON encoding, so it is invariant under field
reordering and changes whenever the rendered prompt template changes. A
FixtureStore maps digests to recorded responses; in replay mode a missing
digest is an error, never a live call, which keeps the whole pipeline
runnable offline and byte-reproducible.
"""

from __future__ import annotations

import base64
import binascii
import datetime
import hashlib
import json
import urllib.request
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

from .errors import (
    BackendError,
    FixtureMiss,
    ImageDecodeError,
    MalformedResponse,
    MaskShapeError,
    ScaffoldError,
    ScriptValidationError,
)
from .latent import LatentTensor, read_latent, write_latent
from .raster import (
    Raster,
    binarize,
    pgm_bytes,
    ppm_bytes,
    raster_from_pgm_bytes,
    raster_from_ppm_bytes,
)
from .script import MotionScript, parse_script

Transport = Callable[[dict], dict]

TEMPLATE_VERSION = "1"

# Rendered prompt text is part of the request digest, so editing a template
# invalidates every stale fixture by construction.
TEMPLATES = {
    "state_prompts": (
        "You plan physically grounded motion. For the scene below, list the"
        " key kinematic moments as one line each: the initial state, every"
        " pivotal transition (impacts, reversals, releases), and the final"
        " state. Describe object positions and motion, not camera work.\n"
        "Scene: {prompt}\n"
    ),
    "t2i": (
        "Render a single still image of the following physical state."
        " Plain background, all named objects fully visible.\n"
        "State: {prompt}\n"
    ),
    "edit": (
        "Given the attached image of the previous state, produce an edit"
        " instruction that advances the scene to the target state while"
        " keeping object identity and appearance, then apply it.\n"
        "Target state: {prompt}\n"
    ),
    "segment": (
        "Segment each labeled object in the attached image; return one binary"
        " mask per label, in label order.\n"
    ),
    "direct_motion": (
        "You are the motion director. The attached images are the milestone"
        " keyframes followed by per-milestone object masks in label order."
        " Emit a motion script JSON document with fields milestone_count,"
        " total_frames, fps, optional milestone_frames, and entities"
        " (entity_id, kind: Linear|Ballistic|Drifting, z_order, milestones"
        " of x, y, s, r, alpha). Use one entity per label.\n"
        "Scene: {prompt}\n"
    ),
    "velocity": "Predict the flow velocity for the attached latent state.\n",
}


def make_request(
    role: str, prompt: str = "", images: list[bytes] | None = None,
    labels: list[str] | None = None,
) -> dict:
    return {
        "template_version": TEMPLATE_VERSION,
        "role": role,
        "prompt": prompt,
        "images": [base64.b64encode(b).decode("ascii") for b in (images or [])],
        "labels": list(labels or []),
    }


def canonical_request_bytes(request: dict) -> bytes:
    return json.dumps(request, sort_keys=True, separators=(",", ":")).encode("utf-8")


def request_digest(request: dict) -> str:
    return hashlib.sha256(canonical_request_bytes(request)).hexdigest()


@dataclass
class FixtureStore:
    """Content-addressed response store under one directory.

    Modes: "replay" never touches the transport and fails on a missing
    digest; "record" replays a hit and otherwise performs the live call and
    stores the response (one entry per novel digest); "passthrough" always
    calls live and never reads or writes the store.
    """

    directory: Path
    mode: str = "replay"
    fixed_timestamp: str | None = None  # for reproducible fixture trees

    def __post_init__(self):
        self.directory = Path(self.directory)
        if self.mode not in ("record", "replay", "passthrough"):
            raise BackendError(f"unknown fixture mode {self.mode!r}")

    def _response_path(self, digest: str) -> Path:
        return self.directory / f"{digest}.json"

    def lookup(self, digest: str) -> dict | None:
        path = self._response_path(digest)
        if not path.exists():
            return None
        try:
            return json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise MalformedResponse(f"fixture {path} is not valid JSON: {exc}") from exc

    def put(self, digest: str, response: dict, role: str, timestamp: str | None = None) -> None:
        self.directory.mkdir(parents=True, exist_ok=True)
        if timestamp is None:
            timestamp = self.fixed_timestamp
        if timestamp is None:
            timestamp = datetime.datetime.now(datetime.timezone.utc).isoformat()
        meta = {"role": role, "template_version": TEMPLATE_VERSION, "timestamp": timestamp}
        self._response_path(digest).write_text(
            json.dumps(response, sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )
        (self.directory / f"{digest}.meta.json").write_text(
            json.dumps(meta, sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )

    def entries(self) -> list[str]:
        if not self.directory.exists():
            return []
        return sorted(
            p.stem for p in self.directory.glob("*.json") if not p.stem.endswith(".meta")
        )


@dataclass
class ReasonClient:
    """Dispatches protocol requests through the store's record/replay policy."""

    store: FixtureStore
    transport: Transport | None = None

    def call(self, request: dict) -> dict:
        digest = request_digest(request)
        mode = self.store.mode
        if mode in ("replay", "record"):
            hit = self.store.lookup(digest)
            if hit is not None:
                return hit
            if mode == "replay":
                raise FixtureMiss(digest, request["role"])
        response = self._live(request)
        if mode == "record":
            self.store.put(digest, response, request["role"])
        return response

    def _live(self, request: dict) -> dict:
        if self.transport is None:
            raise BackendError(f"no transport configured for {request['role']} request")
        try:
            response = self.transport(request)
        except ScaffoldError:
            raise
        except Exception as exc:
            raise BackendError(f"{request['role']} call failed: {exc}") from exc
        if not isinstance(response, dict):
            raise MalformedResponse(f"{request['role']}: response is not an object")
        return response


def http_transport(endpoint: str, timeout: float = 60.0) -> Transport:
    """POST the request document as JSON and decode the JSON response."""

    def call(request: dict) -> dict:
        body = canonical_request_bytes(request)
        req = urllib.request.Request(
            endpoint, data=body, headers={"Content-Type": "application/json"}
        )
        with urllib.request.urlopen(req, timeout=timeout) as resp:
            return json.loads(resp.read().decode("utf-8"))

    return call


def _decode_image(payload, decoder, role: str) -> Raster:
    if not isinstance(payload, str):
        raise MalformedResponse(f"{role}: image payload must be a base64 string")
    try:
        blob = base64.b64decode(payload.encode("ascii"), validate=True)
    except (binascii.Error, UnicodeEncodeError) as exc:
        raise ImageDecodeError(f"{role}: bad base64 image: {exc}") from exc
    try:
        return decoder(blob)
    except ScaffoldError as exc:
        raise ImageDecodeError(f"{role}: bad image payload: {exc}") from exc


def build_state_prompts(user_prompt: str, client: ReasonClient) -> list[str]:
    """Ask the reasoner for the milestone state descriptions (at least 2)."""
    request = make_request(
        "state_prompts", TEMPLATES["state_prompts"].format(prompt=user_prompt)
    )
    response = client.call(request)
    states = response.get("states")
    if not isinstance(states, list) or not all(isinstance(s, str) for s in states):
        raise MalformedResponse("state_prompts: expected a list of strings")
    if len(states) < 2:
        raise MalformedResponse(
            f"state_prompts: need at least 2 states, got {len(states)}"
        )
    return list(states)


def next_keyframe(
    prev_keyframe: Raster | None, state_prompt: str, client: ReasonClient
) -> tuple[Raster, str | None]:
    """First milestone renders text-to-image; later ones edit the previous frame."""
    if prev_keyframe is None:
        request = make_request("t2i", TEMPLATES["t2i"].format(prompt=state_prompt))
        response = client.call(request)
        if "image" not in response:
            raise MalformedResponse("t2i: missing image")
        return _decode_image(response["image"], raster_from_ppm_bytes, "t2i"), None
    request = make_request(
        "edit",
        TEMPLATES["edit"].format(prompt=state_prompt),
        images=[ppm_bytes(prev_keyframe)],
    )
    response = client.call(request)
    if "image" not in response or not isinstance(response.get("edit"), str):
        raise MalformedResponse("edit: expected {edit, image}")
    image = _decode_image(response["image"], raster_from_ppm_bytes, "edit")
    return image, response["edit"]


def segment_entities(
    keyframe: Raster, entity_labels: list[str], client: ReasonClient
) -> list[Raster]:
    """One binary mask per label, binarized at 0.5 on ingestion."""
    if not entity_labels:
        raise MalformedResponse("segment: entity label list must not be empty")
    request = make_request(
        "segment", TEMPLATES["segment"], images=[ppm_bytes(keyframe)],
        labels=entity_labels,
    )
    response = client.call(request)
    payloads = response.get("masks")
    if not isinstance(payloads, list) or len(payloads) != len(entity_labels):
        raise MalformedResponse(
            f"segment: expected {len(entity_labels)} masks"
        )
    masks = []
    for label, payload in zip(entity_labels, payloads):
        mask = _decode_image(payload, raster_from_pgm_bytes, "segment")
        if not mask.same_size(keyframe):
            raise MaskShapeError(
                f"mask for {label!r} is {mask.width}x{mask.height}, keyframe is "
                f"{keyframe.width}x{keyframe.height}"
            )
        masks.append(binarize(mask))
    return masks


@dataclass(frozen=True)
class ReasonTrace:
    """Everything the reasoning stage produced, in milestone order."""

    user_prompt: str
    entity_labels: tuple[str, ...]
    state_prompts: tuple[str, ...]
    edit_instructions: tuple[str, ...]          # length L - 1
    keyframes: tuple[Raster, ...]               # length L
    entity_masks: tuple[tuple[Raster, ...], ...]  # [milestone][entity]

    def __post_init__(self):
        length = len(self.state_prompts)
        if length < 2:
            raise MalformedResponse("trace needs at least 2 state prompts")
        if (
            len(self.keyframes) != length
            or len(self.entity_masks) != length
            or len(self.edit_instructions) != length - 1
        ):
            raise MalformedResponse("trace fields are inconsistently sized")


def direct_motion(trace: ReasonTrace, client: ReasonClient) -> MotionScript:
    """Ask the motion director for the script; validation failures surface as-is."""
    images = [ppm_bytes(k) for k in trace.keyframes]
    for per_entity in trace.entity_masks:
        images.extend(pgm_bytes(m) for m in per_entity)
    request = make_request(
        "direct_motion",
        TEMPLATES["direct_motion"].format(prompt=trace.user_prompt),
        images=images,
        labels=list(trace.entity_labels),
    )
    digest = request_digest(request)
    response = client.call(request)
    document = response.get("script")
    if not isinstance(document, str):
        raise MalformedResponse("direct_motion: expected {script: document}")
    try:
        return parse_script(document)
    except ScriptValidationError as exc:
        raise ScriptValidationError(
            exc.path, f"{exc.message} (backend digest {digest})"
        ) from exc


def run_reason_stage(
    user_prompt: str, entity_labels: list[str], client: ReasonClient
) -> tuple[ReasonTrace, MotionScript]:
    """Full closed loop: states, keyframes, per-milestone masks, then the script."""
    states = build_state_prompts(user_prompt, client)
    keyframes: list[Raster] = []
    edits: list[str] = []
    prev = None
    for prompt in states:
        frame, edit = next_keyframe(prev, prompt, client)
        keyframes.append(frame)
        if edit is not None:
            edits.append(edit)
        prev = frame
    masks = tuple(
        tuple(segment_entities(frame, entity_labels, client)) for frame in keyframes
    )
    trace = ReasonTrace(
        user_prompt=user_prompt,
        entity_labels=tuple(entity_labels),
        state_prompts=tuple(states),
        edit_instructions=tuple(edits),
        keyframes=tuple(keyframes),
        entity_masks=masks,
    )
    return trace, direct_motion(trace, client)


@dataclass
class RemoteVelocityModel:
    """Velocity model behind the wire protocol (role "velocity").

    The latent state travels as a base64 latent file; sigma rides in the
    prompt field. Record/replay applies exactly as for the other roles.
    """

    client: ReasonClient
    scratch: Path

    def evaluate(self, x_sigma: LatentTensor, sigma: float, conditioning=None) -> LatentTensor:
        self.scratch.mkdir(parents=True, exist_ok=True)
        state_path = self.scratch / "state.phyl"
        write_latent(state_path, x_sigma)
        request = make_request(
            "velocity",
            TEMPLATES["velocity"] + json.dumps({"sigma": sigma}),
            images=[state_path.read_bytes()],
        )
        response = self.client.call(request)
        payload = response.get("latent")
        if not isinstance(payload, str):
            raise MalformedResponse("velocity: expected {latent: b64}")
        try:
            blob = base64.b64decode(payload.encode("ascii"), validate=True)
        except (binascii.Error, UnicodeEncodeError) as exc:
            raise ImageDecodeError(f"velocity: bad base64 latent: {exc}") from exc
        out_path = self.scratch / "velocity.phyl"
        out_path.write_bytes(blob)
        return read_latent(out_path)
