"""Command-line pipeline: script validation, planning, coarse rendering,
latent encoding, mask building, injection debugging, sampling, the reasoning
stage, and the whole pipeline end to end.

Configuration comes from flags, falling back to a flat key=value config file
(--config), falling back to built-in defaults. Every stage writes its
artifacts to disk, and a `pipeline` run is the exact composition of the
individual stages over those files, so (config, fixtures, seed) determine
every output byte. Failures exit nonzero with one machine-parseable JSON
error line on stderr; each module's errors map to their own exit-code family.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path

from . import errors as err
from .compositor import CoarseVideo, EntityAsset, extract_asset, render_coarse
from .fusion import (
    InjectionConfig,
    ZeroVelocityModel,
    inject_scaffold,
    make_schedule,
    oracle_velocity_model,
    sample,
)
from .latent import (
    CodecSpec,
    LatentMask,
    LatentTensor,
    decode_latent,
    downsample_mask,
    encode_coarse,
    read_latent,
    seeded_normal,
    write_latent,
)
from .raster import Raster, read_pgm, read_ppm, write_pgm, write_ppm
from .reason import (
    FixtureStore,
    ReasonClient,
    RemoteVelocityModel,
    http_transport,
    run_reason_stage,
)
from .report import plot_occupancy_coverage, plot_trajectories, write_state_table
from .script import parse_script, serialize_script
from .trajectory import plan_frames

FRAME_NAME = "frame_{:05d}.ppm"
MASK_NAME = "mask_{:05d}.pgm"
KEYFRAME_NAME = "keyframe_{:05d}.ppm"
KEYMASK_NAME = "mask_{:05d}_{}.pgm"
BACKGROUND_PPM = "background.ppm"
STATES_TSV = "states.tsv"
TRAJECTORIES_PNG = "trajectories.png"
COVERAGE_PNG = "coverage.png"
REFERENCE_LATENT = "reference.phyl"
MASK_LATENT = "mask.phyl"
INIT_NOISE_LATENT = "init_noise.phyl"
FINAL_LATENT = "final.phyl"
FUSED_LATENT = "fused.phyl"
SCRIPT_JSON = "script.json"
PROMPTS_JSON = "prompts.json"

DEFAULTS = {
    "width": 64,
    "height": 64,
    "steps": 64,
    "sigma_min": 0.6,
    "dilation": 1,
    "seed": 0,
    "codec": "identity",
    "mode": "replay",
    "model": "oracle",
}

_EXIT_FAMILIES = [
    (10, (err.ScriptSyntaxError, err.ScriptValidationError, err.DegenerateTimeline)),
    (20, (err.DegenerateSegment, err.OutOfDomain)),
    (30, (err.DimensionMismatch, err.Unfillable, err.MissingAsset, err.EmptyMask)),
    (40, (err.StrideMismatch, err.FormatError, err.TruncatedFile)),
    (50, (err.ShapeMismatch, err.NonFinite, err.NonMonotoneStep, err.InvalidSteps)),
    (60, (err.BackendError, err.FixtureMiss, err.MalformedResponse,
          err.ImageDecodeError, err.MaskShapeError)),
]


def exit_code_for(exc: BaseException) -> int:
    for code, types in _EXIT_FAMILIES:
        if isinstance(exc, types):
            return code
    if isinstance(exc, OSError):
        return 70
    if isinstance(exc, ValueError):
        return 2
    return 1


def parse_codec(text: str) -> CodecSpec:
    if text == "identity":
        return CodecSpec("identity", 1, 1, 3)
    if text.startswith("block:"):
        parts = text.split(":")
        if len(parts) != 4:
            raise ValueError(f"codec must be identity or block:SS:TS:C, got {text!r}")
        try:
            ss, ts, channels = (int(p) for p in parts[1:])
        except ValueError:
            raise ValueError(f"non-integer codec parameter in {text!r}") from None
        return CodecSpec("block", ss, ts, channels)
    raise ValueError(f"codec must be identity or block:SS:TS:C, got {text!r}")


def load_config(path) -> dict[str, str]:
    values: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in _CONFIG_KEYS:
            raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
        values[key] = value.strip()
    return values


_CONFIG_KEYS = {
    "script", "assets", "fixtures", "out", "width", "height", "frames",
    "steps", "sigma_min", "dilation", "seed", "codec", "mode", "endpoint",
    "prompt", "labels", "model", "target", "reference", "latent_mask", "sigma",
}

_CONVERTERS = {
    "width": int, "height": int, "frames": int, "steps": int,
    "sigma_min": float, "dilation": int, "seed": int, "sigma": float,
}


@dataclass(frozen=True)
class PipelineConfig:
    """Resolved settings for a full pipeline run; the seed alone determines
    the initial noise (via the named generator in the latent module)."""

    prompt: str
    labels: tuple[str, ...]
    fixtures: str | None
    out: Path
    width: int
    height: int
    codec: CodecSpec
    steps: int
    sigma_min: float
    dilation: int
    seed: int
    mode: str
    endpoint: str | None
    model: str

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("render size must be positive")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if not 0.0 <= self.sigma_min <= 1.0:
            raise ValueError("sigma_min must be in [0, 1]")
        if self.dilation < 0:
            raise ValueError("dilation must be >= 0")
        if self.seed < 0:
            raise ValueError("seed must be a non-negative integer")
        if not self.labels:
            raise ValueError("at least one entity label is required")


def resolve(ns: argparse.Namespace, key: str, required: bool = False):
    """Flag value, else config-file value, else default; optionally required."""
    value = getattr(ns, key, None)
    if value is None and ns._config is not None:
        raw = ns._config.get(key)
        if raw is not None:
            value = _CONVERTERS.get(key, str)(raw)
    if value is None:
        value = DEFAULTS.get(key)
    if value is None and required:
        raise ValueError(f"missing required option --{key.replace('_', '-')}")
    if key == "seed" and value is not None and value < 0:
        raise ValueError("--seed must be a non-negative integer")
    return value


# -- stage implementations -------------------------------------------------------


def stage_plan(script_path, out_dir) -> None:
    script = parse_script(Path(script_path).read_text(encoding="utf-8"))
    table = plan_frames(script)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_state_table(table, out / STATES_TSV)
    plot_trajectories(script, table, out / TRAJECTORIES_PNG)


def _load_assets(assets_dir, script):
    assets = []
    for entity in script.entities:
        crop_path = Path(assets_dir) / f"{entity.entity_id}.ppm"
        mask_path = Path(assets_dir) / f"{entity.entity_id}.pgm"
        if not crop_path.exists() or not mask_path.exists():
            raise err.MissingAsset(
                f"no asset pair for entity {entity.entity_id!r} in {assets_dir}"
            )
        assets.append(
            EntityAsset(entity.entity_id, read_ppm(crop_path), read_pgm(mask_path))
        )
    return assets


def stage_render(script_path, assets_dir, out_dir, width, height) -> CoarseVideo:
    script = parse_script(Path(script_path).read_text(encoding="utf-8"))
    background_key = read_ppm(Path(assets_dir) / BACKGROUND_PPM)
    video = render_coarse(script, _load_assets(assets_dir, script), background_key, width, height)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for t, (frame, occ) in enumerate(zip(video.frames, video.occupancy)):
        write_ppm(frame, out / FRAME_NAME.format(t))
        write_pgm(occ, out / MASK_NAME.format(t))
    plot_occupancy_coverage(video, out / COVERAGE_PNG)
    return video


def _read_video(render_dir) -> CoarseVideo:
    render_dir = Path(render_dir)
    frame_paths = sorted(render_dir.glob("frame_*.ppm"))
    if not frame_paths:
        raise err.MissingAsset(f"no frame_*.ppm files in {render_dir}")
    frames = tuple(read_ppm(p) for p in frame_paths)
    mask_paths = sorted(render_dir.glob("mask_*.pgm"))
    if len(mask_paths) == len(frame_paths):
        occupancy = tuple(read_pgm(p) for p in mask_paths)
    else:
        occupancy = tuple(
            Raster.zeros(frames[0].width, frames[0].height) for _ in frames
        )
    # fps is irrelevant to encoding; the on-disk frames do not record it.
    return CoarseVideo(
        frames=frames, occupancy=occupancy,
        width=frames[0].width, height=frames[0].height, fps=1.0,
    )


def stage_encode(render_dir, codec: CodecSpec, out_dir) -> Path:
    video = _read_video(render_dir)
    latent = encode_coarse(video, codec)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / REFERENCE_LATENT
    write_latent(path, latent)
    return path


def stage_mask(render_dir, codec: CodecSpec, dilation: int, out_dir) -> Path:
    render_dir = Path(render_dir)
    mask_paths = sorted(render_dir.glob("mask_*.pgm"))
    if not mask_paths:
        raise err.MissingAsset(f"no mask_*.pgm files in {render_dir}")
    occupancy = [read_pgm(p) for p in mask_paths]
    mask = downsample_mask(occupancy, codec, dilation)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / MASK_LATENT
    # Masks persist in the ordinary latent file format.
    write_latent(path, LatentTensor(mask.data))
    return path


def _read_latent_mask(path) -> LatentMask:
    return LatentMask(read_latent(path).data)


def stage_fuse(state_path, velocity_path, reference_path, mask_path, sigma, out_dir) -> Path:
    x_sigma = read_latent(state_path)
    velocity = read_latent(velocity_path)
    cfg = InjectionConfig(
        mask=_read_latent_mask(mask_path),
        reference=read_latent(reference_path),
        sigma_min=0.0,
    )
    fused = inject_scaffold(x_sigma, sigma, velocity, cfg)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / FUSED_LATENT
    write_latent(path, fused)
    return path


def stage_sample(
    out_dir,
    steps: int,
    sigma_min: float,
    seed: int,
    model_name: str,
    codec: CodecSpec | None = None,
    target_path=None,
    reference_path=None,
    mask_path=None,
    shape_fallback: tuple[int, int, int, int] | None = None,
    reason_client: ReasonClient | None = None,
) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    injection = None
    if reference_path is not None and mask_path is not None:
        injection = InjectionConfig(
            mask=_read_latent_mask(mask_path),
            reference=read_latent(reference_path),
            sigma_min=sigma_min,
        )
    elif (reference_path is None) != (mask_path is None):
        raise ValueError("--reference and --latent-mask must be given together")

    target = read_latent(target_path) if target_path is not None else None
    if model_name == "oracle":
        if target is None:
            raise ValueError("model=oracle needs --target LATENT")
        model = oracle_velocity_model(target)
    elif model_name == "zero":
        model = ZeroVelocityModel()
    elif model_name == "remote":
        if reason_client is None:
            raise ValueError("model=remote needs --endpoint or fixtures")
        model = RemoteVelocityModel(client=reason_client, scratch=out / "remote_scratch")
    else:
        raise ValueError(f"unknown model {model_name!r} (oracle|zero|remote)")

    if injection is not None:
        shape = injection.reference.shape
    elif target is not None:
        shape = target.shape
    elif shape_fallback is not None:
        shape = shape_fallback
    else:
        raise ValueError("cannot infer latent shape; give --target/--reference or "
                         "--width/--height/--frames with --codec")

    noise_path = out / INIT_NOISE_LATENT
    write_latent(noise_path, seeded_normal(seed, shape))
    init_noise = read_latent(noise_path)  # pin to the persisted f32 values

    final = sample(init_noise, model, make_schedule(steps), injection)
    final_path = out / FINAL_LATENT
    write_latent(final_path, final)

    if codec is not None:
        refined = out / "refined"
        refined.mkdir(parents=True, exist_ok=True)
        for t, frame in enumerate(decode_latent(read_latent(final_path), codec)):
            write_ppm(frame, refined / FRAME_NAME.format(t))
    return final_path


def stage_reason(prompt, labels, client: ReasonClient, out_dir) -> Path:
    """Run the reasoning loop; write keyframes, masks, assets and the script."""
    trace, script = run_reason_stage(prompt, labels, client)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for i, keyframe in enumerate(trace.keyframes, start=1):
        write_ppm(keyframe, out / KEYFRAME_NAME.format(i))
    for i, per_entity in enumerate(trace.entity_masks, start=1):
        for label, mask in zip(trace.entity_labels, per_entity):
            write_pgm(mask, out / KEYMASK_NAME.format(i, label))
    (out / PROMPTS_JSON).write_text(
        json.dumps(
            {
                "user_prompt": trace.user_prompt,
                "entity_labels": list(trace.entity_labels),
                "state_prompts": list(trace.state_prompts),
                "edit_instructions": list(trace.edit_instructions),
            },
            indent=2,
            sort_keys=True,
        ) + "\n",
        encoding="utf-8",
    )
    script_path = out / SCRIPT_JSON
    script_path.write_text(serialize_script(script), encoding="utf-8")

    assets_dir = out / "assets"
    assets_dir.mkdir(parents=True, exist_ok=True)
    write_ppm(trace.keyframes[0], assets_dir / BACKGROUND_PPM)
    for label, mask in zip(trace.entity_labels, trace.entity_masks[0]):
        asset = extract_asset(trace.keyframes[0], mask, label)
        write_ppm(asset.crop, assets_dir / f"{label}.ppm")
        write_pgm(asset.mask, assets_dir / f"{label}.pgm")
    return script_path


def _make_reason_client(ns) -> ReasonClient:
    mode = resolve(ns, "mode")
    fixtures = resolve(ns, "fixtures", required=(mode != "passthrough"))
    endpoint = resolve(ns, "endpoint")
    transport = http_transport(endpoint) if endpoint else None
    store_dir = Path(fixtures) if fixtures else Path(".")
    return ReasonClient(store=FixtureStore(store_dir, mode=mode), transport=transport)


# -- subcommand handlers ----------------------------------------------------------


def cmd_validate(ns) -> int:
    parse_script(Path(resolve(ns, "script", required=True)).read_text(encoding="utf-8"))
    print("ok")
    return 0


def cmd_plan(ns) -> int:
    stage_plan(resolve(ns, "script", required=True), resolve(ns, "out", required=True))
    return 0


def cmd_render(ns) -> int:
    stage_render(
        resolve(ns, "script", required=True),
        resolve(ns, "assets", required=True),
        resolve(ns, "out", required=True),
        resolve(ns, "width"),
        resolve(ns, "height"),
    )
    return 0


def cmd_encode(ns) -> int:
    stage_encode(ns.input_dir, parse_codec(resolve(ns, "codec")), resolve(ns, "out", required=True))
    return 0


def cmd_mask(ns) -> int:
    stage_mask(
        ns.input_dir,
        parse_codec(resolve(ns, "codec")),
        resolve(ns, "dilation"),
        resolve(ns, "out", required=True),
    )
    return 0


def cmd_fuse(ns) -> int:
    sigma = resolve(ns, "sigma")
    if sigma is None:
        raise ValueError("fuse needs --sigma LEVEL")
    stage_fuse(
        ns.state, ns.velocity,
        resolve(ns, "reference", required=True),
        resolve(ns, "latent_mask", required=True),
        sigma,
        resolve(ns, "out", required=True),
    )
    return 0


def cmd_sample(ns) -> int:
    model_name = resolve(ns, "model")
    codec_text = resolve(ns, "codec")
    codec = parse_codec(codec_text)
    shape_fallback = None
    frames = resolve(ns, "frames")
    if frames is not None:
        width = resolve(ns, "width")
        height = resolve(ns, "height")
        if (frames % codec.temporal_stride or width % codec.spatial_stride
                or height % codec.spatial_stride):
            raise err.StrideMismatch(
                f"{frames} frames / {width}x{height} not divisible by codec strides"
            )
        shape_fallback = (
            frames // codec.temporal_stride,
            codec.channels,
            height // codec.spatial_stride,
            width // codec.spatial_stride,
        )
    client = None
    if model_name == "remote":
        client = _make_reason_client(ns)
    stage_sample(
        resolve(ns, "out", required=True),
        resolve(ns, "steps"),
        resolve(ns, "sigma_min"),
        resolve(ns, "seed"),
        model_name,
        codec=codec,
        target_path=resolve(ns, "target"),
        reference_path=resolve(ns, "reference"),
        mask_path=resolve(ns, "latent_mask"),
        shape_fallback=shape_fallback,
        reason_client=client,
    )
    return 0


def cmd_reason(ns) -> int:
    labels = resolve(ns, "labels", required=True)
    stage_reason(
        resolve(ns, "prompt", required=True),
        [l.strip() for l in labels.split(",") if l.strip()],
        _make_reason_client(ns),
        resolve(ns, "out", required=True),
    )
    return 0


def pipeline_config(ns) -> PipelineConfig:
    labels = resolve(ns, "labels", required=True)
    return PipelineConfig(
        prompt=resolve(ns, "prompt", required=True),
        labels=tuple(l.strip() for l in labels.split(",") if l.strip()),
        fixtures=resolve(ns, "fixtures"),
        out=Path(resolve(ns, "out", required=True)),
        width=resolve(ns, "width"),
        height=resolve(ns, "height"),
        codec=parse_codec(resolve(ns, "codec")),
        steps=resolve(ns, "steps"),
        sigma_min=resolve(ns, "sigma_min"),
        dilation=resolve(ns, "dilation"),
        seed=resolve(ns, "seed"),
        mode=resolve(ns, "mode"),
        endpoint=resolve(ns, "endpoint"),
        model=resolve(ns, "model"),
    )


def run_pipeline(cfg: PipelineConfig, client: ReasonClient) -> None:
    script_path = stage_reason(cfg.prompt, list(cfg.labels), client, cfg.out / "reason")
    stage_plan(script_path, cfg.out / "plan")
    stage_render(
        script_path, cfg.out / "reason" / "assets", cfg.out / "render",
        cfg.width, cfg.height,
    )
    latent_dir = cfg.out / "latent"
    reference_path = stage_encode(cfg.out / "render", cfg.codec, latent_dir)
    mask_path = stage_mask(cfg.out / "render", cfg.codec, cfg.dilation, latent_dir)
    stage_sample(
        latent_dir,
        cfg.steps,
        cfg.sigma_min,
        cfg.seed,
        cfg.model,
        codec=cfg.codec,
        target_path=reference_path if cfg.model == "oracle" else None,
        reference_path=reference_path,
        mask_path=mask_path,
        reason_client=client if cfg.model == "remote" else None,
    )


def cmd_pipeline(ns) -> int:
    run_pipeline(pipeline_config(ns), _make_reason_client(ns))
    return 0


# -- argument parsing ---------------------------------------------------------------


def _add_options(parser: argparse.ArgumentParser, *names: str) -> None:
    specs = {
        "script": dict(metavar="PATH", help="motion script document"),
        "assets": dict(metavar="DIR", help="entity asset directory"),
        "fixtures": dict(metavar="DIR", help="record/replay fixture directory"),
        "out": dict(metavar="DIR", help="output directory"),
        "width": dict(type=int), "height": dict(type=int),
        "frames": dict(type=int, help="frame count for latent shape inference"),
        "steps": dict(type=int, help="sampler steps"),
        "sigma-min": dict(type=float, dest="sigma_min",
                          help="inject at steps with sigma >= this"),
        "dilation": dict(type=int, help="latent mask dilation radius"),
        "seed": dict(type=int, help="noise seed (unsigned)"),
        "codec": dict(help="identity | block:SS:TS:C"),
        "mode": dict(choices=["record", "replay", "passthrough"]),
        "endpoint": dict(metavar="URL", help="live backend endpoint"),
        "prompt": dict(help="user prompt for the reasoning stage"),
        "labels": dict(help="comma-separated entity labels"),
        "model": dict(choices=["oracle", "zero", "remote"]),
        "target": dict(metavar="LATENT", help="oracle target latent file"),
        "reference": dict(metavar="LATENT", help="scaffold latent for injection"),
        "latent-mask": dict(metavar="LATENT", dest="latent_mask",
                            help="binary latent mask for injection"),
        "sigma": dict(type=float, help="noise level for a single fuse step"),
    }
    for name in names:
        parser.add_argument(f"--{name}", **specs[name])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="motionscaffold",
        description="Plan physically grounded motion, render a coarse scaffold, "
                    "and enforce it during flow-matching sampling.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name, handler, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", metavar="PATH", help="flat key=value config file")
        p.set_defaults(handler=handler)
        return p

    p = command("validate", cmd_validate, "check a script document")
    _add_options(p, "script")

    p = command("plan", cmd_plan, "expand a script into a per-frame state table")
    _add_options(p, "script", "out")

    p = command("render", cmd_render, "render the coarse video and occupancy maps")
    _add_options(p, "script", "assets", "out", "width", "height")

    p = command("encode", cmd_encode, "encode rendered frames to the reference latent")
    p.add_argument("input_dir", metavar="RENDER_DIR")
    _add_options(p, "codec", "out")

    p = command("mask", cmd_mask, "downsample occupancy maps to a latent mask")
    p.add_argument("input_dir", metavar="RENDER_DIR")
    _add_options(p, "codec", "dilation", "out")

    p = command("fuse", cmd_fuse, "apply one injection step to a latent (debugging)")
    p.add_argument("state", metavar="STATE_LATENT")
    p.add_argument("velocity", metavar="VELOCITY_LATENT")
    _add_options(p, "reference", "latent-mask", "sigma", "out")

    p = command("sample", cmd_sample, "run flow-matching sampling")
    _add_options(p, "steps", "sigma-min", "seed", "model", "target", "reference",
                 "latent-mask", "codec", "width", "height", "frames", "out",
                 "fixtures", "mode", "endpoint")

    p = command("reason", cmd_reason, "run the reasoning stage via fixtures")
    _add_options(p, "prompt", "labels", "fixtures", "mode", "endpoint", "out")

    p = command("pipeline", cmd_pipeline, "run all stages")
    _add_options(p, "prompt", "labels", "fixtures", "mode", "endpoint", "out",
                 "width", "height", "steps", "sigma-min", "dilation", "seed",
                 "codec", "model")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        ns._config = load_config(ns.config) if getattr(ns, "config", None) else None
        return ns.handler(ns)
    except (err.ScaffoldError, OSError, ValueError) as exc:
        code = exit_code_for(exc)
        line = {"error": type(exc).__name__, "message": str(exc), "code": code}
        print(json.dumps(line), file=sys.stderr)
        return code


if __name__ == "__main__":
    raise SystemExit(main())
