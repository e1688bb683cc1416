"""Physically grounded motion planning, coarse scaffold rendering, and
scaffold-enforcing flow-matching sampling, with the reasoning stage behind a
record/replay wire protocol."""

from .compositor import (
    CoarseVideo,
    EntityAsset,
    composite_frame,
    extract_asset,
    inpaint_background,
    occupancy_map,
    render_coarse,
    warp_asset,
)
from .fusion import (
    InjectionConfig,
    NoiseSchedule,
    OracleVelocityModel,
    TrackingVelocityModel,
    VelocityModel,
    ZeroVelocityModel,
    euler_step,
    inject_scaffold,
    make_schedule,
    oracle_velocity_model,
    recover_components,
    sample,
    tracking_velocity_model,
    zero_velocity_model,
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
    ReasonTrace,
    build_state_prompts,
    direct_motion,
    next_keyframe,
    request_digest,
    run_reason_stage,
    segment_entities,
)
from .script import (
    EntityPlan,
    MotionScript,
    PrimitiveKind,
    StateVector,
    parse_script,
    resolve_timeline,
    serialize_script,
)
from .trajectory import (
    BallisticParams,
    DriftingParams,
    FrameStateTable,
    LinearParams,
    PrimitiveDefaults,
    eval_position,
    fit_primitive,
    interp_state,
    plan_frames,
)

__version__ = "0.1.0"
