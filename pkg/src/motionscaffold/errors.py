"""Exception types for every pipeline stage.

The CLI maps each group to a distinct exit-code family (see cli.EXIT_CODES),
so keep new exceptions attached to the stage that raises them.
"""


class ScaffoldError(Exception):
    """Base class for all errors raised by this package."""


# -- motion script ------------------------------------------------------------

class ScriptSyntaxError(ScaffoldError):
    """Script document is not well-formed (not parseable at all)."""


class ScriptValidationError(ScaffoldError):
    """Well-formed document violating an invariant; carries the field path."""

    def __init__(self, path: str, message: str):
        self.path = path
        self.message = message
        super().__init__(f"{path}: {message}")


class DegenerateTimeline(ScaffoldError):
    """Uniform milestone placement would collide two milestones (T < L)."""


# -- trajectory ----------------------------------------------------------------

class DegenerateSegment(ScaffoldError):
    """Segment with non-positive duration."""


class OutOfDomain(ScaffoldError):
    """Evaluation time outside [0, duration]."""


# -- compositor ----------------------------------------------------------------

class DimensionMismatch(ScaffoldError):
    """Rasters that must share dimensions do not."""


class Unfillable(ScaffoldError):
    """Inpainting has no known pixel to propagate from."""


class MissingAsset(ScaffoldError):
    """Script entity without a matching appearance asset."""


class EmptyMask(ScaffoldError):
    """Entity mask with no active pixels; no crop can be extracted."""


# -- latent --------------------------------------------------------------------

class StrideMismatch(ScaffoldError):
    """Tensor or raster dimensions not divisible by the codec strides."""


class FormatError(ScaffoldError):
    """Bad magic, version, dtype or structure in a binary file."""


class TruncatedFile(ScaffoldError):
    """Binary file ends before its declared payload."""


# -- fusion ----------------------------------------------------------------------

class ShapeMismatch(ScaffoldError):
    """Latent tensors or masks with incompatible shapes."""


class NonFinite(ScaffoldError):
    """NaN or infinity where finite values are required."""


class NonMonotoneStep(ScaffoldError):
    """Euler step that does not decrease the noise level."""


class InvalidSteps(ScaffoldError):
    """Schedule with fewer than one step."""


# -- reasoning clients -----------------------------------------------------------

class BackendError(ScaffoldError):
    """Live backend call failed or no transport is configured."""


class FixtureMiss(ScaffoldError):
    """Replay mode has no recorded response for a request digest."""

    def __init__(self, digest: str, role: str):
        self.digest = digest
        self.role = role
        super().__init__(f"no fixture for {role} request {digest}")


class MalformedResponse(ScaffoldError):
    """Backend response that does not match the role's schema."""


class ImageDecodeError(ScaffoldError):
    """Attached image payload could not be decoded."""


class MaskShapeError(ScaffoldError):
    """Segmentation mask dimensions differ from the keyframe."""
