"""Flow-matching sampling with motion-aware noise-consistent injection.

Everything here follows the linear interpolation path

    x_sigma = (1 - sigma) * x0 + sigma * eps,    sigma in [0, 1],

whose velocity field is v = eps - x0. A model prediction v at state (x_sigma,
sigma) therefore implies the components

    x0_hat  = x_sigma - sigma * v
    eps_hat = x0_hat + v = x_sigma + (1 - sigma) * v,

and injection replaces only the clean component inside the motion mask while
keeping the recovered noise:

    x0_tilde    = (1 - m) * x0_hat + m * x0_ref
    x_sigma_new = (1 - sigma) * x0_tilde + sigma * eps_hat.

Outside the mask this reconstruction is algebraically the identity, so
injection touches nothing but the planned motion region. The sampler is a
plain Euler integrator over a decreasing sigma schedule; injection applies at
every step with sigma >= sigma_min (the early, high-noise steps) and the
velocity is re-evaluated on the corrected state before stepping.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

import numpy as np

from .errors import InvalidSteps, NonFinite, NonMonotoneStep, ShapeMismatch
from .latent import LatentMask, LatentTensor


@dataclass(frozen=True)
class NoiseSchedule:
    """Strictly decreasing noise levels from 1.0 to 0.0; N steps, N+1 entries."""

    sigmas: tuple[float, ...]

    def __post_init__(self):
        s = self.sigmas
        if len(s) < 2 or s[0] != 1.0 or s[-1] != 0.0:
            raise InvalidSteps("schedule must run from 1.0 to 0.0")
        if any(not 0.0 <= v <= 1.0 for v in s):
            raise InvalidSteps("noise levels must lie in [0, 1]")
        if any(s[i + 1] >= s[i] for i in range(len(s) - 1)):
            raise InvalidSteps("noise levels must be strictly decreasing")

    @property
    def steps(self) -> int:
        return len(self.sigmas) - 1


@dataclass(frozen=True)
class InjectionConfig:
    mask: LatentMask          # where the scaffold overrides the model
    reference: LatentTensor   # clean scaffold latent
    sigma_min: float = 0.6    # inject at steps with sigma >= sigma_min

    def __post_init__(self):
        if not 0.0 <= self.sigma_min <= 1.0:
            raise InvalidSteps("sigma_min must be in [0, 1]")
        f, c, h, w = self.reference.shape
        if self.mask.shape != (f, 1, h, w):
            raise ShapeMismatch(
                f"mask {self.mask.shape} inconsistent with reference {self.reference.shape}"
            )


class VelocityModel(Protocol):
    def evaluate(
        self, x_sigma: LatentTensor, sigma: float, conditioning: object = None
    ) -> LatentTensor:
        """Predict the velocity at (x_sigma, sigma); output shape equals input."""
        ...


def _check_pair(x: LatentTensor, v: LatentTensor) -> None:
    if x.shape != v.shape:
        raise ShapeMismatch(f"tensor shapes differ: {x.shape} vs {v.shape}")


def recover_components(
    x_sigma: LatentTensor, sigma: float, v: LatentTensor
) -> tuple[LatentTensor, LatentTensor]:
    """Clean and noise components implied by a velocity prediction.

    The identity eps_hat - x0_hat = v holds exactly by construction.
    """
    _check_pair(x_sigma, v)
    if not 0.0 <= sigma <= 1.0:
        raise ValueError(f"sigma must be in [0, 1], got {sigma}")
    if not (np.isfinite(x_sigma.data).all() and np.isfinite(v.data).all()):
        raise NonFinite("recover_components requires finite inputs")
    x0_hat = x_sigma.data - sigma * v.data
    eps_hat = x_sigma.data + (1.0 - sigma) * v.data
    return LatentTensor(x0_hat), LatentTensor(eps_hat)


def inject_scaffold(
    x_sigma: LatentTensor, sigma: float, v: LatentTensor, cfg: InjectionConfig
) -> LatentTensor:
    """Replace the clean component with the scaffold inside the mask.

    Cells with m = 0 reconstruct to x_sigma (up to rounding); cells with m = 1
    become (1 - sigma) * x0_ref + sigma * eps_hat, preserving the recovered
    noise and with it the sampling trajectory's noise manifold.
    """
    _check_pair(x_sigma, v)
    if cfg.reference.shape != x_sigma.shape:
        raise ShapeMismatch(
            f"reference {cfg.reference.shape} vs state {x_sigma.shape}"
        )
    x0_hat, eps_hat = recover_components(x_sigma, sigma, v)
    m = cfg.mask.data  # (F, 1, H, W) broadcasts over channels
    x0_tilde = (1.0 - m) * x0_hat.data + m * cfg.reference.data
    return LatentTensor((1.0 - sigma) * x0_tilde + sigma * eps_hat.data)


def make_schedule(steps: int, kind: str = "linear") -> NoiseSchedule:
    """Linear schedule sigma_i = 1 - i/N for i = 0..N."""
    if kind != "linear":
        raise InvalidSteps(f"unknown schedule kind {kind!r}")
    if steps < 1:
        raise InvalidSteps(f"steps must be >= 1, got {steps}")
    return NoiseSchedule(tuple(1.0 - i / steps for i in range(steps + 1)))


def euler_step(
    x: LatentTensor, sigma_from: float, sigma_to: float, v: LatentTensor
) -> LatentTensor:
    """One explicit Euler update of dx/dsigma = v: x + (sigma_to - sigma_from) * v."""
    _check_pair(x, v)
    if sigma_to >= sigma_from:
        raise NonMonotoneStep(f"sigma must decrease, got {sigma_from} -> {sigma_to}")
    return LatentTensor(x.data + (sigma_to - sigma_from) * v.data)


def sample(
    init_noise: LatentTensor,
    model: VelocityModel,
    schedule: NoiseSchedule,
    injection: InjectionConfig | None = None,
    conditioning: object = None,
) -> LatentTensor:
    """Integrate from pure noise at sigma = 1 down to the clean state at 0.

    On injected steps the velocity is recomputed on the corrected state so the
    Euler update is consistent with it (one extra model call per such step).
    Deterministic given its inputs.
    """
    x = init_noise
    sigmas = schedule.sigmas
    for i in range(schedule.steps):
        sigma = sigmas[i]
        v = model.evaluate(x, sigma, conditioning)
        _check_pair(x, v)
        if injection is not None and sigma >= injection.sigma_min:
            x = inject_scaffold(x, sigma, v, injection)
            v = model.evaluate(x, sigma, conditioning)
            _check_pair(x, v)
        x = euler_step(x, sigma, sigmas[i + 1], v)
    return x


# -- analytic velocity models for verification ---------------------------------

@dataclass(frozen=True)
class OracleVelocityModel:
    """v = (x - target) / sigma: the implied clean component is always target.

    Memoryless by design; a single Euler step toward sigma' scales x - target
    by sigma'/sigma, so the sampler lands exactly on target at sigma = 0 for
    any step count. Guarded near sigma = 0 where the division blows up (the
    sampler itself never evaluates at sigma = 0).
    """

    target: LatentTensor

    def evaluate(self, x_sigma, sigma, conditioning=None) -> LatentTensor:
        diff = x_sigma.data - self.target.data
        if sigma <= 1e-6:
            return LatentTensor(diff)
        return LatentTensor(diff / sigma)


@dataclass(frozen=True)
class ZeroVelocityModel:
    """Frozen dynamics: the sample never moves."""

    def evaluate(self, x_sigma, sigma, conditioning=None) -> LatentTensor:
        return LatentTensor(np.zeros_like(x_sigma.data))


@dataclass(frozen=True)
class TrackingVelocityModel:
    """Velocity consistent with one fixed noise realization.

    v = (noise - x) / (1 - sigma) keeps the implied noise component pinned to
    `noise` while the implied clean component tracks whatever content the
    state carries, so injected corrections persist to sigma = 0 instead of
    being re-predicted away. At sigma = 1 (where the clean content of a pure
    noise state is undefined) the model commits to `target`, which is what
    un-injected cells converge to. This mimics how a well-behaved denoiser
    keeps refining the content already present in its input.
    """

    target: LatentTensor
    noise: LatentTensor

    def evaluate(self, x_sigma, sigma, conditioning=None) -> LatentTensor:
        if sigma >= 1.0 - 1e-6:
            return LatentTensor(self.noise.data - self.target.data)
        return LatentTensor((self.noise.data - x_sigma.data) / (1.0 - sigma))


def oracle_velocity_model(target: LatentTensor) -> OracleVelocityModel:
    return OracleVelocityModel(target)


def zero_velocity_model() -> ZeroVelocityModel:
    return ZeroVelocityModel()


def tracking_velocity_model(target: LatentTensor, noise: LatentTensor) -> TrackingVelocityModel:
    if target.shape != noise.shape:
        raise ShapeMismatch(f"target {target.shape} vs noise {noise.shape}")
    return TrackingVelocityModel(target, noise)
