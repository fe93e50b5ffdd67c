"""Synthetic Compton measurement generation.

Produces detection times from an inhomogeneous Poisson process driven by
inverse-square flux, and cones that are geometrically consistent with the
true source direction (half-angle perturbed by Gaussian noise).

All randomness flows through an injected numpy Generator; there is no
module-level RNG state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import ComptonCone, Pose, _any_perpendicular, unit


@dataclass(frozen=True)
class SourceState:
    """Point gamma source: position [m], activity [Bq], velocity [m/s]."""

    position: np.ndarray
    activity: float
    velocity: np.ndarray = None

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float))
        vel = np.zeros(3) if self.velocity is None else np.asarray(self.velocity, dtype=float)
        object.__setattr__(self, "velocity", vel)
        if self.activity <= 0.0:
            raise ValueError("source activity must be positive")


@dataclass(frozen=True)
class DetectorConfig:
    """Detector response parameters.

    sensitive_area: chip area [m^2], default 14 mm x 14 mm.
    intrinsic_efficiency: fraction of incident photons yielding a usable
        two-interaction event.
    fov_half_angle: acceptance cone about the mount axis [rad]; pi means
        no hard cutoff (the cosine projection still zeroes the rear).
    angular_noise_sigma: std of the Gaussian half-angle perturbation [rad].
    min_theta/max_theta: accepted scattering-angle window [rad].
    rate_cap: hard ceiling on the event rate [1/s], bounds the flux model
        as the source distance approaches zero.
    """

    sensitive_area: float = 14e-3 * 14e-3
    intrinsic_efficiency: float = 0.01
    fov_half_angle: float = math.pi
    angular_noise_sigma: float = 0.05
    min_theta: float = math.radians(10.0)
    max_theta: float = math.radians(80.0)
    rate_cap: float = 50.0

    def __post_init__(self):
        if not 0.0 < self.intrinsic_efficiency <= 1.0:
            raise ValueError("intrinsic_efficiency must lie in (0, 1]")
        if not 0.0 < self.min_theta < self.max_theta < math.pi:
            raise ValueError("scattering-angle window must satisfy 0 < min < max < pi")
        if self.angular_noise_sigma < 0.0:
            raise ValueError("angular_noise_sigma must be nonnegative")


@dataclass(frozen=True)
class MeasurementEvent:
    """Timestamped cone tagged with its producing agent and frame."""

    time: float
    cone: ComptonCone
    agent_id: int
    frame_id: int

    def __post_init__(self):
        if self.time < 0.0:
            raise ValueError("event time must be nonnegative")


# Mount axis in the detector body frame (camera looks along body +x).
MOUNT_AXIS_BODY = np.array([1.0, 0.0, 0.0])


def expected_event_rate(source: SourceState, detector_pose: Pose, cfg: DetectorConfig) -> float:
    """Expected Compton event rate [1/s] for a detector pose.

    Point-source inverse-square flux through the cosine-projected chip
    area, scaled by the intrinsic efficiency. Zero outside the field of
    view; capped at cfg.rate_cap as the distance approaches zero.
    """
    offset = source.position - detector_pose.position
    d2 = float(offset @ offset)
    if d2 == 0.0:
        return cfg.rate_cap
    mount_axis = detector_pose.rotate(MOUNT_AXIS_BODY)
    cos_psi = float(offset @ mount_axis) / math.sqrt(d2)
    cos_psi = min(1.0, max(-1.0, cos_psi))
    if math.acos(cos_psi) > cfg.fov_half_angle:
        return 0.0
    rate = (
        source.activity
        * cfg.intrinsic_efficiency
        * cfg.sensitive_area
        * max(0.0, cos_psi)
        / (4.0 * math.pi * d2)
    )
    return min(rate, cfg.rate_cap)


def sample_detections(source_traj, detector_traj, cfg: DetectorConfig,
                      dt: float, horizon: float, rng: np.random.Generator) -> list[float]:
    """Detection times over [0, horizon) from the inhomogeneous rate.

    `source_traj(t)` returns a SourceState and `detector_traj(t)` a Pose.
    Per step of length dt the count is Poisson with mean rate(t)*dt and
    event times are placed uniformly within the step. Identical seeds
    reproduce identical output.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    times: list[float] = []
    t = 0.0
    while t < horizon:
        step = min(dt, horizon - t)
        rate = expected_event_rate(source_traj(t), detector_traj(t), cfg)
        n = int(rng.poisson(rate * step)) if rate > 0.0 else 0
        if n:
            times.extend(sorted(t + rng.uniform(0.0, step, size=n)))
        t += dt
    return times


def synthesize_cone(true_source: np.ndarray, detector_pose: Pose,
                    cfg: DetectorConfig, rng: np.random.Generator) -> ComptonCone:
    """Generate one cone whose noiseless surface contains the true source.

    The half-angle is drawn uniformly from the accepted scattering window,
    the axis placed at exactly that angle from the source direction at a
    uniform azimuth, and only the half-angle is then perturbed by Gaussian
    noise (energy error moves the reconstructed angle, not the axis).
    """
    to_source = unit(np.asarray(true_source, dtype=float) - detector_pose.position)
    theta = float(rng.uniform(cfg.min_theta, cfg.max_theta))
    azimuth = float(rng.uniform(0.0, 2.0 * math.pi))
    e1 = _any_perpendicular(to_source)
    e2 = np.cross(to_source, e1)
    axis = (
        math.cos(theta) * to_source
        + math.sin(theta) * (math.cos(azimuth) * e1 + math.sin(azimuth) * e2)
    )
    half_angle = theta
    if cfg.angular_noise_sigma > 0.0:
        half_angle += float(rng.normal(0.0, cfg.angular_noise_sigma))
        half_angle = min(math.pi - 1e-9, max(1e-9, half_angle))
    return ComptonCone(detector_pose.position.copy(), unit(axis), half_angle)
