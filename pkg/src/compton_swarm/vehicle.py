"""Vehicle kinematics: point-mass double integrator with a saturating tracker.

The tracker chases a (possibly discontinuous) reference trajectory with a
PD law on position and velocity, clamped so commanded acceleration, the
realized per-step velocity change, and speed all stay within the limits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .flocking import TrajectoryPoint
from .geometry import wrap_angle

# PD gains; k_v ~ 2*sqrt(k_p) keeps the chase near critically damped.
TRACKER_KP = 1.5
TRACKER_KV = 2.5


@dataclass(frozen=True)
class VehicleLimits:
    v_max: float = 8.0         # [m/s]
    a_max: float = 5.0         # [m/s^2]
    yaw_rate_max: float = 2.0  # [rad/s]

    def __post_init__(self):
        if min(self.v_max, self.a_max, self.yaw_rate_max) <= 0.0:
            raise ValueError("vehicle limits must be positive")


@dataclass(frozen=True)
class VehicleState:
    position: np.ndarray  # [m]
    velocity: np.ndarray  # [m/s]
    heading: float        # [rad]

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float))
        object.__setattr__(self, "velocity", np.asarray(self.velocity, dtype=float))


def _clamp_norm(v: np.ndarray, limit: float) -> np.ndarray:
    n = math.sqrt(float(v @ v))
    if n > limit:
        return v * (limit / n)
    return v


def step_toward_reference(state: VehicleState, p_ref: np.ndarray, v_ref: np.ndarray,
                          h_ref: float, limits: VehicleLimits, dt: float) -> VehicleState:
    """One integration step chasing a single reference sample.

    Guarantees ||velocity|| <= v_max and ||dv||/dt <= a_max exactly; the
    heading slews toward the reference at most yaw_rate_max.
    """
    accel = TRACKER_KP * (p_ref - state.position) + TRACKER_KV * (v_ref - state.velocity)
    accel = _clamp_norm(accel, limits.a_max)
    v_new = _clamp_norm(state.velocity + accel * dt, limits.v_max)
    v_new = state.velocity + _clamp_norm(v_new - state.velocity, limits.a_max * dt)
    p_new = state.position + v_new * dt
    dh = wrap_angle(h_ref - state.heading)
    max_dh = limits.yaw_rate_max * dt
    h_new = wrap_angle(state.heading + min(max_dh, max(-max_dh, dh)))
    return VehicleState(p_new, v_new, h_new)


def select_reference(trajectory: list[TrajectoryPoint], dt: float):
    """Reference (p, v, heading) for the current instant.

    Trajectory offsets are relative to now. The first sample at least one
    step in the future is selected (lookahead of one point), its velocity
    taken from the finite difference of adjacent samples, and its position
    back-propagated along that velocity so a vehicle already riding the
    trajectory feels no residual pull. Past the final sample the end is
    held with zero velocity.
    """
    idx = len(trajectory) - 1
    for i, pt in enumerate(trajectory):
        if pt.time_offset >= dt - 1e-12:
            idx = i
            break
    pt = trajectory[idx]
    if idx >= 1:
        prev = trajectory[idx - 1]
        span = pt.time_offset - prev.time_offset
        v_ref = (pt.position - prev.position) / span if span > 0.0 else np.zeros(3)
    elif len(trajectory) > 1:
        nxt = trajectory[1]
        span = nxt.time_offset - pt.time_offset
        v_ref = (nxt.position - pt.position) / span if span > 0.0 else np.zeros(3)
    else:
        v_ref = np.zeros(3)
    if trajectory[-1].time_offset < dt - 1e-12:
        v_ref = np.zeros(3)
    p_ref = pt.position - v_ref * pt.time_offset
    return p_ref, v_ref, pt.heading


def tracker_step(state: VehicleState, trajectory: list[TrajectoryPoint],
                 limits: VehicleLimits, dt: float) -> VehicleState:
    """Advance the vehicle one step along a reference trajectory."""
    if not trajectory:
        raise ValueError("trajectory must be non-empty")
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    p_ref, v_ref, h_ref = select_reference(trajectory, dt)
    return step_toward_reference(state, p_ref, v_ref, h_ref, limits, dt)
