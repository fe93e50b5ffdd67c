"""Decentralized motion planning: area search and encirclement.

Stage one assigns each agent a boustrophedon sweep over its own strip of
the search area. Stage two generates circular-arc trajectories about the
shared source estimate, with a repulsive bias angle that spreads the
agents toward uniform spacing on the circle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import angle_diff, wrap_angle


@dataclass(frozen=True)
class FlockConfig:
    """Encirclement parameters shared by every swarm member."""

    r: float = 12.0          # circle radius [m]
    v: float = 3.0           # tangential speed [m/s]
    K: int = 30              # trajectory steps per plan
    dt: float = 0.2          # trajectory sampling period [s]
    beta_max: float = 0.3    # bias magnitude ceiling [rad]
    deadband: float = 0.02   # spacing error treated as converged [rad]
    n_agents: int = 3
    height: float = 4.0      # shared flight altitude [m]

    def __post_init__(self):
        if self.r <= 0.0 or self.v <= 0.0 or self.dt <= 0.0 or self.K < 1:
            raise ValueError("flock parameters r, v, dt must be positive and K >= 1")
        if self.n_agents < 1:
            raise ValueError("need at least one agent")
        if not 0.0 <= self.deadband < self.uniform_spacing:
            raise ValueError("deadband must lie in [0, 2*pi/n_agents)")

    @property
    def uniform_spacing(self) -> float:
        """Target central angle between circle neighbors [rad]."""
        return 2.0 * math.pi / self.n_agents


@dataclass(frozen=True)
class PolarPos:
    """Position in the encirclement plane, polar about the hypothesis."""

    radius: float
    phi: float

    def __post_init__(self):
        if self.radius < 0.0:
            raise ValueError("radius must be nonnegative")


@dataclass(frozen=True)
class TrajectoryPoint:
    position: np.ndarray   # world frame [m]
    heading: float         # [rad]
    time_offset: float     # [s] from plan start


def nearest_neighbor_angle(self_pos: PolarPos, others: list[PolarPos]) -> float:
    """Signed central angle to the closest neighbor on the circle.

    Only azimuth matters; radii are ignored. Ties resolve to the neighbor
    with the lowest list index.
    """
    if not others:
        raise ValueError("agent has no neighbors")
    best = None
    for other in others:
        diff = angle_diff(self_pos.phi, other.phi)
        if best is None or abs(diff) < abs(best):
            best = diff
    return best


def bias_angle(theta_i: float, cfg: FlockConfig) -> float:
    """Repulsive azimuth offset pushing away from the nearest neighbor.

    Magnitude scales with the spacing deficit and vanishes inside the
    deadband, so a uniformly spaced swarm circulates without chatter.
    """
    spacing = cfg.uniform_spacing
    deficit = spacing - abs(theta_i)
    if abs(deficit) <= cfg.deadband:
        return 0.0
    scale = min(1.0, max(0.0, deficit / spacing))
    return -math.copysign(1.0, theta_i) * cfg.beta_max * scale if theta_i != 0.0 else 0.0


def generate_encirclement_trajectory(self_world: np.ndarray, hypothesis: np.ndarray,
                                     bias: float, cfg: FlockConfig) -> list[TrajectoryPoint]:
    """Circular-arc plan of K+1 samples about the hypothesis.

    Sample k sits at azimuth phi + bias + k*(v/r)*dt on the radius-r circle
    at the shared flight altitude, heading toward the hypothesis; the arc
    always advances counterclockwise. The first sample generally does not
    coincide with the agent's current position; the tracker absorbs the
    discontinuity.
    """
    dx = float(self_world[0] - hypothesis[0])
    dy = float(self_world[1] - hypothesis[1])
    phi = math.atan2(dy, dx) if (dx * dx + dy * dy) > 1e-24 else 0.0
    k = np.arange(cfg.K + 1)
    angles = phi + bias + k * (cfg.v / cfg.r) * cfg.dt
    xs = hypothesis[0] + cfg.r * np.cos(angles)
    ys = hypothesis[1] + cfg.r * np.sin(angles)
    headings = wrap_angle(angles + math.pi)  # face the circle center
    return [
        TrajectoryPoint(np.array([xs[i], ys[i], cfg.height]), float(headings[i]), float(i * cfg.dt))
        for i in range(cfg.K + 1)
    ]


@dataclass(frozen=True)
class AreaBounds:
    """Axis-aligned search area in the ground plane."""

    x_min: float
    x_max: float
    y_min: float
    y_max: float

    def __post_init__(self):
        if self.x_max <= self.x_min or self.y_max <= self.y_min:
            raise ValueError("area bounds must be non-degenerate")

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height_m(self) -> float:
        return self.y_max - self.y_min


def generate_search_paths(area: AreaBounds, n_agents: int, lane_spacing: float,
                          height: float) -> list[np.ndarray]:
    """Boustrophedon coverage paths, one per agent.

    The area splits into n equal-width vertical strips; each strip gets a
    lawnmower path whose lanes run the full y extent. Lane pitch never
    exceeds lane_spacing, so no point is farther than lane_spacing/2 from
    a lane in the sweep direction; a strip narrower than the spacing gets
    a single center lane.
    """
    if lane_spacing <= 0.0:
        raise ValueError("lane_spacing must be positive")
    if n_agents < 1:
        raise ValueError("need at least one agent")
    strip_w = area.width / n_agents
    paths = []
    for i in range(n_agents):
        x0 = area.x_min + i * strip_w
        n_lanes = max(1, math.ceil(strip_w / lane_spacing - 1e-12))
        pitch = strip_w / n_lanes
        points = []
        for lane in range(n_lanes):
            x = x0 + (lane + 0.5) * pitch
            ys = (area.y_min, area.y_max) if lane % 2 == 0 else (area.y_max, area.y_min)
            points.append([x, ys[0], height])
            points.append([x, ys[1], height])
        paths.append(np.asarray(points, dtype=float))
    return paths


def search_heading(t: float, yaw_rate: float) -> float:
    """Slowly rotating heading used while sweeping, wrapped to (-pi, pi]."""
    if yaw_rate < 0.0:
        raise ValueError("yaw_rate must be nonnegative")
    return wrap_angle(t * yaw_rate)
