"""Scenario configuration: JSON schema validation and typed assembly.

Config files are JSON validated against the published schema (unknown
keys rejected) plus a handful of cross-field checks; every diagnostic
names the offending field by its dotted path.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources

import jsonschema
import numpy as np

from .detector import DetectorConfig
from .flocking import AreaBounds, FlockConfig
from .fusion import FusionConfig, NllsConfig
from .vehicle import VehicleLimits


class ConfigError(ValueError):
    """Invalid scenario configuration; `path` names the offending field."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"config error at {path or '<root>'}: {message}")


def _schema() -> dict:
    text = resources.files("compton_swarm").joinpath("schema/scenario.schema.json").read_text()
    return json.loads(text)


@dataclass(frozen=True)
class SourceSpec:
    """Scripted source motion: static point, circle, or waypoint legs."""

    kind: str = "static"
    position: tuple = (50.0, 50.0, 0.0)
    center: tuple = (50.0, 50.0, 0.0)
    radius: float = 40.0
    speed: float = 1.0
    phase: float = 0.0
    waypoints: tuple = ()
    activity: float = 3e9


@dataclass(frozen=True)
class SimParams:
    dt: float = 0.05
    planning_rate: float = 2.0
    bus_latency: float = 0.1
    search_speed: float = 3.0
    lane_spacing: float = 20.0
    search_yaw_rate: float = 0.5


@dataclass(frozen=True)
class TerminationConfig:
    loss_timeout: float = 20.0
    tracking_limit: float = 180.0
    max_sim_time: float = 1200.0


@dataclass(frozen=True)
class ScenarioConfig:
    area: AreaBounds = field(default_factory=lambda: AreaBounds(0.0, 100.0, 0.0, 100.0))
    n_agents: int = 3
    flock: FlockConfig = field(default_factory=FlockConfig)
    fusion: FusionConfig = field(default_factory=FusionConfig)
    nlls: NllsConfig = field(default_factory=NllsConfig)
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    source: SourceSpec = field(default_factory=SourceSpec)
    vehicle: VehicleLimits = field(default_factory=VehicleLimits)
    sim: SimParams = field(default_factory=SimParams)
    termination: TerminationConfig = field(default_factory=TerminationConfig)
    frames_heterogeneous: bool = False
    resume_search_on_loss: bool = False
    seed: int = 0


def validate_config(raw: dict) -> None:
    """Schema plus cross-field validation; raises ConfigError."""
    validator = jsonschema.Draft202012Validator(_schema())
    errors = sorted(validator.iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        path = ".".join(str(p) for p in err.absolute_path)
        if err.validator == "additionalProperties":
            unexpected = sorted(set(err.instance) - set(err.schema.get("properties", {})))
            raise ConfigError(path, f"unknown key(s): {', '.join(unexpected)}")
        raise ConfigError(path, err.message)

    def get(section, key, default):
        return raw.get(section, {}).get(key, default)

    area = raw.get("area", {})
    if area.get("x_max", 100.0) <= area.get("x_min", 0.0):
        raise ConfigError("area.x_max", "must exceed area.x_min")
    if area.get("y_max", 100.0) <= area.get("y_min", 0.0):
        raise ConfigError("area.y_max", "must exceed area.y_min")

    n_agents = raw.get("n_agents", 3)
    spacing = 2.0 * math.pi / n_agents
    if get("flock", "deadband", 0.02) >= spacing:
        raise ConfigError("flock.deadband", f"must be below 2*pi/n_agents = {spacing:.4f}")

    min_theta = get("detector", "min_theta", math.radians(10.0))
    max_theta = get("detector", "max_theta", math.radians(80.0))
    if not 0.0 < min_theta < max_theta < math.pi:
        raise ConfigError("detector.min_theta", "need 0 < min_theta < max_theta < pi")

    kind = get("source", "kind", "static")
    if kind == "waypoints" and len(get("source", "waypoints", ())) < 2:
        raise ConfigError("source.waypoints", "waypoint scripts need at least two points")
    nlls_zmin = get("nlls", "z_min", 0.0)
    if get("nlls", "z_max", 20.0) <= nlls_zmin:
        raise ConfigError("nlls.z_max", "must exceed nlls.z_min")


def build_scenario(raw: dict) -> ScenarioConfig:
    """Validate a raw config dict and assemble the typed scenario."""
    validate_config(raw)
    area_d = raw.get("area", {})
    flock_d = raw.get("flock", {})
    fusion_d = raw.get("fusion", {})
    nlls_d = raw.get("nlls", {})
    det_d = raw.get("detector", {})
    src_d = raw.get("source", {})
    veh_d = raw.get("vehicle", {})
    sim_d = raw.get("sim", {})
    term_d = raw.get("termination", {})
    n_agents = raw.get("n_agents", 3)

    flock_defaults = FlockConfig()
    flock = FlockConfig(
        r=flock_d.get("r", flock_defaults.r),
        v=flock_d.get("v", flock_defaults.v),
        K=flock_d.get("K", flock_defaults.K),
        dt=flock_d.get("dt", flock_defaults.dt),
        beta_max=flock_d.get("beta_max", flock_defaults.beta_max),
        deadband=flock_d.get("deadband", flock_defaults.deadband),
        n_agents=n_agents,
        height=flock_d.get("height", flock_defaults.height),
    )
    nlls_defaults = NllsConfig()
    try:
        return ScenarioConfig(
            area=AreaBounds(
                x_min=area_d.get("x_min", 0.0), x_max=area_d.get("x_max", 100.0),
                y_min=area_d.get("y_min", 0.0), y_max=area_d.get("y_max", 100.0)),
            n_agents=n_agents,
            flock=flock,
            fusion=FusionConfig(**fusion_d),
            nlls=NllsConfig(
                grid=nlls_d.get("grid", nlls_defaults.grid),
                height=flock.height,
                z_min=nlls_d.get("z_min", nlls_defaults.z_min),
                z_max=nlls_d.get("z_max", nlls_defaults.z_max),
                max_iters=nlls_d.get("max_iters", nlls_defaults.max_iters),
                gradient_tol=nlls_d.get("gradient_tol", nlls_defaults.gradient_tol)),
            detector=DetectorConfig(**det_d),
            source=SourceSpec(
                kind=src_d.get("kind", "static"),
                position=tuple(src_d.get("position", (50.0, 50.0, 0.0))),
                center=tuple(src_d.get("center", (50.0, 50.0, 0.0))),
                radius=src_d.get("radius", 40.0),
                speed=src_d.get("speed", 1.0),
                phase=src_d.get("phase", 0.0),
                waypoints=tuple(tuple(w) for w in src_d.get("waypoints", ())),
                activity=src_d.get("activity", 3e9)),
            vehicle=VehicleLimits(**veh_d),
            sim=SimParams(**sim_d),
            termination=TerminationConfig(**term_d),
            frames_heterogeneous=raw.get("frames", {}).get("heterogeneous", False),
            resume_search_on_loss=raw.get("resume_search_on_loss", False),
            seed=raw.get("seed", 0),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError("", str(exc)) from exc


def load_config(path) -> tuple[dict, ScenarioConfig]:
    """Read, validate, and assemble a config file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("", "top-level config must be a JSON object")
    return raw, build_scenario(raw)


def scenario_source_position(spec: SourceSpec, t: float) -> np.ndarray:
    """Scripted source position at time t."""
    if spec.kind == "static":
        return np.asarray(spec.position, dtype=float)
    if spec.kind == "circular":
        omega = spec.speed / spec.radius
        ang = spec.phase + omega * t
        c = np.asarray(spec.center, dtype=float)
        return c + spec.radius * np.array([math.cos(ang), math.sin(ang), 0.0])
    # piecewise-linear waypoint legs at constant speed, holding the end
    pts = np.asarray(spec.waypoints, dtype=float)
    seg = np.diff(pts, axis=0)
    lengths = np.linalg.norm(seg, axis=1)
    total = float(np.sum(lengths))
    s = min(spec.speed * t, total)
    acc = 0.0
    for i, length in enumerate(lengths):
        if s <= acc + length or i == len(lengths) - 1:
            frac = 0.0 if length == 0.0 else (s - acc) / length
            return pts[i] + min(1.0, max(0.0, frac)) * seg[i]
        acc += length
    return pts[-1]
