"""Deterministic discrete-time world: agents, message bus, scenario loop.

Every run is a pure function of (config, seed): all randomness flows from
one seeded generator in a fixed call order, agents step in id order, and
the produced RunLog serializes to byte-identical JSON Lines.
"""

from __future__ import annotations

import math
from dataclasses import asdict

import numpy as np

from .config import ScenarioConfig, scenario_source_position
from .detector import MeasurementEvent, SourceState, expected_event_rate, synthesize_cone
from .flocking import (
    FlockConfig,
    PolarPos,
    bias_angle,
    generate_encirclement_trajectory,
    generate_search_paths,
    nearest_neighbor_angle,
    search_heading,
)
from .frames import FrameTransform
from .fusion import (
    FusionConfig,
    Hypothesis,
    InitializationError,
    NllsConfig,
    SingularCorrectionError,
    fuse_cone,
    init_hypothesis_nlls,
)
from .geometry import Pose, quat_from_yaw, wrap_angle
from .runlog import SCHEMA_VERSION, RunLog
from .vehicle import VehicleLimits, VehicleState, step_toward_reference

SEARCHING = "searching"
TRACKING = "tracking"

# Salted substreams so optional features never disturb the main event RNG.
_FRAME_SALT = 0xF7A3E5


class MessageBus:
    """Broadcast queue: FIFO per sender, fixed latency to other agents,
    immediate self-delivery."""

    def __init__(self, n_agents: int, latency: float):
        if latency < 0.0:
            raise ValueError("latency must be nonnegative")
        self.latency = latency
        self._queues: list[list] = [[] for _ in range(n_agents)]
        self._cursors = [[0] * n_agents for _ in range(n_agents)]
        self._seq = 0

    def post(self, sender: int, send_time: float, payload):
        self._queues[sender].append((send_time, self._seq, payload))
        self._seq += 1

    def deliver(self, recipient: int, now: float):
        """Messages newly visible to `recipient`, ordered by (time, sender)."""
        out = []
        cursors = self._cursors[recipient]
        for sender, queue in enumerate(self._queues):
            horizon = now if sender == recipient else now - self.latency
            i = cursors[sender]
            while i < len(queue) and queue[i][0] <= horizon:
                send_time, seq, payload = queue[i]
                out.append((send_time, sender, seq, payload))
                i += 1
            cursors[sender] = i
        out.sort(key=lambda item: (item[0], item[1], item[2]))
        return [item[3] for item in out]


class _SearchPlan:
    """Timed boustrophedon reference: position/velocity at any t."""

    def __init__(self, waypoints: np.ndarray, speed: float):
        self.points = waypoints
        seg = np.diff(waypoints, axis=0)
        self.seg_dir = np.zeros_like(seg)
        lengths = np.linalg.norm(seg, axis=1)
        nonzero = lengths > 0.0
        self.seg_dir[nonzero] = seg[nonzero] / lengths[nonzero, None]
        self.cum = np.concatenate([[0.0], np.cumsum(lengths)])
        self.total = float(self.cum[-1])
        self.speed = speed

    def reference(self, t: float):
        s = self.speed * t
        if s >= self.total or self.total == 0.0:
            return self.points[-1], np.zeros(3)
        i = int(np.searchsorted(self.cum, s, side="right")) - 1
        i = min(max(i, 0), len(self.points) - 2)
        p = self.points[i] + self.seg_dir[i] * (s - self.cum[i])
        return p, self.seg_dir[i] * self.speed


class SwarmAgent:
    """Estimation and planning state machine for one vehicle.

    Measurements, the hypothesis, and encirclement plans live in the
    agent's own coordinate frame; `frame` maps that frame to the world and
    `from_frames` maps every sender frame into this agent's frame.
    """

    def __init__(self, agent_id: int, cfg_flock: FlockConfig, cfg_fusion: FusionConfig,
                 cfg_nlls: NllsConfig, area, frame: FrameTransform | None = None,
                 from_frames: dict | None = None):
        self.agent_id = agent_id
        self.flock = cfg_flock
        self.fusion = cfg_fusion
        self.nlls = cfg_nlls
        self.area = area
        self.frame = frame or FrameTransform.identity()
        self.frame_inv = self.frame.inverse()
        self.frame_yaw = 2.0 * math.atan2(self.frame.rotation[3], self.frame.rotation[0])
        self.frame_identity = (self.frame.rotation[0] == 1.0
                               and not self.frame.rotation[1:].any()
                               and not self.frame.translation.any())
        self.from_frames = from_frames or {}
        self.stage = SEARCHING
        self.cone_buffer: list = []
        self.hypothesis: Hypothesis | None = None
        self.nlls_invocations = 0
        self.cones_seen = 0
        self.last_cone_time: float | None = None
        self.plan_pos: np.ndarray | None = None
        self.plan_hdg: np.ndarray | None = None
        self.plan_t0 = 0.0

    def _to_own_frame(self, event: MeasurementEvent):
        if event.frame_id == self.agent_id:
            return event.cone
        transform = self.from_frames.get(event.frame_id)
        if transform is None:
            return event.cone
        return transform.transform_cone(event.cone)

    def hypothesis_world(self) -> np.ndarray:
        if self.frame_identity:
            return self.hypothesis.x.copy()
        return self.frame.transform_point(self.hypothesis.x)

    def process_events(self, events: list[MeasurementEvent]):
        """Ingest newly visible cones in event-time order; returns log entries."""
        entries = []
        for event in events:
            cone = self._to_own_frame(event)
            self.cones_seen += 1
            self.last_cone_time = event.time
            if self.stage == SEARCHING:
                self.cone_buffer.append(cone)
            else:
                try:
                    self.hypothesis = fuse_cone(self.hypothesis, cone, self.fusion)
                except SingularCorrectionError:
                    entries.append(("correction_skipped", {"event_time": event.time}))
                    continue
                entries.append(("hypothesis", {
                    "x_world": self.hypothesis_world().tolist(),
                    "event_time": event.time,
                }))
        if self.stage == SEARCHING and len(self.cone_buffer) >= self.fusion.M:
            self.nlls_invocations += 1
            frame_arg = None if self.frame_identity else self.frame_inv
            try:
                x0 = init_hypothesis_nlls(self.cone_buffer, self.area, self.nlls,
                                          frame=frame_arg)
            except InitializationError:
                entries.append(("init_failed", {"n_cones": len(self.cone_buffer)}))
            else:
                self.hypothesis = Hypothesis(x0, self.fusion.p0 * np.eye(3))
                self.stage = TRACKING
                self.cone_buffer = []
                entries.append(("stage", {
                    "stage": TRACKING,
                    "x0_world": self.hypothesis_world().tolist(),
                    "n_cones": self.fusion.M,
                }))
        return entries

    def reset_to_search(self):
        self.stage = SEARCHING
        self.cone_buffer = []
        self.hypothesis = None
        self.plan_pos = None
        self.plan_hdg = None

    def replan(self, positions_world: np.ndarray, t: float):
        """Regenerate the encirclement arc from the current snapshot."""
        own_local = self.frame_inv.transform_point(positions_world[self.agent_id])
        hyp_local = self.hypothesis.x
        others = []
        for j in range(len(positions_world)):
            if j == self.agent_id:
                continue
            p = self.frame_inv.transform_point(positions_world[j])
            rel = p[:2] - hyp_local[:2]
            others.append(PolarPos(float(np.hypot(rel[0], rel[1])),
                                   math.atan2(rel[1], rel[0])))
        if others:
            rel = own_local[:2] - hyp_local[:2]
            me = PolarPos(float(np.hypot(rel[0], rel[1])), math.atan2(rel[1], rel[0]))
            bias = bias_angle(nearest_neighbor_angle(me, others), self.flock)
        else:
            bias = 0.0
        traj = generate_encirclement_trajectory(own_local, hyp_local, bias, self.flock)
        pos_local = np.stack([pt.position for pt in traj])
        hdg_local = np.array([pt.heading for pt in traj])
        if self.frame_identity:
            self.plan_pos = pos_local
            self.plan_hdg = hdg_local
        else:
            self.plan_pos = np.stack([self.frame.transform_point(p) for p in pos_local])
            self.plan_hdg = wrap_angle(hdg_local + self.frame_yaw)
        self.plan_t0 = t

    def plan_reference(self, t: float):
        """(p_ref, v_ref, h_ref) from the active encirclement plan."""
        flock_dt = self.flock.dt
        elapsed = t - self.plan_t0
        last = len(self.plan_pos) - 1
        k = int(elapsed / flock_dt) + 1
        if k > last or elapsed > last * flock_dt:
            return self.plan_pos[last], np.zeros(3), float(self.plan_hdg[last])
        v_ref = (self.plan_pos[k] - self.plan_pos[k - 1]) / flock_dt
        tau = k * flock_dt - elapsed
        return self.plan_pos[k] - v_ref * tau, v_ref, float(self.plan_hdg[k])


def scenario_meta(cfg: ScenarioConfig, seed: int) -> dict:
    meta = {
        "schema_version": SCHEMA_VERSION,
        "seed": seed,
        "n_agents": cfg.n_agents,
        "area": asdict(cfg.area),
        "flock": asdict(cfg.flock),
        "fusion": asdict(cfg.fusion),
        "nlls": asdict(cfg.nlls),
        "detector": asdict(cfg.detector),
        "source": {k: (list(v) if isinstance(v, tuple) else v)
                   for k, v in asdict(cfg.source).items()},
        "vehicle": asdict(cfg.vehicle),
        "sim": asdict(cfg.sim),
        "termination": asdict(cfg.termination),
        "frames_heterogeneous": cfg.frames_heterogeneous,
        "resume_search_on_loss": cfg.resume_search_on_loss,
    }
    meta["source"]["waypoints"] = [list(w) for w in cfg.source.waypoints]
    return meta


def run_scenario(cfg: ScenarioConfig, seed: int) -> RunLog:
    """Execute one scenario; the RunLog is a pure function of (cfg, seed)."""
    rng = np.random.default_rng(seed)
    sim = cfg.sim
    dt = sim.dt
    n = cfg.n_agents
    log = RunLog()
    log.append(0.0, "meta", None, scenario_meta(cfg, seed))

    frames = [FrameTransform.identity() for _ in range(n)]
    if cfg.frames_heterogeneous:
        frame_rng = np.random.default_rng([seed, _FRAME_SALT])
        frames = [
            FrameTransform.from_yaw_offset(
                float(frame_rng.uniform(-math.pi, math.pi)),
                [float(frame_rng.uniform(-50.0, 50.0)),
                 float(frame_rng.uniform(-50.0, 50.0)), 0.0])
            for _ in range(n)
        ]

    frame_invs = [f.inverse() for f in frames]
    agents = []
    for i in range(n):
        from_frames = {}
        if cfg.frames_heterogeneous:
            from_frames = {
                j: frame_invs[i].compose(frames[j]) for j in range(n) if j != i
            }
        agents.append(SwarmAgent(i, cfg.flock, cfg.fusion, cfg.nlls, cfg.area,
                                 frame=frames[i], from_frames=from_frames))

    paths = generate_search_paths(cfg.area, n, sim.lane_spacing, cfg.flock.height)
    search_plans = [_SearchPlan(p, sim.search_speed) for p in paths]
    vehicles = [VehicleState(paths[i][0].copy(), np.zeros(3), 0.0) for i in range(n)]
    last_accels = [np.zeros(3) for _ in range(n)]

    bus = MessageBus(n, sim.bus_latency)
    plan_stride = max(1, round(1.0 / (sim.planning_rate * dt)))
    activity = cfg.source.activity

    last_detection: float | None = None
    tracking_since: float | None = None
    time_to_x0: float | None = None
    total_tracking = 0.0
    reason = None
    tick = 0

    while True:
        t = tick * dt
        t_end = t + dt
        source_pos = scenario_source_position(cfg.source, t)
        for i in range(n):
            v = vehicles[i]
            log.append(t, "state", i, {
                "pos": v.position.tolist(), "vel": v.velocity.tolist(),
                "heading": v.heading, "accel": last_accels[i].tolist(),
            })
        log.append(t, "source", None, {"pos": source_pos.tolist()})

        src_state = SourceState(source_pos, activity)
        for i in range(n):
            v = vehicles[i]
            pose = Pose(v.position, quat_from_yaw(v.heading))
            rate = expected_event_rate(src_state, pose, cfg.detector)
            count = int(rng.poisson(rate * dt)) if rate > 0.0 else 0
            if count == 0:
                continue
            times = np.sort(rng.uniform(t, t_end, size=count))
            for t_e in times:
                cone_world = synthesize_cone(source_pos, pose, cfg.detector, rng)
                cone_local = frame_invs[i].transform_cone(cone_world) \
                    if cfg.frames_heterogeneous else cone_world
                event = MeasurementEvent(float(t_e), cone_local, i, i)
                bus.post(i, float(t_e), event)
                log.append(t, "event", i, {
                    "time": float(t_e),
                    "apex": cone_local.apex.tolist(),
                    "axis": cone_local.axis.tolist(),
                    "half_angle": cone_local.half_angle,
                    "frame_id": i,
                })
                last_detection = float(t_e) if last_detection is None \
                    else max(last_detection, float(t_e))

        positions_world = np.stack([v.position for v in vehicles])
        for i in range(n):
            agent = agents[i]
            events = bus.deliver(i, t_end)
            just_transitioned = False
            if events:
                was_searching = agent.stage == SEARCHING
                for kind, payload in agent.process_events(events):
                    log.append(t, kind, i, payload)
                just_transitioned = was_searching and agent.stage == TRACKING
                if just_transitioned and tracking_since is None:
                    tracking_since = t
                    if time_to_x0 is None:
                        time_to_x0 = t
            if agent.stage == TRACKING and (just_transitioned or tick % plan_stride == 0):
                agent.replan(positions_world, t)

        for i in range(n):
            agent = agents[i]
            if agent.stage == TRACKING and agent.plan_pos is not None:
                p_ref, v_ref, h_ref = agent.plan_reference(t)
            else:
                p_ref, v_ref = search_plans[i].reference(t)
                h_ref = search_heading(t, sim.search_yaw_rate)
            old = vehicles[i]
            new = step_toward_reference(old, p_ref, v_ref, h_ref, cfg.vehicle, dt)
            last_accels[i] = (new.velocity - old.velocity) / dt
            vehicles[i] = new

        tick += 1
        if tracking_since is not None:
            lost = (last_detection is None
                    or t_end - last_detection > cfg.termination.loss_timeout)
            if t_end - tracking_since >= cfg.termination.tracking_limit:
                total_tracking += cfg.termination.tracking_limit
                reason = "tracking_complete"
            elif lost:
                total_tracking += t_end - tracking_since
                if cfg.resume_search_on_loss:
                    for i in range(n):
                        agents[i].reset_to_search()
                        log.append(t_end, "stage", i, {"stage": SEARCHING,
                                                       "cause": "target_lost"})
                    tracking_since = None
                else:
                    reason = "target_lost"
        if reason is None and t_end >= cfg.termination.max_sim_time:
            if tracking_since is not None:
                total_tracking += t_end - tracking_since
            reason = "sim_time_limit"
        if reason is not None:
            log.append(t_end, "termination", None, {
                "reason": reason,
                "time_to_x0": time_to_x0,
                "tracking_time": total_tracking,
            })
            return log


def run_flocking_stabilization(flock: FlockConfig, limits: VehicleLimits, seed: int,
                               duration: float = 300.0, step_period: float = 60.0,
                               step_magnitude: float = 10.0, sim_dt: float = 0.05,
                               planning_rate: float = 2.0,
                               start_hypothesis=(0.0, 0.0, 0.0),
                               spawn_radius: float = 25.0) -> RunLog:
    """Flocking-only harness: fixed hypothesis stepped periodically.

    Decouples motion control from estimation: agents start at seeded
    arbitrary positions, all in the tracking stage, and the scripted
    hypothesis jumps by `step_magnitude` every `step_period` seconds in a
    seeded direction. Produces a RunLog with state and hypothesis records.
    """
    rng = np.random.default_rng(seed)
    n = flock.n_agents
    log = RunLog()
    log.append(0.0, "meta", None, {
        "schema_version": SCHEMA_VERSION, "seed": seed, "n_agents": n,
        "flock": asdict(flock), "sim": {"dt": sim_dt, "planning_rate": planning_rate},
        "harness": "flocking_stabilization",
    })
    hyp = np.asarray(start_hypothesis, dtype=float).copy()
    agents = []
    vehicles = []
    for i in range(n):
        agent = SwarmAgent(i, flock, FusionConfig(), NllsConfig(), None)
        agent.stage = TRACKING
        agent.hypothesis = Hypothesis(hyp.copy(), np.eye(3))
        agents.append(agent)
        pos = np.array([hyp[0] + rng.uniform(-spawn_radius, spawn_radius),
                        hyp[1] + rng.uniform(-spawn_radius, spawn_radius),
                        flock.height])
        vehicles.append(VehicleState(pos, np.zeros(3), 0.0))
    last_accels = [np.zeros(3) for _ in range(n)]

    plan_stride = max(1, round(1.0 / (planning_rate * sim_dt)))
    steps = int(round(duration / sim_dt))
    next_jump = step_period
    log.append(0.0, "hypothesis", None, {"x_world": hyp.tolist(), "event_time": 0.0})
    for tick in range(steps):
        t = tick * sim_dt
        if t >= next_jump - 1e-12:
            direction = rng.uniform(0.0, 2.0 * math.pi)
            hyp = hyp + step_magnitude * np.array([math.cos(direction),
                                                   math.sin(direction), 0.0])
            for agent in agents:
                agent.hypothesis = Hypothesis(hyp.copy(), np.eye(3))
            log.append(t, "hypothesis", None, {"x_world": hyp.tolist(), "event_time": t})
            next_jump += step_period
        for i in range(n):
            v = vehicles[i]
            log.append(t, "state", i, {
                "pos": v.position.tolist(), "vel": v.velocity.tolist(),
                "heading": v.heading, "accel": last_accels[i].tolist(),
            })
        positions_world = np.stack([v.position for v in vehicles])
        for i in range(n):
            if tick % plan_stride == 0:
                agents[i].replan(positions_world, t)
            p_ref, v_ref, h_ref = agents[i].plan_reference(t)
            old = vehicles[i]
            new = step_toward_reference(old, p_ref, v_ref, h_ref, limits, sim_dt)
            last_accels[i] = (new.velocity - old.velocity) / sim_dt
            vehicles[i] = new
    return log
