"""Acceptance suite: one test per criterion, one printed line each.

Run with `pytest tests/test_acceptance.py -v -s` to see the PASS lines.
The comparative criteria target ratios and orderings (20 seeds per cell),
not the absolute timings, which depend on detector constants the
comparison baseline never published.
"""

import json
import math
import time
from pathlib import Path

import numpy as np
import pytest

from compton_swarm.cli import main as cli_main
from compton_swarm.config import build_scenario, load_config
from compton_swarm.detector import DetectorConfig, MeasurementEvent, synthesize_cone
from compton_swarm.flocking import AreaBounds, FlockConfig
from compton_swarm.frames import FrameTransform
from compton_swarm.fusion import (
    FusionConfig,
    Hypothesis,
    NllsConfig,
    fuse_cone,
    init_hypothesis_nlls,
    measurement_from_cone,
)
from compton_swarm.geometry import (
    ComptonCone,
    Pose,
    cone_surface_points,
    photon_energy_after_scatter,
    point_cone_surface_distance,
    project_point_onto_cone,
    quat_from_yaw,
    scattering_angle,
)
from compton_swarm.montecarlo import aggregate, run_batch
from compton_swarm.plotting import extract_plotdata
from compton_swarm.simulation import TRACKING, SwarmAgent, run_flocking_stabilization, run_scenario
from compton_swarm.vehicle import VehicleLimits

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"
JOBS = 2
SEEDS_PER_CELL = 20

MOVING_SOURCE = {"kind": "circular", "center": [50.0, 50.0, 0.0],
                 "radius": 40.0, "speed": 1.0, "phase": 0.0, "activity": 3e9}


def _report(criterion: str, detail: str):
    print(f"[PASS] {criterion}: {detail}")


def _random_cone(rng):
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    return ComptonCone(rng.uniform(-20, 20, 3), axis, rng.uniform(0.05, math.pi - 0.05))


def test_criterion_1_geometry_oracles():
    """Projection optimality, on-surface, orthogonality, distance consistency."""
    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    n_cases = 1000
    worst_surface = 0.0
    worst_ortho = 0.0
    worst_consistency = 0.0
    worst_optimality = 0.0
    for _ in range(n_cases):
        cone = _random_cone(rng)
        point = rng.uniform(-40.0, 40.0, 3)
        proj = project_point_onto_cone(cone, point)
        dist = point_cone_surface_distance(cone, point)

        worst_consistency = max(worst_consistency,
                                abs(dist - float(np.linalg.norm(proj - point))))
        rel = proj - cone.apex
        r = float(np.linalg.norm(rel))
        if r > 1e-9:  # lateral branch: on surface and orthogonal residual
            ang = math.acos(np.clip(rel @ cone.axis / r, -1.0, 1.0))
            worst_surface = max(worst_surface, abs(ang - cone.half_angle))
            scale = max(1.0, float(np.linalg.norm(point - cone.apex)))
            worst_ortho = max(worst_ortho, abs((proj - point) @ (rel / r)) / scale)

        # optimality against 1e5 uniformly sampled surface points
        s_max = 4.0 * float(np.linalg.norm(point - cone.apex)) + 1.0
        radial = rng.uniform(0.0, s_max, 100_000)
        azimuth = rng.uniform(0.0, 2.0 * math.pi, 100_000)
        samples = cone_surface_points(cone, radial, azimuth)
        oracle = float(np.min(np.linalg.norm(samples - point[None, :], axis=1)))
        worst_optimality = max(worst_optimality,
                               float(np.linalg.norm(proj - point)) - oracle)
    elapsed = time.perf_counter() - start
    assert worst_surface < 1e-9
    assert worst_ortho < 1e-9
    assert worst_consistency < 1e-9
    assert worst_optimality <= 1e-3
    assert elapsed < 30.0
    _report("criterion 1 (geometry oracles)",
            f"{n_cases} cases, worst optimality slack {worst_optimality:.2e} m, "
            f"on-surface {worst_surface:.2e} rad, {elapsed:.1f} s")


def test_criterion_2_scattering_round_trip():
    energies = np.linspace(100.0, 3000.0, 100)
    thetas = np.linspace(0.01, math.pi - 0.01, 100)
    worst = 0.0
    for e in energies:
        for theta in thetas:
            e_prime = photon_energy_after_scatter(e, theta)
            worst = max(worst, abs(scattering_angle(e - e_prime, e_prime) - theta))
    assert worst < 1e-9
    _report("criterion 2 (scattering round-trip)",
            f"100x100 grid, worst deviation {worst:.2e} rad")


def test_criterion_3_covariance_structure():
    rng = np.random.default_rng(7)
    cfg = FusionConfig(rho=4.0, off_axis_factor=1e4)
    expected = np.array([cfg.rho, 1e4 * cfg.rho, 1e4 * cfg.rho])
    worst_eig = 0.0
    worst_align = 0.0
    checked = 0
    while checked < 1000:
        cone = _random_cone(rng)
        h = Hypothesis(rng.uniform(-30.0, 30.0, 3), np.eye(3))
        z, r = measurement_from_cone(h, cone, cfg)
        d = z - h.x
        n = float(np.linalg.norm(d))
        if n < 1e-9:
            continue
        eigvals, eigvecs = np.linalg.eigh(r)
        worst_eig = max(worst_eig, float(np.max(np.abs(eigvals - expected) / expected)))
        worst_align = max(worst_align, 1.0 - abs(float(eigvecs[:, 0] @ (d / n))))
        checked += 1
    assert worst_eig < 1e-9
    assert worst_align < 1e-9
    _report("criterion 3 (covariance structure)",
            f"eigenvalue rel err {worst_eig:.2e}, alignment defect {worst_align:.2e}")


def _surrounding_cones(truth, n, rng, sigma=0.0):
    det = DetectorConfig(angular_noise_sigma=sigma)
    cones = []
    for _ in range(n):
        ang = rng.uniform(0.0, 2.0 * math.pi)
        dist = rng.uniform(8.0, 45.0)
        pos = np.array([truth[0] + dist * math.cos(ang),
                        truth[1] + dist * math.sin(ang), 4.0])
        pose = Pose(pos, quat_from_yaw(rng.uniform(-math.pi, math.pi)))
        cones.append(synthesize_cone(truth, pose, det, rng))
    return cones


def test_criterion_4_static_convergence():
    truth = np.array([10.0, -5.0, 0.0])
    rng = np.random.default_rng(17)
    cones = _surrounding_cones(truth, 200, rng)
    cfg = FusionConfig()
    start = time.perf_counter()
    h = Hypothesis(np.zeros(3), cfg.p0 * np.eye(3))
    for cone in cones:
        h = fuse_cone(h, cone, cfg)
    lkf_time = time.perf_counter() - start
    lkf_err = float(np.linalg.norm(h.x - truth))
    assert lkf_err < 0.5
    assert lkf_time < 5.0

    truth2 = np.array([30.0, 40.0, 0.0])
    rng2 = np.random.default_rng(100)
    cones2 = _surrounding_cones(truth2, 20, rng2)
    start = time.perf_counter()
    x0 = init_hypothesis_nlls(cones2, AreaBounds(0.0, 100.0, 0.0, 100.0), NllsConfig())
    nlls_time = time.perf_counter() - start
    nlls_err = float(np.linalg.norm(x0 - truth2))
    assert nlls_err < 0.5
    assert nlls_time < 5.0
    _report("criterion 4 (static convergence)",
            f"LKF {lkf_err:.3f} m in {lkf_time:.2f} s; NLLS {nlls_err:.3f} m "
            f"in {nlls_time:.2f} s")


def test_criterion_5_flocking_stabilization():
    flock = FlockConfig(n_agents=5, r=12.0, v=3.0, K=30, dt=0.2)
    limits = VehicleLimits()
    log = run_flocking_stabilization(flock, limits, seed=11, duration=300.0,
                                     step_period=60.0, step_magnitude=10.0)
    log_again = run_flocking_stabilization(flock, limits, seed=11, duration=300.0,
                                           step_period=60.0, step_magnitude=10.0)
    assert log.to_jsonl_str() == log_again.to_jsonl_str()

    _, speed_rows = extract_plotdata(log, "speed")
    _, spacing_rows = extract_plotdata(log, "spacing")
    worst_speed = 0.0
    worst_spacing = 0.0
    for boundary in (60.0, 120.0, 180.0, 240.0, 300.0):
        lo, hi = boundary - 5.0, boundary - 1e-9
        speeds = [row[1:] for row in speed_rows if lo <= row[0] < hi]
        spacings = [row[1:] for row in spacing_rows if lo <= row[0] < hi]
        assert speeds and spacings
        worst_speed = max(worst_speed,
                          max(abs(s - flock.v) for row in speeds for s in row))
        worst_spacing = max(worst_spacing,
                            max(v for row in spacings for v in row))
    assert worst_speed <= 0.05 * flock.v
    assert worst_spacing < 0.1
    _report("criterion 5 (flocking stabilization)",
            f"worst speed dev {worst_speed / flock.v * 100:.2f}% (<=5%), "
            f"worst spacing err {worst_spacing:.3f} rad (<0.1)")


@pytest.fixture(scope="module")
def comparison_cells():
    """20-seed Monte Carlo for the 2x2 solo/swarm x static/moving sweep."""
    swarm_raw = json.load(open(CONFIG_DIR / "paper_table2_swarm.json"))
    solo_raw = json.load(open(CONFIG_DIR / "paper_table2_solo.json"))
    cells = {}
    start = time.perf_counter()
    for name, base, moving in [
        ("swarm_static", swarm_raw, False),
        ("solo_static", solo_raw, False),
        ("swarm_moving", swarm_raw, True),
        ("solo_moving", solo_raw, True),
    ]:
        raw = json.loads(json.dumps(base))
        if moving:
            raw["source"] = dict(MOVING_SOURCE)
        rows = run_batch(raw, SEEDS_PER_CELL, 1000, jobs=JOBS)
        cells[name] = aggregate(rows)
    cells["_sweep_wall"] = time.perf_counter() - start
    return cells


def test_criterion_6_solo_swarm_ratios(comparison_cells):
    c = comparison_cells
    for cell in ("swarm_static", "solo_static", "swarm_moving", "solo_moving"):
        assert c[cell]["failed"] == 0, f"{cell} had failed runs"

    # a. initialization speedup, both source types
    ratio_static = c["swarm_static"]["time_to_x0_median"] / c["solo_static"]["time_to_x0_median"]
    ratio_moving = c["swarm_moving"]["time_to_x0_median"] / c["solo_moving"]["time_to_x0_median"]
    assert ratio_static <= 0.5
    assert ratio_moving <= 0.5

    # b. moving-source accuracy
    err_ratio = c["swarm_moving"]["error_median"] / c["solo_moving"]["error_median"]
    assert err_ratio <= 0.5

    # c. moving-source endurance
    trk_ratio = c["swarm_moving"]["tracking_time_avg"] / c["solo_moving"]["tracking_time_avg"]
    assert trk_ratio >= 2.0
    assert c["swarm_moving"]["tracking_complete_fraction"] >= 0.5

    # d. static swarm accuracy (pooled)
    assert c["swarm_static"]["error_median"] <= 5.0

    # sweep runtime budget
    assert c["_sweep_wall"] < 900.0

    # throughput: a tracking-heavy 180 s-cap scenario at >= 20x real time
    raw = json.load(open(CONFIG_DIR / "paper_table2_swarm.json"))
    raw["source"] = dict(MOVING_SOURCE)
    cfg = build_scenario(raw)
    t0 = time.perf_counter()
    log = run_scenario(cfg, 1234)
    wall = time.perf_counter() - t0
    sim_t = log.records[-1][0]
    assert sim_t / wall >= 20.0

    _report("criterion 6 (solo-vs-swarm ratios, 20 seeds/cell)",
            f"x0 ratios static {ratio_static:.2f} / moving {ratio_moving:.2f} (<=0.5), "
            f"error ratio {err_ratio:.2f} (<=0.5), tracking ratio {trk_ratio:.2f} (>=2), "
            f"cap fraction {c['swarm_moving']['tracking_complete_fraction']:.2f} (>=0.5), "
            f"static err {c['swarm_static']['error_median']:.2f} m (<=5), "
            f"sweep {c['_sweep_wall']:.0f} s, speed {sim_t / wall:.0f}x real time")


def test_criterion_7_tracking_speed_ordering():
    swarm_raw = json.load(open(CONFIG_DIR / "paper_table2_swarm.json"))
    swarm_raw["source"] = dict(MOVING_SOURCE)  # 1 m/s
    solo_raw = json.load(open(CONFIG_DIR / "paper_table2_solo.json"))
    solo_raw["source"] = dict(MOVING_SOURCE, speed=3.0)

    n_runs = 10
    swarm_rows = run_batch(swarm_raw, n_runs, 4000, jobs=JOBS)
    solo_rows = run_batch(solo_raw, n_runs, 4000, jobs=JOBS)
    swarm_sustained = sum(1 for r in swarm_rows
                          if r.get("termination_reason") == "tracking_complete")
    solo_lost = sum(1 for r in solo_rows
                    if r.get("termination_reason") == "target_lost")
    assert swarm_sustained > n_runs // 2
    assert solo_lost > n_runs // 2
    _report("criterion 7 (tracking speed ordering)",
            f"swarm@1m/s sustained {swarm_sustained}/{n_runs}, "
            f"solo@3m/s lost {solo_lost}/{n_runs}")


def test_criterion_8_determinism(tmp_path):
    config_path = tmp_path / "cfg.json"
    raw = json.load(open(CONFIG_DIR / "paper_table2_swarm.json"))
    raw["area"] = {"x_min": 0.0, "x_max": 60.0, "y_min": 0.0, "y_max": 60.0}
    raw["source"]["position"] = [30.0, 30.0, 0.0]
    raw["detector"]["intrinsic_efficiency"] = 0.05
    raw["termination"] = {"loss_timeout": 20.0, "tracking_limit": 20.0,
                          "max_sim_time": 200.0}
    config_path.write_text(json.dumps(raw))

    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert cli_main(["run", "--config", str(config_path), "--seed", "3",
                         "--out", str(out)]) == 0
        outs.append(out)
    runlog_bytes = (outs[0] / "runlog.jsonl").read_bytes()
    assert runlog_bytes == (outs[1] / "runlog.jsonl").read_bytes()
    assert (outs[0] / "metrics.json").read_bytes() == (outs[1] / "metrics.json").read_bytes()

    mc = []
    for name, jobs in (("mc1", "1"), ("mc2", "2")):
        out = tmp_path / name
        assert cli_main(["montecarlo", "--config", str(config_path), "--runs", "4",
                         "--seed-base", "0", "--jobs", jobs, "--out", str(out)]) == 0
        mc.append(out)
    summary_bytes = (mc[0] / "summary.csv").read_bytes()
    assert summary_bytes == (mc[1] / "summary.csv").read_bytes()
    assert (mc[0] / "runs.csv").read_bytes() == (mc[1] / "runs.csv").read_bytes()
    _report("criterion 8 (determinism)",
            f"runlog {len(runlog_bytes)} bytes and summary.csv identical across "
            f"reruns and worker-pool sizes")


def test_criterion_9_frame_heterogeneity():
    rng = np.random.default_rng(99)
    area = AreaBounds(0.0, 100.0, 0.0, 100.0)
    det = DetectorConfig(angular_noise_sigma=0.05)
    truth = np.array([30.0, 40.0, 0.0])
    events = []
    t = 0.0
    for _ in range(400):
        t += 0.11
        pos = np.array([30.0 + 25.0 * math.cos(t / 7.0),
                        40.0 + 25.0 * math.sin(t / 7.0), 4.0])
        pose = Pose(pos, quat_from_yaw(0.3 * t))
        events.append(MeasurementEvent(t, synthesize_cone(truth, pose, det, rng), 0, 0))

    reference = SwarmAgent(0, FlockConfig(), FusionConfig(), NllsConfig(), area)
    worst = 0.0
    frame_rng = np.random.default_rng(5)
    agents = []
    for k in range(4):
        frame = FrameTransform.from_yaw_offset(
            float(frame_rng.uniform(-math.pi, math.pi)),
            [float(frame_rng.uniform(-50, 50)), float(frame_rng.uniform(-50, 50)), 0.0])
        agents.append(SwarmAgent(k + 1, FlockConfig(), FusionConfig(), NllsConfig(),
                                 area, frame=frame,
                                 from_frames={0: frame.inverse()}))
    for start in range(0, len(events), 5):
        batch = events[start:start + 5]
        reference.process_events(batch)
        for agent in agents:
            agent.process_events(batch)
    assert reference.stage == TRACKING
    ref_world = reference.hypothesis_world()
    for agent in agents:
        assert agent.stage == TRACKING
        worst = max(worst, float(np.linalg.norm(agent.hypothesis_world() - ref_world)))
    assert worst < 1e-6
    _report("criterion 9 (frame heterogeneity)",
            f"4 randomized frames, worst world-frame deviation {worst:.2e} m (<1e-6)")
