"""Cone geometry and scattering kinematics, checked against brute force."""

import math

import numpy as np
import pytest

from compton_swarm.geometry import (
    ELECTRON_REST_KEV,
    ComptonCone,
    Pose,
    RejectedEventError,
    ScatterPair,
    angle_diff,
    cone_from_scatter,
    cone_surface_points,
    photon_energy_after_scatter,
    point_cone_surface_distance,
    project_point_onto_cone,
    quat_from_axis_angle,
    scattering_angle,
    wrap_angle,
)


def random_cone(rng, apex_scale=20.0):
    apex = rng.uniform(-apex_scale, apex_scale, 3)
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    half = rng.uniform(0.05, math.pi - 0.05)
    return ComptonCone(apex, axis, half)


def brute_force_surface_distance(cone, point, n_radial=320, n_azimuth=320, s_max=None,
                                 refine=0):
    """Oracle: dense sampling of the one-sided surface (plus the apex).

    With refine > 0 the sampling zooms onto the best (radius, azimuth)
    cell, shrinking the discretization error for two-sided comparisons.
    """
    if s_max is None:
        s_max = 4.0 * np.linalg.norm(point - cone.apex) + 1.0
    r_lo, r_hi = 0.0, s_max
    a_lo, a_hi = 0.0, 2.0 * math.pi
    best = None
    for _ in range(refine + 1):
        radial = np.linspace(r_lo, r_hi, n_radial)
        azimuth = np.linspace(a_lo, a_hi, n_azimuth)
        rr, aa = np.meshgrid(radial, azimuth)
        pts = cone_surface_points(cone, rr.ravel(), aa.ravel())
        dists = np.linalg.norm(pts - point[None, :], axis=1)
        k = int(np.argmin(dists))
        best = float(dists[k])
        r_step = radial[1] - radial[0]
        a_step = azimuth[1] - azimuth[0]
        r_best = rr.ravel()[k]
        a_best = aa.ravel()[k]
        r_lo, r_hi = max(0.0, r_best - r_step), r_best + r_step
        a_lo, a_hi = a_best - a_step, a_best + a_step
    return best


# ---------------------------------------------------------------------------
# Compton kinematics
# ---------------------------------------------------------------------------

class TestScattering:
    def test_zero_transfer_limit(self):
        # Vanishing electron energy means a vanishing scattering angle.
        assert scattering_angle(1e-9, 400.0) < 1e-4

    def test_right_angle_pair(self):
        # Pair generated by the closed-form inverse at theta = pi/2 for a
        # 662 keV photon: E' = E * mec2 / (E + mec2) = 288.3901173995 keV.
        e_photon = 662.0 * ELECTRON_REST_KEV / (662.0 + ELECTRON_REST_KEV)
        assert e_photon == pytest.approx(288.3901173995083, abs=1e-9)
        theta = scattering_angle(662.0 - e_photon, e_photon)
        assert theta == pytest.approx(math.pi / 2, abs=1e-12)

    def test_backscatter_pair(self):
        # cos(theta) = -1: E' = E / (1 + 2 E / mec2) = 184.3495904453 keV.
        e_photon = 662.0 / (1.0 + 2.0 * 662.0 / ELECTRON_REST_KEV)
        assert e_photon == pytest.approx(184.34959044526974, abs=1e-9)
        theta = scattering_angle(662.0 - e_photon, e_photon)
        assert theta == pytest.approx(math.pi, abs=1e-9)

    def test_inconsistent_pair_rejected(self):
        with pytest.raises(RejectedEventError):
            scattering_angle(600.0, 30.0)

    def test_nonpositive_energy_rejected(self):
        with pytest.raises(RejectedEventError):
            scattering_angle(0.0, 300.0)
        with pytest.raises(RejectedEventError):
            scattering_angle(300.0, -1.0)

    def test_forward_scatter_energy_unchanged(self):
        assert photon_energy_after_scatter(662.0, 0.0) == pytest.approx(662.0)

    def test_right_angle_energy(self):
        expected = 662.0 * ELECTRON_REST_KEV / (662.0 + ELECTRON_REST_KEV)
        assert photon_energy_after_scatter(662.0, math.pi / 2) == pytest.approx(expected, rel=1e-12)

    def test_round_trip_grid(self):
        # Acceptance criterion 2: inverse identity over a 100x100 grid.
        energies = np.linspace(100.0, 3000.0, 100)
        thetas = np.linspace(0.01, math.pi - 0.01, 100)
        worst = 0.0
        for e in energies:
            for theta in thetas:
                e_prime = photon_energy_after_scatter(e, theta)
                recovered = scattering_angle(e - e_prime, e_prime)
                worst = max(worst, abs(recovered - theta))
        assert worst < 1e-9


# ---------------------------------------------------------------------------
# Cone construction
# ---------------------------------------------------------------------------

class TestConeFromScatter:
    def _pair_for_angle(self, theta, e_initial=662.0, c_e=(0.0, 0.0, 0.0),
                        c_p=(0.0, 0.0, -0.002)):
        e_photon = photon_energy_after_scatter(e_initial, theta)
        return ScatterPair(np.array(c_e), np.array(c_p), e_initial - e_photon, e_photon)

    def test_identity_pose_axis_along_offset(self):
        pair = self._pair_for_angle(math.pi / 4)
        cone = cone_from_scatter(pair, Pose.identity())
        np.testing.assert_allclose(cone.apex, [0.0, 0.0, 0.0], atol=1e-15)
        np.testing.assert_allclose(cone.axis, [0.0, 0.0, 1.0], atol=1e-12)
        assert cone.half_angle == pytest.approx(math.pi / 4, abs=1e-12)

    def test_rotated_pose_rotates_axis(self):
        pair = self._pair_for_angle(math.pi / 4)
        pose = Pose(np.zeros(3), quat_from_axis_angle([1.0, 0.0, 0.0], math.pi / 2))
        cone = cone_from_scatter(pair, pose)
        np.testing.assert_allclose(cone.axis, [0.0, -1.0, 0.0], atol=1e-12)

    def test_random_pose_properties(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            theta = rng.uniform(0.1, 2.5)
            c_e = rng.uniform(-0.005, 0.005, 3)
            c_p = c_e + rng.normal(size=3) * 1e-3
            pair = self._pair_for_angle(theta, c_e=c_e, c_p=c_p)
            axis = rng.normal(size=3)
            pose = Pose(rng.uniform(-5, 5, 3),
                        quat_from_axis_angle(axis, rng.uniform(0, math.pi)))
            cone = cone_from_scatter(pair, pose)
            np.testing.assert_allclose(cone.apex, pose.transform_point(c_e), atol=1e-12)
            assert cone.half_angle == pytest.approx(theta, abs=1e-9)

    def test_degenerate_pair_rejected(self):
        pair = ScatterPair(np.zeros(3), np.zeros(3), 300.0, 300.0)
        with pytest.raises(RejectedEventError):
            cone_from_scatter(pair, Pose.identity())


# ---------------------------------------------------------------------------
# Projection and distance
# ---------------------------------------------------------------------------

class TestProjection:
    def test_surface_point_is_fixed(self):
        cone = ComptonCone(np.zeros(3), np.array([1.0, 0.0, 0.0]), math.pi / 3)
        p = 2.0 * np.array([math.cos(math.pi / 3), math.sin(math.pi / 3), 0.0])
        np.testing.assert_allclose(project_point_onto_cone(cone, p), p, atol=1e-12)

    def test_hand_case_inside_cone(self):
        # apex origin, axis x, half-angle 60 deg, point at alpha = 30 deg:
        # projection (sqrt(3)/2, 3/2, 0), residual orthogonal to the ray.
        cone = ComptonCone(np.zeros(3), np.array([1.0, 0.0, 0.0]), math.pi / 3)
        p = np.array([math.sqrt(3.0), 1.0, 0.0])
        proj = project_point_onto_cone(cone, p)
        np.testing.assert_allclose(proj, [math.sqrt(3.0) / 2.0, 1.5, 0.0], atol=1e-12)
        ray = np.array([0.5, math.sqrt(3.0) / 2.0, 0.0])
        assert abs((proj - p) @ ray) < 1e-12
        assert brute_force_surface_distance(cone, p) == pytest.approx(1.0, abs=1e-3)

    def test_point_behind_apex_maps_to_apex(self):
        cone = ComptonCone(np.zeros(3), np.array([1.0, 0.0, 0.0]), math.pi / 6)
        p = np.array([-1.0, 0.1, 0.0])
        np.testing.assert_allclose(project_point_onto_cone(cone, p), np.zeros(3), atol=1e-15)

    def test_apex_point_returns_apex(self):
        cone = ComptonCone(np.ones(3), np.array([0.0, 0.0, 1.0]), 0.4)
        np.testing.assert_allclose(project_point_onto_cone(cone, np.ones(3)), np.ones(3))

    def test_on_axis_tie_break_deterministic(self):
        cone = ComptonCone(np.zeros(3), np.array([1.0, 0.0, 0.0]), 0.5)
        p = np.array([3.0, 0.0, 0.0])
        first = project_point_onto_cone(cone, p)
        second = project_point_onto_cone(cone, p)
        np.testing.assert_array_equal(first, second)
        assert point_cone_surface_distance(cone, p) == pytest.approx(
            np.linalg.norm(first - p), abs=1e-12)

    def test_projection_properties_randomized(self):
        # Spec invariants: on-surface, orthogonality, optimality vs oracle.
        rng = np.random.default_rng(42)
        for _ in range(400):
            cone = random_cone(rng)
            point = rng.uniform(-40, 40, 3)
            proj = project_point_onto_cone(cone, point)
            rel = proj - cone.apex
            dist = point_cone_surface_distance(cone, point)
            assert dist == pytest.approx(np.linalg.norm(proj - point), abs=1e-9)
            if np.linalg.norm(rel) > 1e-9:  # lateral branch
                ang = math.acos(np.clip(rel @ cone.axis / np.linalg.norm(rel), -1, 1))
                assert abs(ang - cone.half_angle) < 1e-9
                w = rel / np.linalg.norm(rel)
                assert abs((proj - point) @ w) < 1e-9 * max(
                    1.0, np.linalg.norm(point - cone.apex))

    def test_projection_optimality_oracle(self):
        rng = np.random.default_rng(3)
        for _ in range(60):
            cone = random_cone(rng)
            point = rng.uniform(-30, 30, 3)
            proj = project_point_onto_cone(cone, point)
            oracle = brute_force_surface_distance(cone, point)
            assert np.linalg.norm(proj - point) <= oracle + 1e-3


class TestSurfaceDistance:
    def test_surface_point_zero(self):
        cone = ComptonCone(np.zeros(3), np.array([0.0, 1.0, 0.0]), 0.7)
        pts = cone_surface_points(cone, np.array([2.5]), np.array([1.3]))
        assert point_cone_surface_distance(cone, pts[0]) < 1e-12

    def test_hand_case(self):
        cone = ComptonCone(np.zeros(3), np.array([1.0, 0.0, 0.0]), math.pi / 3)
        p = np.array([math.sqrt(3.0), 1.0, 0.0])
        assert point_cone_surface_distance(cone, p) == pytest.approx(1.0, abs=1e-12)

    def test_behind_apex_distance(self):
        cone = ComptonCone(np.zeros(3), np.array([1.0, 0.0, 0.0]), math.pi / 6)
        assert point_cone_surface_distance(cone, np.array([-1.0, 0.0, 0.0])) == pytest.approx(1.0)

    def test_matches_oracle_including_wide_cones(self):
        rng = np.random.default_rng(11)
        for _ in range(60):
            cone = random_cone(rng)
            point = rng.uniform(-25, 25, 3)
            dist = point_cone_surface_distance(cone, point)
            oracle = brute_force_surface_distance(cone, point, refine=2)
            assert dist == pytest.approx(oracle, abs=2e-3)


# ---------------------------------------------------------------------------
# Angles
# ---------------------------------------------------------------------------

class TestAngleDiff:
    def test_wraparound(self):
        assert angle_diff(0.1, 2.0 * math.pi - 0.1) == pytest.approx(-0.2, abs=1e-12)

    def test_boundary_maps_to_positive_pi(self):
        assert angle_diff(0.0, math.pi) == pytest.approx(math.pi)
        assert wrap_angle(-math.pi) == pytest.approx(math.pi)

    def test_antisymmetry_magnitude(self):
        rng = np.random.default_rng(5)
        for _ in range(300):
            a, b = rng.uniform(-3.0, 3.0, 2)
            if abs(abs(angle_diff(a, b)) - math.pi) < 1e-6:
                continue
            assert abs(angle_diff(a, b)) == pytest.approx(abs(angle_diff(b, a)), abs=1e-12)

    def test_output_range(self):
        rng = np.random.default_rng(6)
        for _ in range(1000):
            d = angle_diff(rng.uniform(-50, 50), rng.uniform(-50, 50))
            assert -math.pi < d <= math.pi
