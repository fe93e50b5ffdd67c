"""Cone geometry and Compton scattering kinematics.

Core unit conventions used throughout the package: energies in keV,
angles in radians, distances in meters. Vectors are plain float64
numpy arrays of shape (3,); quaternions are arrays [w, x, y, z].
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Electron rest energy, CODATA value [keV].
ELECTRON_REST_KEV = 510.998950

# Tolerance for treating an arccos argument marginally outside [-1, 1]
# as a rounding artifact rather than an inconsistent energy pair.
_ACOS_SLACK = 1e-12

_TWO_PI = 2.0 * math.pi


class RejectedEventError(ValueError):
    """Measurement event is physically inconsistent or degenerate.

    Callers are expected to discard the offending event and continue.
    """


def wrap_angle(angle):
    """Wrap an angle (scalar or array) to the interval (-pi, pi]."""
    if np.ndim(angle) == 0:
        wrapped = (float(angle) + math.pi) % _TWO_PI - math.pi
        return math.pi if wrapped == -math.pi else wrapped
    wrapped = np.mod(np.asarray(angle, dtype=float) + np.pi, _TWO_PI) - np.pi
    return np.where(wrapped == -np.pi, np.pi, wrapped)


def angle_diff(a: float, b: float) -> float:
    """Smallest signed difference (b - a), wrapped to (-pi, pi]."""
    return wrap_angle(b - a)


def unit(v: np.ndarray) -> np.ndarray:
    """Normalize a vector; raises on (near-)zero input."""
    n = float(np.linalg.norm(v))
    if n < 1e-30:
        raise ValueError("cannot normalize a zero-length vector")
    return np.asarray(v, dtype=float) / n


# ---------------------------------------------------------------------------
# Quaternions and rigid poses
# ---------------------------------------------------------------------------

def quat_from_axis_angle(axis: np.ndarray, angle: float) -> np.ndarray:
    """Unit quaternion [w, x, y, z] rotating by `angle` about `axis`."""
    ax = unit(np.asarray(axis, dtype=float))
    half = 0.5 * angle
    s = math.sin(half)
    return np.array([math.cos(half), ax[0] * s, ax[1] * s, ax[2] * s])


def quat_from_yaw(yaw: float) -> np.ndarray:
    """Unit quaternion for a rotation by `yaw` about the world z axis."""
    half = 0.5 * yaw
    return np.array([math.cos(half), 0.0, 0.0, math.sin(half)])


def quat_multiply(q1: np.ndarray, q2: np.ndarray) -> np.ndarray:
    w1, x1, y1, z1 = q1
    w2, x2, y2, z2 = q2
    return np.array([
        w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
        w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
        w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
        w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
    ])


def quat_conjugate(q: np.ndarray) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_rotate(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Rotate vector `v` by unit quaternion `q` (scalar-first).

    Expanded componentwise; np.cross carries too much overhead for the
    3-vectors this is called with in the simulation loop.
    """
    w, x, y, z = float(q[0]), float(q[1]), float(q[2]), float(q[3])
    vx, vy, vz = float(v[0]), float(v[1]), float(v[2])
    tx = 2.0 * (y * vz - z * vy)
    ty = 2.0 * (z * vx - x * vz)
    tz = 2.0 * (x * vy - y * vx)
    return np.array([
        vx + w * tx + (y * tz - z * ty),
        vy + w * ty + (z * tx - x * tz),
        vz + w * tz + (x * ty - y * tx),
    ])


@dataclass(frozen=True)
class Pose:
    """Rigid body pose: position [m] and body-to-world unit quaternion."""

    position: np.ndarray
    orientation: np.ndarray  # [w, x, y, z], normalized

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float))
        q = np.asarray(self.orientation, dtype=float)
        n = float(np.linalg.norm(q))
        if abs(n - 1.0) > 1e-9:
            raise ValueError("pose quaternion must be normalized")
        object.__setattr__(self, "orientation", q / n)

    @staticmethod
    def identity() -> "Pose":
        return Pose(np.zeros(3), np.array([1.0, 0.0, 0.0, 0.0]))

    def transform_point(self, p: np.ndarray) -> np.ndarray:
        return quat_rotate(self.orientation, p) + self.position

    def rotate(self, v: np.ndarray) -> np.ndarray:
        return quat_rotate(self.orientation, v)


# ---------------------------------------------------------------------------
# Compton kinematics
# ---------------------------------------------------------------------------

def scattering_angle(e_electron_kev: float, e_photon_kev: float) -> float:
    """Scattering angle reconstructed from the two measured energy deposits.

    `e_electron_kev` is the recoil electron energy, `e_photon_kev` the
    scattered photon energy; the initial photon energy is their sum.

    Raises:
        RejectedEventError: the pair is not consistent with any scattering
            angle (arccos argument outside [-1, 1] beyond rounding slack).
    """
    if e_electron_kev <= 0.0 or e_photon_kev <= 0.0:
        raise RejectedEventError("energy deposits must be strictly positive")
    e_initial = e_electron_kev + e_photon_kev
    cos_theta = 1.0 + ELECTRON_REST_KEV * (1.0 / e_initial - 1.0 / e_photon_kev)
    if cos_theta < -1.0 - _ACOS_SLACK or cos_theta > 1.0 + _ACOS_SLACK:
        raise RejectedEventError(
            f"inconsistent energy pair ({e_electron_kev:.3f}, {e_photon_kev:.3f}) keV"
        )
    return math.acos(min(1.0, max(-1.0, cos_theta)))


def photon_energy_after_scatter(e_initial_kev: float, theta: float) -> float:
    """Scattered photon energy for an initial energy and scattering angle."""
    if e_initial_kev <= 0.0:
        raise ValueError("initial photon energy must be positive")
    return e_initial_kev / (1.0 + (e_initial_kev / ELECTRON_REST_KEV) * (1.0 - math.cos(theta)))


# ---------------------------------------------------------------------------
# Compton cones
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ComptonCone:
    """One-sided cone of candidate source directions.

    The surface is {apex + s*d : s >= 0, angle(d, axis) = half_angle}.
    `axis` points from the apex out along the candidate directions.
    """

    apex: np.ndarray
    axis: np.ndarray
    half_angle: float

    def __post_init__(self):
        object.__setattr__(self, "apex", np.asarray(self.apex, dtype=float))
        ax = np.asarray(self.axis, dtype=float)
        if abs(float(np.linalg.norm(ax)) - 1.0) > 1e-12:
            raise ValueError("cone axis must be a unit vector")
        object.__setattr__(self, "axis", ax)
        if not 0.0 < self.half_angle < math.pi:
            raise ValueError("cone half-angle must lie in (0, pi)")


@dataclass(frozen=True)
class ScatterPair:
    """Detector-frame coordinates and energies of one scattering event."""

    c_electron: np.ndarray  # recoil electron absorption point [m]
    c_photon: np.ndarray    # scattered photon absorption point [m]
    e_electron: float       # [keV]
    e_photon: float         # [keV]


def cone_from_scatter(pair: ScatterPair, detector_pose: Pose) -> ComptonCone:
    """Reconstruct the measurement cone from one scattering event.

    The apex sits at the (world-frame) electron interaction point; the axis
    runs from the scatter point back toward the possible photon origins,
    i.e. along (c_electron - c_photon).
    """
    c_e = np.asarray(pair.c_electron, dtype=float)
    c_p = np.asarray(pair.c_photon, dtype=float)
    diff = c_e - c_p
    if float(np.linalg.norm(diff)) < 1e-12:
        raise RejectedEventError("coincident interaction coordinates")
    theta = scattering_angle(pair.e_electron, pair.e_photon)
    if theta >= math.pi:
        raise RejectedEventError("degenerate backscatter cone")
    apex = detector_pose.transform_point(c_e)
    axis = detector_pose.rotate(unit(diff))
    return ComptonCone(apex, axis, theta)


def _any_perpendicular(axis: np.ndarray) -> np.ndarray:
    """Deterministic unit vector perpendicular to `axis`.

    Crosses the axis with world x, falling back to world y near-parallel.
    """
    e = np.cross(axis, np.array([1.0, 0.0, 0.0]))
    n = float(np.linalg.norm(e))
    if n < 1e-6:
        e = np.cross(axis, np.array([0.0, 1.0, 0.0]))
        n = float(np.linalg.norm(e))
    return e / n


def _axis_frame(rel: np.ndarray, axis: np.ndarray):
    """Split rel into axial/lateral parts; returns (d_ax, d_perp, e_perp).

    When rel is (numerically) parallel to the axis the lateral direction is
    undefined and the deterministic perpendicular is used instead.
    """
    d_ax = float(rel @ axis)
    perp = rel - d_ax * axis
    d_perp = float(np.linalg.norm(perp))
    if d_perp > 1e-12 * max(1.0, abs(d_ax)):
        return d_ax, d_perp, perp / d_perp
    return d_ax, 0.0, _any_perpendicular(axis)


def project_point_onto_cone(cone: ComptonCone, point: np.ndarray) -> np.ndarray:
    """Nearest point on the (one-sided) cone surface to `point`.

    Computed in the plane spanned by the cone axis and the apex-to-point
    direction: the candidate foot lies along the in-plane surface ray at
    the half-angle; whenever that foot would fall behind the apex the apex
    itself is the nearest surface feature and is returned.
    """
    rel = np.asarray(point, dtype=float) - cone.apex
    r = float(np.linalg.norm(rel))
    if r < 1e-15:
        return cone.apex.copy()
    d_ax, d_perp, e_perp = _axis_frame(rel, cone.axis)
    alpha = math.atan2(d_perp, d_ax)
    beta = alpha - cone.half_angle
    if math.cos(beta) <= 0.0:
        return cone.apex.copy()
    ray = math.cos(cone.half_angle) * cone.axis + math.sin(cone.half_angle) * e_perp
    return cone.apex + ray * (r * math.cos(beta))


def point_cone_surface_distance(cone: ComptonCone, point: np.ndarray) -> float:
    """Euclidean distance from `point` to the one-sided cone surface.

    Closed form consistent with project_point_onto_cone: the apex branch
    fires exactly when the in-plane surface foot falls behind the apex.
    """
    rel = np.asarray(point, dtype=float) - cone.apex
    d_ax = float(rel @ cone.axis)
    d_perp = float(np.linalg.norm(rel - d_ax * cone.axis))
    sin_t = math.sin(cone.half_angle)
    cos_t = math.cos(cone.half_angle)
    if d_ax * cos_t + d_perp * sin_t <= 0.0:
        return math.hypot(d_ax, d_perp)
    return abs(d_perp * cos_t - d_ax * sin_t)


def cone_surface_points(cone: ComptonCone, radial: np.ndarray, azimuth: np.ndarray) -> np.ndarray:
    """Sample surface points at given radial distances and azimuths.

    Used by brute-force oracles in the test suite; vectorized over inputs.
    """
    e1 = _any_perpendicular(cone.axis)
    e2 = np.cross(cone.axis, e1)
    sin_t = math.sin(cone.half_angle)
    cos_t = math.cos(cone.half_angle)
    dirs = (
        cos_t * cone.axis[None, :]
        + sin_t * (np.cos(azimuth)[:, None] * e1[None, :] + np.sin(azimuth)[:, None] * e2[None, :])
    )
    return cone.apex[None, :] + radial[:, None] * dirs
