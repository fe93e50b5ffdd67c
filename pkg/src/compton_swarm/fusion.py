"""Source-position estimation: cone-fusion Kalman filter and NLLS init.

The filter runs track-by-detection with identity dynamics: prediction only
inflates the covariance, and each cone becomes a full-position pseudo
measurement by projecting the current estimate onto the cone surface. The
measurement covariance is tight along the projection axis and inflated by
`off_axis_factor` elsewhere, so a single cone only adds confidence in the
one direction it actually constrains.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import (
    ComptonCone,
    _any_perpendicular,
    _axis_frame,
    point_cone_surface_distance,
    project_point_onto_cone,
)


class SingularCorrectionError(RuntimeError):
    """Innovation covariance was numerically singular; correction skipped."""


class InitializationError(RuntimeError):
    """No NLLS start converged; caller should keep collecting cones."""


@dataclass(frozen=True)
class Hypothesis:
    """Estimated source position x [m] with 3x3 covariance P [m^2]."""

    x: np.ndarray
    P: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))
        object.__setattr__(self, "P", np.asarray(self.P, dtype=float))


@dataclass(frozen=True)
class FusionConfig:
    rho: float = 4.0                 # measurement variance along projection axis [m^2]
    off_axis_factor: float = 1e4     # covariance inflation off-axis
    q: float = 0.1                   # per-correction process noise diagonal [m^2]
    p0: float = 400.0                # initial covariance diagonal [m^2]
    M: int = 20                      # cones required before initialization

    def __post_init__(self):
        if min(self.rho, self.off_axis_factor, self.q, self.p0) < 0.0 or self.rho == 0.0:
            raise ValueError("fusion parameters must be positive")
        if self.M < 3:
            raise ValueError("initialization needs at least 3 cones")


def lkf_predict(h: Hypothesis, cfg: FusionConfig) -> Hypothesis:
    """Prediction step: state unchanged, covariance inflated by q*I."""
    if cfg.q == 0.0:
        return h
    return Hypothesis(h.x, h.P + cfg.q * np.eye(3))


def rotation_aligning_x(target: np.ndarray) -> np.ndarray:
    """Rotation matrix taking the world x axis onto unit vector `target`.

    Minimal (axis-angle from the cross product); the antipodal case uses a
    fixed half-turn about z so the result stays deterministic.
    """
    c = float(target[0])  # cos of rotation angle
    if c < -1.0 + 1e-12:
        return np.diag([-1.0, -1.0, 1.0])
    v = np.array([0.0, -target[2], target[1]])  # x_hat cross target
    vx = np.array([
        [0.0, -v[2], v[1]],
        [v[2], 0.0, -v[0]],
        [-v[1], v[0], 0.0],
    ])
    return np.eye(3) + vx + vx @ vx / (1.0 + c)


def _surface_normal(cone: ComptonCone, point_on_surface: np.ndarray) -> np.ndarray:
    """Outward surface normal at a point of the cone (axis at the apex)."""
    rel = point_on_surface - cone.apex
    if float(rel @ rel) < 1e-24:
        return cone.axis.copy()
    _, _, e_perp = _axis_frame(rel, cone.axis)
    sin_t = math.sin(cone.half_angle)
    cos_t = math.cos(cone.half_angle)
    return cos_t * e_perp - sin_t * cone.axis


def measurement_from_cone(h: Hypothesis, cone: ComptonCone, cfg: FusionConfig):
    """Convert a cone into a position pseudo-measurement (z, R).

    z is the projection of the current estimate onto the cone surface; R is
    the canonical diag(rho, rho*f, rho*f) rotated so its tight axis lies
    along (z - x). If the estimate already sits on the surface the cone's
    local surface normal is used as the alignment axis instead.
    """
    z = project_point_onto_cone(cone, h.x)
    d = z - h.x
    n = float(np.linalg.norm(d))
    if n > 1e-12:
        align = d / n
    else:
        align = _surface_normal(cone, z)
    rot = rotation_aligning_x(align)
    r_canon = np.diag([cfg.rho, cfg.rho * cfg.off_axis_factor, cfg.rho * cfg.off_axis_factor])
    r = rot @ r_canon @ rot.T
    return z, 0.5 * (r + r.T)


def lkf_correct(h: Hypothesis, z: np.ndarray, R: np.ndarray) -> Hypothesis:
    """Kalman correction with a full-position measurement (H = I)."""
    s = h.P + R
    try:
        gain = np.linalg.solve(s, h.P).T
    except np.linalg.LinAlgError as exc:
        raise SingularCorrectionError("innovation covariance is singular") from exc
    if not np.all(np.isfinite(gain)):
        raise SingularCorrectionError("innovation covariance is ill-conditioned")
    x = h.x + gain @ (np.asarray(z, dtype=float) - h.x)
    p = (np.eye(3) - gain) @ h.P
    return Hypothesis(x, 0.5 * (p + p.T))


def fuse_cone(h: Hypothesis, cone: ComptonCone, cfg: FusionConfig) -> Hypothesis:
    """Single entry point per received cone: predict, project, correct."""
    predicted = lkf_predict(h, cfg)
    z, r = measurement_from_cone(predicted, cone, cfg)
    return lkf_correct(predicted, z, r)


# ---------------------------------------------------------------------------
# Batch initialization
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NllsConfig:
    """Initializer settings: grid of starts and Levenberg-Marquardt knobs."""

    grid: int = 5                 # starts per horizontal axis (grid x grid)
    height: float = 4.0           # z of the start plane [m]
    z_min: float = 0.0            # clamp box, vertical extent [m]
    z_max: float = 20.0
    max_iters: int = 60
    gradient_tol: float = 1e-9    # convergence: norm of the cost gradient
    step_tol: float = 1e-10       # convergence: norm of the accepted step
    lm_lambda0: float = 1e-3
    lm_factor: float = 10.0
    lm_lambda_max: float = 1e12


class _ConeArrays:
    """Stacked cone geometry for vectorized residual evaluation."""

    def __init__(self, cones: list[ComptonCone]):
        self.apex = np.stack([c.apex for c in cones])
        self.axis = np.stack([c.axis for c in cones])
        half = np.array([c.half_angle for c in cones])
        self.sin_t = np.sin(half)
        self.cos_t = np.cos(half)
        self.fallback = np.stack([_any_perpendicular(c.axis) for c in cones])

    def residuals_jacobian(self, p: np.ndarray):
        """Distance residual and its gradient per cone, both (M,) / (M,3)."""
        rel = p[None, :] - self.apex
        d_ax = np.einsum("ij,ij->i", rel, self.axis)
        perp = rel - d_ax[:, None] * self.axis
        d_perp = np.linalg.norm(perp, axis=1)
        safe = d_perp > 1e-12
        e_perp = np.where(safe[:, None], perp / np.where(safe, d_perp, 1.0)[:, None],
                          self.fallback)

        res = np.empty(len(d_ax))
        jac = np.empty((len(d_ax), 3))

        apex_branch = d_ax * self.cos_t + d_perp * self.sin_t <= 0.0
        if np.any(apex_branch):
            r_full = np.linalg.norm(rel[apex_branch], axis=1)
            res[apex_branch] = r_full
            nonzero = r_full > 1e-12
            grads = np.zeros_like(rel[apex_branch])
            grads[nonzero] = rel[apex_branch][nonzero] / r_full[nonzero, None]
            jac[apex_branch] = grads
        lateral = ~apex_branch
        if np.any(lateral):
            g = d_perp[lateral] * self.cos_t[lateral] - d_ax[lateral] * self.sin_t[lateral]
            sign = np.where(g >= 0.0, 1.0, -1.0)
            res[lateral] = np.abs(g)
            jac[lateral] = sign[:, None] * (
                self.cos_t[lateral, None] * e_perp[lateral]
                - self.sin_t[lateral, None] * self.axis[lateral]
            )
        return res, jac


def _levenberg_marquardt(arrays: _ConeArrays, start: np.ndarray, cfg: NllsConfig):
    """Damped Gauss-Newton from one start; returns (p, cost, converged)."""
    p = start.astype(float).copy()
    res, jac = arrays.residuals_jacobian(p)
    cost = float(res @ res)
    lam = cfg.lm_lambda0
    converged = False
    for _ in range(cfg.max_iters):
        grad = 2.0 * (jac.T @ res)
        if float(np.linalg.norm(grad)) <= cfg.gradient_tol:
            converged = True
            break
        jtj = jac.T @ jac
        stepped = False
        while lam <= cfg.lm_lambda_max:
            try:
                delta = np.linalg.solve(jtj + lam * np.eye(3), -0.5 * grad)
            except np.linalg.LinAlgError:
                lam *= cfg.lm_factor
                continue
            trial = p + delta
            trial_res, trial_jac = arrays.residuals_jacobian(trial)
            trial_cost = float(trial_res @ trial_res)
            if trial_cost < cost:
                p, res, jac, cost = trial, trial_res, trial_jac, trial_cost
                lam = max(lam / cfg.lm_factor, 1e-12)
                stepped = True
                if float(np.linalg.norm(delta)) <= cfg.step_tol:
                    converged = True
                break
            lam *= cfg.lm_factor
        if not stepped or converged:
            break
    if not converged:
        grad = 2.0 * (jac.T @ res)
        converged = float(np.linalg.norm(grad)) <= cfg.gradient_tol
    return p, cost, converged


def init_hypothesis_nlls(cones: list[ComptonCone], bounds, solver: NllsConfig,
                         frame=None) -> np.ndarray:
    """Batch initializer: point minimizing summed squared cone distances.

    Runs Levenberg-Marquardt from a grid x grid lattice of starts spread
    over `bounds` (an object with x_min/x_max/y_min/y_max) at the start
    plane height, keeps the best converged optimum (ties broken by start
    index), and clamps the result to the bounds box.

    `frame` optionally maps bounds coordinates into the frame the cones
    are expressed in (a FrameTransform); starts and the final clamp are
    evaluated in bounds coordinates so results agree across agent frames.

    Raises:
        InitializationError: no start converged.
    """
    if len(cones) < 3:
        raise InitializationError("need at least 3 cones")
    arrays = _ConeArrays(list(cones))
    g = max(1, solver.grid)
    xs = bounds.x_min + (np.arange(g) + 0.5) * (bounds.x_max - bounds.x_min) / g
    ys = bounds.y_min + (np.arange(g) + 0.5) * (bounds.y_max - bounds.y_min) / g

    best = None
    idx = 0
    for y in ys:
        for x in xs:
            start = np.array([x, y, solver.height])
            if frame is not None:
                start = frame.transform_point(start)
            p, cost, ok = _levenberg_marquardt(arrays, start, solver)
            if ok and (best is None or cost < best[0]):
                best = (cost, idx, p)
            idx += 1
    if best is None:
        raise InitializationError("no start converged within iteration budget")

    result = best[2]
    if frame is not None:
        result = frame.inverse().transform_point(result)
    result = np.array([
        min(bounds.x_max, max(bounds.x_min, result[0])),
        min(bounds.y_max, max(bounds.y_min, result[1])),
        min(solver.z_max, max(solver.z_min, result[2])),
    ])
    if frame is not None:
        result = frame.transform_point(result)
    return result


def nlls_objective(cones: list[ComptonCone], p: np.ndarray) -> float:
    """Summed squared distances from p to the cone surfaces."""
    return float(sum(point_cone_surface_distance(c, p) ** 2 for c in cones))
