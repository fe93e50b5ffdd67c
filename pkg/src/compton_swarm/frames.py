"""Rigid transforms between agent coordinate frames.

Agents may localize against heterogeneous origins; a known rigid transform
maps measurements between any two frames. Gravity-aligned positioning
systems share the vertical axis, so randomized frames are yaw rotations
plus horizontal offsets.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .detector import MeasurementEvent
from .geometry import ComptonCone, quat_conjugate, quat_from_yaw, quat_multiply, quat_rotate


@dataclass(frozen=True)
class FrameTransform:
    """Rigid map p -> rotate(p) + translation between two frames."""

    rotation: np.ndarray     # unit quaternion [w, x, y, z]
    translation: np.ndarray  # [m]

    def __post_init__(self):
        q = np.asarray(self.rotation, dtype=float)
        n = float(np.linalg.norm(q))
        if abs(n - 1.0) > 1e-9:
            raise ValueError("frame rotation quaternion must be normalized")
        object.__setattr__(self, "rotation", q / n)
        object.__setattr__(self, "translation", np.asarray(self.translation, dtype=float))

    @staticmethod
    def identity() -> "FrameTransform":
        return FrameTransform(np.array([1.0, 0.0, 0.0, 0.0]), np.zeros(3))

    @staticmethod
    def from_yaw_offset(yaw: float, offset) -> "FrameTransform":
        return FrameTransform(quat_from_yaw(yaw), np.asarray(offset, dtype=float))

    def transform_point(self, p: np.ndarray) -> np.ndarray:
        return quat_rotate(self.rotation, p) + self.translation

    def rotate(self, v: np.ndarray) -> np.ndarray:
        return quat_rotate(self.rotation, v)

    def inverse(self) -> "FrameTransform":
        inv_q = quat_conjugate(self.rotation)
        return FrameTransform(inv_q, -quat_rotate(inv_q, self.translation))

    def compose(self, other: "FrameTransform") -> "FrameTransform":
        """Transform equal to applying `other` first, then self."""
        return FrameTransform(
            quat_multiply(self.rotation, other.rotation),
            quat_rotate(self.rotation, other.translation) + self.translation,
        )

    def transform_cone(self, cone: ComptonCone) -> ComptonCone:
        return ComptonCone(
            self.transform_point(cone.apex),
            self.rotate(cone.axis),
            cone.half_angle,
        )


def transform_measurement(event: MeasurementEvent, transform: FrameTransform,
                          frame_id: int | None = None) -> MeasurementEvent:
    """Map a measurement event into another frame.

    Rigid transforms preserve angles, so only apex and axis change. The
    frame tag is updated when the destination id is given.
    """
    return replace(
        event,
        cone=transform.transform_cone(event.cone),
        frame_id=event.frame_id if frame_id is None else frame_id,
    )
