"""Cooperative gamma-source localization and tracking simulator.

Library layout mirrors the processing pipeline: geometry (cones and
scattering), detector (synthetic measurements), fusion (LKF + NLLS
initialization), flocking (search and encirclement planning), vehicle
(trajectory tracking), simulation (the deterministic world), metrics,
montecarlo, and plotting, with a CLI in cli.
"""

from .detector import DetectorConfig, MeasurementEvent, SourceState
from .flocking import AreaBounds, FlockConfig, PolarPos, TrajectoryPoint
from .frames import FrameTransform, transform_measurement
from .fusion import FusionConfig, Hypothesis, NllsConfig
from .geometry import ComptonCone, Pose, ScatterPair
from .runlog import RunLog
from .simulation import run_flocking_stabilization, run_scenario
from .vehicle import VehicleLimits, VehicleState

__version__ = "0.1.0"

__all__ = [
    "AreaBounds",
    "ComptonCone",
    "DetectorConfig",
    "FlockConfig",
    "FrameTransform",
    "FusionConfig",
    "Hypothesis",
    "MeasurementEvent",
    "NllsConfig",
    "PolarPos",
    "Pose",
    "RunLog",
    "ScatterPair",
    "SourceState",
    "TrajectoryPoint",
    "VehicleLimits",
    "VehicleState",
    "run_flocking_stabilization",
    "run_scenario",
    "transform_measurement",
    "__version__",
]
