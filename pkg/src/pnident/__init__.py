"""Engagement simulation and GRU-based identification of PN guidance parameters."""

__version__ = "0.1.0"

from .engagement import (
    AircraftParams,
    MissileParams,
    SimLimits,
    Trajectory,
    simulate,
)
from .estimator import GuidanceParamRegressor

__all__ = [
    "AircraftParams",
    "GuidanceParamRegressor",
    "MissileParams",
    "SimLimits",
    "Trajectory",
    "simulate",
    "__version__",
]
