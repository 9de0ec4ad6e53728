"""Sparse-recovery indoor positioning from WLAN RSS fingerprints."""
from .localize import LocalizationConfig, PositionEstimate, TrainedModel, localize, train
from .simulate import EnvironmentSpec, OutlierSpec, generate_online, generate_survey, generate_test_set
from .solvers import Method, PenaltyProfile, SolverOptions, estimate

__all__ = [
    "EnvironmentSpec", "LocalizationConfig", "Method", "OutlierSpec", "PenaltyProfile",
    "PositionEstimate", "SolverOptions", "TrainedModel", "estimate", "generate_online",
    "generate_survey", "generate_test_set",
    "localize", "train",
]
__version__ = "0.1.0"
