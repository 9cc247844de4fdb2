# careprofiles/models/__init__.py
"""
Data models for sequences, parameters, configuration and reports.
"""

from .config import AppConfig, GeneratorSpec, MappingConfig
from .params import MrpParams, ProfileModel, SufficientStats
from .results import ClusterTree, FitReport, SplitRecord
from .sequences import EventSequence, StateSpace

__all__ = [
    "AppConfig",
    "GeneratorSpec",
    "MappingConfig",
    "MrpParams",
    "ProfileModel",
    "SufficientStats",
    "ClusterTree",
    "FitReport",
    "SplitRecord",
    "EventSequence",
    "StateSpace",
]
