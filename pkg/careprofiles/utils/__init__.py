# careprofiles/utils/__init__.py
"""
Utility functions and helpers.
"""

from .config_loader import load_config
from .logging_config import setup_logging
from .time_helpers import days_to_months, months_to_days

__all__ = [
    "load_config",
    "setup_logging",
    "days_to_months",
    "months_to_days",
]
