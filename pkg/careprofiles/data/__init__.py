# careprofiles/data/__init__.py
"""
Claim translation, synthetic mixtures and sequence files.
"""

from .records import ClaimRecord, ClaimTranslator, DropReport, translate
from .synthetic_data import MixtureSimulator, four_profile_spec, two_profile_spec

__all__ = [
    "ClaimRecord",
    "ClaimTranslator",
    "DropReport",
    "translate",
    "MixtureSimulator",
    "four_profile_spec",
    "two_profile_spec",
]
