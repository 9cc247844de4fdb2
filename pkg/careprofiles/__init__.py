# careprofiles/__init__.py
"""
Care Profiles Package

Utilization profiles for healthcare event sequences: mixtures of Markov
renewal processes fitted by divisive clustering.
"""

__version__ = "1.0.0"
