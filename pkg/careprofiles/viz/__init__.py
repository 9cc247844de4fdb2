# careprofiles/viz/__init__.py
"""
Profile network rendering.
"""

from .network import build_network, emit_dot, volume_table

__all__ = ["build_network", "emit_dot", "volume_table"]
