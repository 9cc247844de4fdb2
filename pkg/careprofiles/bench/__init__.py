# careprofiles/bench/__init__.py
"""
Scaling benchmark harness.
"""
