# careprofiles/core/__init__.py
"""
Core estimation and clustering components.

Import from the submodules directly; models.sequences depends on
core.errors, so this package initializer stays import-free.
"""
