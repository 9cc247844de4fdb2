"""
Test package for the care profiles application.
"""
