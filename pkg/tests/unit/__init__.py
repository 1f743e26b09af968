"""
ReplayLab unit tests

One sub-package per source package, mirroring the src/ layout.
"""
