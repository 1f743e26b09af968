"""CLI Interface Module

Command-line interface for ReplayLab.
"""

from .main import main, build_parser

__all__ = ["main", "build_parser"]
