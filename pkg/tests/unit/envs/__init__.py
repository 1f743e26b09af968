"""Unit tests for src.envs."""
