"""Unit tests for src.weighting."""
