"""Unit tests for src.replay."""
