"""Unit tests for src.harness."""
