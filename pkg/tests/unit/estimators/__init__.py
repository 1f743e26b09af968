"""Unit tests for src.estimators."""
