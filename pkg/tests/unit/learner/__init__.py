"""Unit tests for src.learner."""
