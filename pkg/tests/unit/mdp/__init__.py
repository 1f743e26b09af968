"""Unit tests for src.mdp."""
