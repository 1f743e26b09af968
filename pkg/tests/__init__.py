"""
ReplayLab test package

Unit tests for the MDP core, environments, replay, estimators, weighting,
learners and the experiment harness.
"""
