"""
Episodic interaction driver

Steps a TabularMdp with a seeded random stream, adds optional Gaussian
reward noise from an independent stream, and produces Transition records
with trajectory bookkeeping. Distance-to-end is backfilled once an episode
ends, either at a terminal state or at the step limit (censored).

Author: ReplayLab Team
Version: 0.3.0
Python: >=3.9
"""

from dataclasses import dataclass, replace
from typing import List, Optional, Sequence

import numpy as np
from loguru import logger

from ..mdp import PolicyTable, TabularMdp, check_policy


@dataclass(frozen=True)
class Transition:
    """
    One replay record.

    Attributes:
        s: State id
        a: Action id
        r: Observed (possibly noisy) reward
        s_next: Next state id
        done: True when s_next is terminal (zero bootstrap)
        trajectory_id: Episode counter of the producing driver
        step_index: Position within the trajectory, from 0
        distance_to_end: Steps remaining after this one; None until backfilled
        censored: True when the episode was cut by the step limit
    """
    s: int
    a: int
    r: float
    s_next: int
    done: bool
    trajectory_id: int
    step_index: int
    distance_to_end: Optional[int] = None
    censored: bool = False


def backfill_distances(transitions: Sequence[Transition], censored: bool = False) -> List[Transition]:
    """Set distance_to_end = (last step index) - step_index on every transition."""
    if not transitions:
        return []
    last = transitions[-1].step_index
    return [replace(t, distance_to_end=last - t.step_index, censored=censored) for t in transitions]


def _draw(cdf: np.ndarray, u: float) -> int:
    return min(int(np.searchsorted(cdf, u, side="right")), len(cdf) - 1)


class EpisodeDriver:
    """
    Seeded single-episode stepper for a TabularMdp.

    Dynamics and action sampling share one stream; reward noise comes from a
    second stream spawned from the same seed, so changing the noise level
    never changes the visited states or sampled actions.
    """

    def __init__(
        self,
        mdp: TabularMdp,
        seed: int = 0,
        max_episode_steps: int = 200,
        reward_noise_sigma: float = 0.0,
    ):
        if max_episode_steps < 1:
            raise ValueError(f"max_episode_steps must be >= 1, got {max_episode_steps}")
        if reward_noise_sigma < 0.0:
            raise ValueError(f"reward_noise_sigma must be >= 0, got {reward_noise_sigma}")

        self.mdp = mdp
        self.seed = seed
        self.max_episode_steps = max_episode_steps
        self.reward_noise_sigma = reward_noise_sigma

        dynamics_seq, noise_seq = np.random.SeedSequence(seed).spawn(2)
        self.rng = np.random.default_rng(dynamics_seq)
        self._noise_rng = np.random.default_rng(noise_seq)
        self._transition_cdf = np.cumsum(mdp.transition, axis=2)
        self._initial_cdf = np.cumsum(mdp.initial_distribution)

        self.state: Optional[int] = None
        self.trajectory_id = -1
        self.step_index = 0
        self.episode_finished = True
        self.truncated = False

    def reset(self) -> int:
        """Start a new trajectory and return its initial state."""
        self.trajectory_id += 1
        self.step_index = 0
        self.truncated = False
        self.state = _draw(self._initial_cdf, self.rng.random())
        self.episode_finished = self.state in self.mdp.terminal_states
        return self.state

    def step(self, action: int) -> Transition:
        """
        Take one action in the current episode.

        Raises:
            RuntimeError: If no episode is running
            ValueError: If the action is illegal in the current state
        """
        if self.episode_finished or self.state is None:
            raise RuntimeError("episode is over; call reset() first")
        s = self.state
        if not 0 <= action < self.mdp.n_actions_per_state[s]:
            raise ValueError(f"action {action} is illegal in state {self.mdp.label(s)}")

        s_next = _draw(self._transition_cdf[s, action], self.rng.random())
        reward = float(self.mdp.reward[s, action])
        if self.reward_noise_sigma > 0.0:
            reward += float(self._noise_rng.normal(0.0, self.reward_noise_sigma))
        done = s_next in self.mdp.terminal_states

        transition = Transition(
            s=s,
            a=action,
            r=reward,
            s_next=s_next,
            done=done,
            trajectory_id=self.trajectory_id,
            step_index=self.step_index,
        )

        self.state = s_next
        self.step_index += 1
        if done:
            self.episode_finished = True
        elif self.step_index >= self.max_episode_steps:
            self.episode_finished = True
            self.truncated = True
        return transition

    def sample_action(self, pi: PolicyTable, state: int) -> int:
        return _draw(np.cumsum(pi[state]), self.rng.random())


def run_episode(driver: EpisodeDriver, pi: PolicyTable) -> List[Transition]:
    """
    Roll out one episode under pi and backfill distance-to-end.

    Transitions of an episode cut by the step limit are flagged censored.
    """
    pi = check_policy(pi, driver.mdp)
    state = driver.reset()
    transitions: List[Transition] = []
    while not driver.episode_finished:
        transitions.append(driver.step(driver.sample_action(pi, state)))
        state = driver.state

    if driver.truncated:
        logger.debug(f"Trajectory {driver.trajectory_id} censored at {driver.max_episode_steps} steps")
    return backfill_distances(transitions, censored=driver.truncated)
