"""Toy chain: a tiny adversarial MDP small enough to enumerate exactly.

Each step adds the chosen action index to an accumulator. The episode
fails when the accumulator reaches the threshold after `horizon` steps.
State rows are [step, accumulator].
"""

import numpy as np

from rare_ais.core.mdp import ActionKind, ActionSpace, AdversarialMdp
from rare_ais.errors import ArgumentError


CHAIN_PROBABILITIES = (0.8, 0.15, 0.05)
CHAIN_HORIZON = 5
CHAIN_THRESHOLD = 8


class ChainMdp(AdversarialMdp):
    """Accumulator chain with a sparse 0/1 terminal return."""

    state_dim = 2
    feature_dim = 2

    def __init__(
        self,
        horizon: int = CHAIN_HORIZON,
        probs: tuple[float, ...] = CHAIN_PROBABILITIES,
        threshold: int = CHAIN_THRESHOLD,
        gamma: float = 0.5,
    ):
        if horizon < 1:
            raise ArgumentError("chain horizon must be positive")
        if min(probs) <= 0.0 or abs(sum(probs) - 1.0) > 1e-12:
            raise ArgumentError("chain probabilities must be positive and sum to 1")
        self.horizon = int(horizon)
        self.threshold = int(threshold)
        self.gamma = float(gamma)
        self._probs = np.array(probs, dtype=np.float64)
        self.action_space = ActionSpace(ActionKind.DISCRETE, len(probs))

    @property
    def failure_threshold(self) -> float:
        return self.gamma

    @property
    def name(self) -> str:
        return "chain"

    @property
    def max_accumulator(self) -> int:
        return (self.action_space.size - 1) * self.horizon

    def initial_state(self) -> np.ndarray:
        return np.zeros(2, dtype=np.float64)

    def step(self, states, actions):
        states = np.atleast_2d(states)
        actions = np.asarray(actions, dtype=np.float64)
        next_states = np.stack([states[:, 0] + 1.0, states[:, 1] + actions], axis=1)
        return next_states, next_states[:, 0] >= self.horizon

    def terminal_return(self, states):
        states = np.atleast_2d(states)
        terminal = states[:, 0] >= self.horizon
        return np.where(terminal & (states[:, 1] >= self.threshold), 1.0, 0.0)

    def features(self, states):
        states = np.atleast_2d(states)
        return np.stack(
            [states[:, 0] / self.horizon, states[:, 1] / max(self.max_accumulator, 1)], axis=1
        )

    def nominal_probs(self, states):
        return np.broadcast_to(self._probs, (len(np.atleast_2d(states)), len(self._probs)))

    def params(self) -> dict:
        return {
            "name": self.name,
            "horizon": self.horizon,
            "threshold": self.threshold,
            "probs": self._probs.tolist(),
        }
