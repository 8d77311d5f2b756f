"""Adversarial MDP abstraction, trajectories and rollouts.

In an adversarial MDP the actions are the variables that drive the
environment's randomness. The nominal action density pi(a|s) is known,
transitions are deterministic given the action, and the risk return is
sparse: only the terminal state carries it.

All state, action and log-density arrays are vectorised over a leading
batch axis so that a whole batch of rollouts advances in lockstep.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from rare_ais.core.distributions import (
    categorical_logprob,
    gaussian_logprob,
    sample_categorical,
)
from rare_ais.errors import ArgumentError, NumericalFailureError, WeightOverflowError


class ActionKind(Enum):
    """Whether the environment's actions are support indices or real vectors."""

    DISCRETE = "discrete"
    CONTINUOUS = "continuous"


@dataclass(frozen=True)
class ActionSpace:
    """Action description: support size for discrete, dimension for continuous."""

    kind: ActionKind
    size: int

    def draw_noise(self, rng: np.random.Generator, horizon: int) -> np.ndarray:
        """Draw the per-step base noise one trajectory consumes.

        Discrete policies turn a uniform into an index by inverse CDF,
        Gaussian policies shift and scale a standard normal.
        """
        if self.kind is ActionKind.DISCRETE:
            return rng.random(horizon)
        return rng.standard_normal((horizon, self.size))


def trajectory_stream(seed: int, index: int) -> np.random.Generator:
    """Random stream owned by trajectory `index` of an experiment."""
    return np.random.default_rng([seed, index])


def auxiliary_stream(seed: int, tag: int, member: int = 0) -> np.random.Generator:
    """Random stream for non-rollout randomness (initialisation, replay, ...)."""
    return np.random.default_rng([seed, tag, member, 0x5EED])


class AdversarialMdp(ABC):
    """Episodic environment with known nominal action density and sparse return.

    Subclasses provide the deterministic transition, the terminal return and
    either `nominal_probs` (discrete) or `nominal_mean_std` (continuous).
    """

    horizon: int
    action_space: ActionSpace
    state_dim: int
    feature_dim: int

    @property
    def failure_threshold(self) -> float:
        """Default gamma: a trajectory fails when its return exceeds this."""
        return 0.0

    @abstractmethod
    def initial_state(self) -> np.ndarray:
        """The (state_dim,) initial state."""

    @abstractmethod
    def step(self, states: np.ndarray, actions: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Advance (N, S) states by (N, ...) actions; returns next states and done flags."""

    @abstractmethod
    def terminal_return(self, states: np.ndarray) -> np.ndarray:
        """Risk value R of (N, S) states; zero for non-terminal states."""

    @abstractmethod
    def features(self, states: np.ndarray) -> np.ndarray:
        """Network input encoding (N, feature_dim) of (N, S) states."""

    def nominal_probs(self, states: np.ndarray) -> np.ndarray:
        """(N, K) nominal action probabilities; discrete environments only."""
        raise NotImplementedError

    def nominal_mean_std(self, states: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(N, d) nominal Gaussian mean and std; continuous environments only."""
        raise NotImplementedError

    def initial_states(self, n: int) -> np.ndarray:
        return np.tile(self.initial_state(), (n, 1))

    def nominal_logprob(self, states: np.ndarray, actions: np.ndarray) -> np.ndarray:
        """log pi(a|s) for each row."""
        if self.action_space.kind is ActionKind.DISCRETE:
            return categorical_logprob(self.nominal_probs(states), actions)
        mean, std = self.nominal_mean_std(states)
        return gaussian_logprob(mean, std, actions)

    def nominal_act(self, states: np.ndarray, noise: np.ndarray) -> np.ndarray:
        """Map base noise to nominal actions."""
        if self.action_space.kind is ActionKind.DISCRETE:
            return sample_categorical(self.nominal_probs(states), noise)
        mean, std = self.nominal_mean_std(states)
        return mean + std * noise

    def nominal_sample(self, states: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """Draw one nominal action per row of `states`."""
        n = len(states)
        if self.action_space.kind is ActionKind.DISCRETE:
            noise = rng.random(n)
        else:
            noise = rng.standard_normal((n, self.action_space.size))
        return self.nominal_act(states, noise)

    def nominal_returns(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Returns of `n` nominal episodes simulated as one vectorised batch."""
        states = self.initial_states(n)
        for _ in range(self.horizon):
            actions = self.nominal_sample(states, rng)
            states, done = self.step(states, actions)
            if np.all(done):
                break
        return self.terminal_return(states)

    def action_values(self, actions: np.ndarray) -> np.ndarray:
        """Real-valued reading of per-row actions, used for diagnostics."""
        return np.asarray(actions, dtype=np.float64).reshape(len(actions), -1)[:, 0]

    def flatten_actions(self, actions: np.ndarray) -> np.ndarray:
        """Reshape a (N, T, ...) action block into per-step rows."""
        if self.action_space.kind is ActionKind.DISCRETE:
            return actions.reshape(-1)
        return actions.reshape(-1, self.action_space.size)


def _readonly(array: np.ndarray) -> np.ndarray:
    array = np.array(array, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class Trajectory:
    """One rolled-out episode.

    `nominal_logps[t]` and `proposal_logps[t]` are the log densities of
    `actions[t]` at `states[t]` under pi and under the proposal that
    generated the trajectory.
    """

    states: np.ndarray
    actions: np.ndarray
    nominal_logps: np.ndarray
    proposal_logps: np.ndarray
    ret: float
    proposal_index: int = 0

    def __post_init__(self) -> None:
        n = len(self.states) - 1
        if not (len(self.actions) == len(self.nominal_logps) == len(self.proposal_logps) == n):
            raise ArgumentError(
                "trajectory lengths disagree: "
                f"{len(self.states)} states, {len(self.actions)} actions, "
                f"{len(self.nominal_logps)}/{len(self.proposal_logps)} log densities"
            )
        for name in ("states", "actions", "nominal_logps", "proposal_logps"):
            object.__setattr__(self, name, _readonly(getattr(self, name)))
        object.__setattr__(self, "ret", float(self.ret))

    def __len__(self) -> int:
        return len(self.actions)

    @property
    def log_weight(self) -> float:
        return float(np.sum(self.nominal_logps) - np.sum(self.proposal_logps))


@dataclass(frozen=True)
class TrajectoryBatch:
    """Equal-length trajectories stacked along a leading axis."""

    states: np.ndarray          # (N, T+1, S)
    actions: np.ndarray         # (N, T) or (N, T, d)
    nominal_logps: np.ndarray   # (N, T)
    proposal_logps: np.ndarray  # (N, T)
    returns: np.ndarray         # (N,)
    proposal_index: np.ndarray  # (N,)

    @classmethod
    def stack(cls, trajectories: Sequence[Trajectory]) -> "TrajectoryBatch":
        if not trajectories:
            raise ArgumentError("cannot stack an empty trajectory list")
        return cls(
            states=np.stack([t.states for t in trajectories]),
            actions=np.stack([t.actions for t in trajectories]),
            nominal_logps=np.stack([t.nominal_logps for t in trajectories]),
            proposal_logps=np.stack([t.proposal_logps for t in trajectories]),
            returns=np.array([t.ret for t in trajectories]),
            proposal_index=np.array([t.proposal_index for t in trajectories], dtype=np.int64),
        )

    def __len__(self) -> int:
        return len(self.returns)

    @property
    def horizon(self) -> int:
        return self.nominal_logps.shape[1]

    def step_states(self) -> np.ndarray:
        """States at which each action was taken, as (N*T, S) rows."""
        return self.states[:, :-1].reshape(-1, self.states.shape[-1])

    def select(self, mask: np.ndarray) -> "TrajectoryBatch":
        return TrajectoryBatch(
            states=self.states[mask],
            actions=self.actions[mask],
            nominal_logps=self.nominal_logps[mask],
            proposal_logps=self.proposal_logps[mask],
            returns=self.returns[mask],
            proposal_index=self.proposal_index[mask],
        )


@dataclass(frozen=True)
class SampleRecord:
    """(return, weight, provenance) entry of the estimation dataset D.

    The weight is held in log space and exponentiated on access.
    """

    ret: float
    log_weight: float = 0.0
    proposal_index: int = 0

    def __post_init__(self) -> None:
        with np.errstate(over="ignore"):
            weight = np.exp(self.log_weight)
        if not np.isfinite(weight):
            raise WeightOverflowError(self.log_weight)

    @property
    def weight(self) -> float:
        return float(np.exp(self.log_weight))


class ProposalPolicy(ABC):
    """State-conditional action distribution used to generate rollouts."""

    kind: ActionKind

    @abstractmethod
    def act(self, env: AdversarialMdp, states: np.ndarray, noise: np.ndarray) -> np.ndarray:
        """Turn per-row base noise into actions."""

    @abstractmethod
    def log_prob(self, env: AdversarialMdp, states: np.ndarray, actions: np.ndarray) -> np.ndarray:
        """log q(a|s) per row."""


class DiscretePolicy(ProposalPolicy):
    """Policy over support indices defined by a probability matrix."""

    kind = ActionKind.DISCRETE

    @abstractmethod
    def probs(self, env: AdversarialMdp, states: np.ndarray) -> np.ndarray:
        """(N, K) action probabilities."""

    def act(self, env, states, noise):
        return sample_categorical(self.probs(env, states), noise)

    def log_prob(self, env, states, actions):
        return categorical_logprob(self.probs(env, states), actions)


class GaussianPolicy(ProposalPolicy):
    """Diagonal Gaussian policy over real action vectors."""

    kind = ActionKind.CONTINUOUS

    @abstractmethod
    def mean_std(self, env: AdversarialMdp, states: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(N, d) mean and standard deviation."""

    def act(self, env, states, noise):
        mean, std = self.mean_std(env, states)
        return mean + std * noise

    def log_prob(self, env, states, actions):
        mean, std = self.mean_std(env, states)
        return gaussian_logprob(mean, std, actions)


@dataclass
class NominalPolicy(ProposalPolicy):
    """The environment's own pi(a|s), usable as a proposal."""

    kind: ActionKind

    @classmethod
    def for_env(cls, env: AdversarialMdp) -> "NominalPolicy":
        return cls(kind=env.action_space.kind)

    def act(self, env, states, noise):
        return env.nominal_act(states, noise)

    def log_prob(self, env, states, actions):
        return env.nominal_logprob(states, actions)


def rollout_batch(
    env: AdversarialMdp,
    proposal: ProposalPolicy,
    rngs: Sequence[np.random.Generator],
    proposal_index: int = 0,
) -> list[Trajectory]:
    """Roll out one trajectory per random stream, all advancing in lockstep.

    Each trajectory draws its whole noise sequence from its own stream, so
    the result for a stream does not depend on which other streams share
    the batch.

    Raises:
        ArgumentError: proposal and environment disagree on the action kind,
            or trajectories in the batch terminate at different steps.
        NumericalFailureError: a transition produced a non-finite state.
    """
    if proposal.kind is not env.action_space.kind:
        raise ArgumentError(
            f"{proposal.kind.value} proposal cannot drive a {env.action_space.kind.value} environment"
        )
    n = len(rngs)
    if n == 0:
        return []
    noise = np.stack([env.action_space.draw_noise(rng, env.horizon) for rng in rngs])

    states = env.initial_states(n)
    history = [states]
    actions, nominal, proposed = [], [], []
    for t in range(env.horizon):
        a = proposal.act(env, states, noise[:, t])
        proposed.append(proposal.log_prob(env, states, a))
        nominal.append(env.nominal_logprob(states, a))
        states, done = env.step(states, a)
        if not np.all(np.isfinite(states)):
            raise NumericalFailureError(t + 1)
        history.append(states)
        actions.append(a)
        if np.any(done):
            if not np.all(done):
                raise ArgumentError("trajectories in one batch must terminate at the same step")
            break

    rets = env.terminal_return(states)
    state_block = np.stack(history, axis=1)
    action_block = np.stack(actions, axis=1)
    nominal_block = np.stack(nominal, axis=1)
    proposal_block = np.stack(proposed, axis=1)
    return [
        Trajectory(
            states=state_block[i],
            actions=action_block[i],
            nominal_logps=nominal_block[i],
            proposal_logps=proposal_block[i],
            ret=rets[i],
            proposal_index=proposal_index,
        )
        for i in range(n)
    ]


def rollout(
    env: AdversarialMdp,
    proposal: ProposalPolicy,
    rng: np.random.Generator,
    proposal_index: int = 0,
) -> Trajectory:
    """Roll out a single trajectory under `proposal`."""
    return rollout_batch(env, proposal, [rng], proposal_index)[0]
