"""Value-based adaptive importance sampling.

A Q network learns the failure probability-to-go Q(s, a) by bootstrapping
over replayed transitions. The proposal follows q(a|s) = Q(s,a) pi(a|s) / V(s):
discrete members act on it directly, continuous members fit a Gaussian
policy toward it.
"""

import itertools
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from rare_ais.core.mdp import (
    ActionKind,
    AdversarialMdp,
    DiscretePolicy,
    Trajectory,
    TrajectoryBatch,
    auxiliary_stream,
)
from rare_ais.estimators.config import EstimatorConfig, Method, ReplayWeights
from rare_ais.estimators.dataset import EstimateResult
from rare_ais.estimators.loop import (
    INIT_STREAM,
    PRETRAIN_STREAM,
    REPARAM_STREAM,
    REPLAY_STREAM,
    nominal_mixture,
    run_adaptive,
)
from rare_ais.estimators.mixture import MixtureProposal, mis_reassign
from rare_ais.estimators.pretrain import pretrain
from rare_ais.neural.networks import NeuralGaussianPolicy, QNetwork, create_policy


logger = logging.getLogger(__name__)


# ---- Replay ----


@dataclass(frozen=True, eq=False)
class TransitionRecord:
    """Step `step` of a stored trajectory, with its insertion-time partial log weights."""

    trajectory: Trajectory
    step: int
    member: int = 0
    inclusive_log_weight: float = 0.0
    exclusive_log_weight: float = 0.0

    @property
    def state(self) -> np.ndarray:
        return self.trajectory.states[self.step]

    @property
    def action(self) -> np.ndarray:
        return self.trajectory.actions[self.step]

    @property
    def next_state(self) -> np.ndarray:
        return self.trajectory.states[self.step + 1]

    @property
    def terminal(self) -> bool:
        return self.step == len(self.trajectory) - 1

    @property
    def nominal_logp(self) -> float:
        return float(self.trajectory.nominal_logps[self.step])

    @property
    def proposal_logp(self) -> float:
        return float(self.trajectory.proposal_logps[self.step])


class ReplayBuffer:
    """Fixed-capacity transition store with first-in-first-out eviction."""

    def __init__(self, capacity: int = 64_000):
        self.capacity = capacity
        self._items: list[TransitionRecord] = []
        self._next = 0

    def __len__(self) -> int:
        return len(self._items)

    def push(self, record: TransitionRecord) -> None:
        if len(self._items) < self.capacity:
            self._items.append(record)
        else:
            self._items[self._next] = record
        self._next = (self._next + 1) % self.capacity

    def extend(self, records: list[TransitionRecord]) -> None:
        for record in records:
            self.push(record)

    def sample(self, rng: np.random.Generator, size: int) -> list[TransitionRecord]:
        """Uniform draw without replacement of up to `size` records."""
        size = min(size, len(self._items))
        idx = rng.choice(len(self._items), size=size, replace=False)
        return [self._items[i] for i in idx]


def transitions_from_batch(
    batch_trajectories: list[Trajectory],
    members: np.ndarray,
    inclusive: np.ndarray,
    exclusive: np.ndarray,
) -> list[TransitionRecord]:
    return [
        TransitionRecord(traj, t, int(members[i]), float(inclusive[i, t]), float(exclusive[i, t]))
        for i, traj in enumerate(batch_trajectories)
        for t in range(len(traj))
    ]


def _stack_steps(records: list[TransitionRecord]):
    states = np.stack([r.state for r in records])
    actions = np.stack([r.action for r in records])
    next_states = np.stack([r.next_state for r in records])
    terminal = np.array([r.terminal for r in records])
    return states, actions, next_states, terminal


def _exclusive(inclusive: np.ndarray) -> np.ndarray:
    """Shift running log weights one step so each covers only earlier actions."""
    return np.concatenate([np.zeros((inclusive.shape[0], 1)), inclusive[:, :-1]], axis=1)


def replay_log_weights(
    env: AdversarialMdp,
    records: list[TransitionRecord],
    mixture: MixtureProposal,
    mode: ReplayWeights = ReplayWeights.CURRENT,
) -> tuple[np.ndarray, np.ndarray]:
    """Inclusive and exclusive partial log weights for replayed transitions.

    `CURRENT` re-evaluates each stored trajectory under the present
    sampling mixture; `FROZEN` returns the values stored at insertion.
    """
    if mode is ReplayWeights.FROZEN:
        return (
            np.array([r.inclusive_log_weight for r in records]),
            np.array([r.exclusive_log_weight for r in records]),
        )
    batch = TrajectoryBatch.stack([r.trajectory for r in records])
    rows = np.arange(len(records))
    steps = np.array([r.step for r in records])
    inclusive = mixture.partial_log_weights(env, batch, inclusive=True)
    return inclusive[rows, steps], _exclusive(inclusive)[rows, steps]


# ---- Targets and Q loss ----


def gauss_hermite_expectation(fn, mean: np.ndarray, std: np.ndarray, nodes: int = 16) -> np.ndarray:
    """E[fn(a)] for a ~ N(mean, diag(std^2)) per row, by tensor-product Gauss-Hermite.

    Args:
        fn: maps (N * P, d) actions to (N * P,) values, rows grouped per state
        mean: (N, d) means
        std: (N, d) standard deviations
        nodes: points per dimension
    """
    x, w = np.polynomial.hermite.hermgauss(nodes)
    n, d = mean.shape
    grid = np.array(list(itertools.product(x, repeat=d)))                       # (P, d)
    weights = np.prod(np.array(list(itertools.product(w, repeat=d))), axis=1)  # (P,)
    actions = mean[:, None, :] + math.sqrt(2.0) * std[:, None, :] * grid[None, :, :]
    values = np.asarray(fn(actions.reshape(-1, d))).reshape(n, len(grid))
    return values @ weights / math.pi ** (d / 2.0)


def vb_target(
    env: AdversarialMdp,
    records: list[TransitionRecord],
    frozen_q,
    gamma_k: float,
    nodes: int = 16,
) -> np.ndarray:
    """Bootstrapped targets: 1{R > gamma_k} at terminal steps, E_pi[Q_frozen(s', a')] otherwise."""
    _, _, next_states, terminal = _stack_steps(records)
    targets = np.zeros(len(records))
    if np.any(terminal):
        targets[terminal] = (env.terminal_return(next_states[terminal]) > gamma_k).astype(np.float64)
    live = ~terminal
    if not np.any(live):
        return targets
    s2 = next_states[live]
    if env.action_space.kind is ActionKind.DISCRETE:
        targets[live] = np.sum(env.nominal_probs(s2) * frozen_q.values(env, s2), axis=1)
    else:
        mean, std = env.nominal_mean_std(s2)
        per_state = nodes ** env.action_space.size
        tiled = np.repeat(s2, per_state, axis=0)
        targets[live] = gauss_hermite_expectation(
            lambda a: frozen_q.action_values(env, tiled, a), mean, std, nodes
        )
    return targets


def q_loss(q_net: QNetwork, env, records, targets, log_weights, params=None):
    """(1/B) sum_i w_i (Q(s_i, a_i) - y_i)^2 and its gradient."""
    states, actions, _, _ = _stack_steps(records)
    inputs = q_net.inputs(env, states, actions)
    return q_net.regression_loss(inputs, actions, targets, np.exp(log_weights), len(records), params)


def vb_q_update(q_net: QNetwork, env, records, targets, log_weights) -> bool:
    states, actions, _, _ = _stack_steps(records)
    inputs = q_net.inputs(env, states, actions)
    return q_net.update(inputs, actions, targets, np.exp(log_weights), len(records)) is not None


# ---- Proposals derived from Q ----


def value_guided_probs(
    nominal: np.ndarray,
    q_values: np.ndarray,
    floor: float = 1e-3,
    value_floor: float = 1e-12,
) -> np.ndarray:
    """Q(s,a) pi(a|s) / V(s) with Q clipped at zero, floored and renormalised.

    Rows whose V(s) does not exceed `value_floor` fall back to the nominal
    probabilities.
    """
    nominal = np.asarray(nominal, dtype=np.float64)
    q = np.maximum(np.asarray(q_values, dtype=np.float64), 0.0)
    value = np.sum(nominal * q, axis=1)
    probs = nominal.copy()
    ok = value > value_floor
    probs[ok] = q[ok] * nominal[ok] / value[ok, None]
    probs = np.maximum(probs, floor / probs.shape[1])
    return probs / probs.sum(axis=1, keepdims=True)


class ValueGuidedPolicy(DiscretePolicy):
    """Discrete proposal read directly off a Q function."""

    def __init__(self, q_source, floor: float = 1e-3, value_floor: float = 1e-12):
        self.q_source = q_source
        self.floor = floor
        self.value_floor = value_floor

    def probs(self, env, states):
        states = np.atleast_2d(states)
        return value_guided_probs(
            env.nominal_probs(states), self.q_source.values(env, states), self.floor, self.value_floor
        )


@dataclass(frozen=True)
class PolicyFitBatch:
    """Fixed reparameterised actions and their self-normalised coefficients."""

    features: np.ndarray
    actions: np.ndarray
    coefs: np.ndarray
    normalizer: int


def vb_policy_batch(
    policy: NeuralGaussianPolicy,
    q_net: QNetwork,
    env: AdversarialMdp,
    records: list[TransitionRecord],
    exclusive_log_weights: np.ndarray,
    noise: np.ndarray,
    nodes: int = 16,
    value_floor: float = 1e-12,
) -> PolicyFitBatch | None:
    """Sample K actions per state by reparameterisation and score them.

    Each action's coefficient is w(s_i) times Q pi / q, normalised over the
    K actions of its state. States with V(s) at or below `value_floor`, or
    whose K actions all have Q = 0, are dropped.

    Args:
        noise: (B, K, d) standard normal draws
    """
    states, _, _, _ = _stack_steps(records)
    b, k, d = noise.shape
    mean, std = policy.mean_std(env, states)
    actions = (mean[:, None, :] + std[:, None, :] * noise).reshape(b * k, d)
    tiled = np.repeat(states, k, axis=0)

    nominal_mean, nominal_std = env.nominal_mean_std(states)
    value = gauss_hermite_expectation(
        lambda a: np.maximum(q_net.action_values(env, np.repeat(states, nodes**d, axis=0), a), 0.0),
        nominal_mean, nominal_std, nodes,
    )
    q = np.maximum(q_net.action_values(env, tiled, actions), 0.0).reshape(b, k)
    with np.errstate(divide="ignore"):
        log_ratio = (
            np.log(q)
            + env.nominal_logprob(tiled, actions).reshape(b, k)
            - policy.log_prob(env, tiled, actions).reshape(b, k)
        )
    keep = (value > value_floor) & np.any(q > 0.0, axis=1)
    if not np.any(keep):
        return None
    normalized = np.zeros((b, k))
    normalized[keep] = np.exp(log_ratio[keep] - logsumexp(log_ratio[keep], axis=1, keepdims=True))
    coefs = np.exp(exclusive_log_weights)[:, None] * normalized
    rows = np.repeat(keep, k)
    return PolicyFitBatch(
        features=env.features(tiled[rows]),
        actions=actions[rows],
        coefs=coefs.reshape(-1)[rows],
        normalizer=b,
    )


def vb_policy_loss(policy: NeuralGaussianPolicy, fit: PolicyFitBatch, params=None):
    """-(1/B) sum_i sum_k c_ik log q(a_ik | s_i) with fixed actions and coefficients."""
    return policy.score_loss(fit.features, fit.actions, fit.coefs, fit.normalizer, params)


def vb_policy_update(policy, q_net, env, records, exclusive_log_weights, rng, config: EstimatorConfig):
    """Move the proposal toward Q pi / V.

    Discrete proposals are Q-guided and need no fitting; the policy is
    returned as is. Continuous proposals take one Adam step.
    """
    if isinstance(policy, ValueGuidedPolicy):
        return policy
    noise = rng.standard_normal((len(records), config.reparam_samples, env.action_space.size))
    fit = vb_policy_batch(
        policy, q_net, env, records, exclusive_log_weights, noise, config.quadrature_nodes, config.value_floor
    )
    if fit is None:
        logger.debug("vb policy update: no state with positive value in batch")
        return policy
    policy.update(fit.features, fit.actions, fit.coefs, fit.normalizer)
    return policy


# ---- Algorithm ----


class ValueBasedLearner:
    """Replay, bootstrapped Q regression and proposal fitting per member."""

    def __init__(
        self,
        mixture: MixtureProposal,
        q_nets: list[QNetwork],
        config: EstimatorConfig,
    ):
        self.mixture = mixture
        self.q_nets = q_nets
        self.targets = [q.copy() for q in q_nets]
        self.config = config
        n_buffers = 1 if config.shared_replay else len(q_nets)
        self.buffers = [ReplayBuffer(config.replay_capacity) for _ in range(n_buffers)]
        self.replay_rngs = [auxiliary_stream(config.seed, REPLAY_STREAM, m) for m in range(len(q_nets))]
        self.reparam_rngs = [auxiliary_stream(config.seed, REPARAM_STREAM, m) for m in range(len(q_nets))]
        self.value_updates = [0] * len(q_nets)
        self.skipped_updates = 0

    def buffer_for(self, member: int) -> ReplayBuffer:
        return self.buffers[0] if self.config.shared_replay else self.buffers[member]

    def store(self, env, batch: TrajectoryBatch, trajectories: list[Trajectory]) -> None:
        assignment = mis_reassign(env, batch, self.mixture)
        inclusive = self.mixture.partial_log_weights(env, batch, inclusive=True)
        records = transitions_from_batch(trajectories, assignment, inclusive, _exclusive(inclusive))
        if self.config.shared_replay:
            self.buffers[0].extend(records)
        else:
            for record in records:
                self.buffers[record.member].push(record)

    def update(self, env, batch, log_weights, gamma_k) -> None:
        self.store(env, batch, _unstack(batch))
        for m, q_net in enumerate(self.q_nets):
            buffer = self.buffer_for(m)
            if len(buffer) == 0:
                continue
            records = buffer.sample(self.replay_rngs[m], self.config.batch_size)
            inclusive, exclusive = replay_log_weights(env, records, self.mixture, self.config.replay_weights)
            targets = vb_target(env, records, self.targets[m], gamma_k, self.config.quadrature_nodes)
            if not vb_q_update(q_net, env, records, targets, inclusive):
                self.skipped_updates += 1
            self.value_updates[m] += 1
            if self.value_updates[m] % self.config.target_interval == 0:
                self.targets[m] = q_net.copy()
            vb_policy_update(
                self.mixture.members[m], q_net, env, records, exclusive, self.reparam_rngs[m], self.config
            )


def _unstack(batch: TrajectoryBatch) -> list[Trajectory]:
    return [
        Trajectory(
            states=batch.states[i],
            actions=batch.actions[i],
            nominal_logps=batch.nominal_logps[i],
            proposal_logps=batch.proposal_logps[i],
            ret=batch.returns[i],
            proposal_index=int(batch.proposal_index[i]),
        )
        for i in range(len(batch))
    ]


def vb_ais(config: EstimatorConfig, env: AdversarialMdp) -> EstimateResult:
    """Value-based adaptive importance sampling with M members."""
    if config.freeze_nominal:
        return run_adaptive(env, config, Method.VB, nominal_mixture(env, config), learner=None)

    q_nets, members = [], []
    for m in range(config.n_members):
        rng = auxiliary_stream(config.seed, INIT_STREAM, m)
        q_net = QNetwork.create(
            env, rng, hidden=config.hidden, lr=config.learning_rate,
            max_grad_norm=config.grad_clip, init_value=config.pretrain_value_target,
        )
        if env.action_space.kind is ActionKind.DISCRETE:
            policy = ValueGuidedPolicy(q_net, config.prob_floor, config.value_floor)
            trainable = None
        else:
            policy = create_policy(
                env, rng, hidden=config.hidden, lr=config.learning_rate, max_grad_norm=config.grad_clip
            )
            trainable = policy
        if config.pretrain:
            pretrain(trainable, q_net, env, config, auxiliary_stream(config.seed, PRETRAIN_STREAM, m))
        q_nets.append(q_net)
        members.append(policy)

    mixture = MixtureProposal(members, include_nominal=config.defensive)
    learner = ValueBasedLearner(mixture, q_nets, config)
    result = run_adaptive(env, config, Method.VB, mixture, learner)
    logger.info("vb-ais: mu_hat=%.6g after %d samples", result.mu_hat, result.n_samples)
    return result
