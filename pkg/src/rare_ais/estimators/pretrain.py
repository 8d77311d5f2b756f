"""Pretraining proposals toward the nominal policy and value functions toward a constant."""

import logging
import math

import numpy as np

from rare_ais.core.mdp import ActionKind, AdversarialMdp
from rare_ais.estimators.config import EstimatorConfig
from rare_ais.neural.networks import NeuralCategoricalPolicy, NeuralGaussianPolicy, QNetwork, ValueNetwork


logger = logging.getLogger(__name__)


def collect_nominal_states(env: AdversarialMdp, n_points: int, rng: np.random.Generator) -> np.ndarray:
    """`n_points` non-terminal states visited by nominal rollouts."""
    n_episodes = max(math.ceil(n_points / env.horizon), 1)
    states = env.initial_states(n_episodes)
    visited = []
    for _ in range(env.horizon):
        visited.append(states)
        states, done = env.step(states, env.nominal_sample(states, rng))
        if np.all(done):
            break
    return np.concatenate(visited)[:n_points]


def _minibatches(n: int, batch_size: int, rng: np.random.Generator):
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start : start + batch_size]


def pretrain(
    proposal: NeuralCategoricalPolicy | NeuralGaussianPolicy | None,
    value_fn: ValueNetwork | QNetwork | None,
    env: AdversarialMdp,
    config: EstimatorConfig,
    rng: np.random.Generator,
) -> None:
    """Fit the proposal to nominal actions and the value function to a constant, in place.

    The proposal maximises the log density of nominal actions drawn at
    nominal states. The value function regresses every output onto
    `config.pretrain_value_target`.
    """
    states = collect_nominal_states(env, config.pretrain_points, rng)
    features = env.features(states)
    actions = env.nominal_sample(states, rng)
    n = len(states)
    target = config.pretrain_value_target

    for _ in range(config.pretrain_epochs):
        for idx in _minibatches(n, config.batch_size, rng):
            ones = np.ones(len(idx))
            if proposal is not None:
                proposal.update(features[idx], actions[idx], ones, len(idx))
            if isinstance(value_fn, ValueNetwork):
                value_fn.update(features[idx], np.full(len(idx), target), ones, len(idx))
            elif isinstance(value_fn, QNetwork):
                _pretrain_q_step(value_fn, env, states[idx], actions[idx], target)

    logger.info(
        "pretrained %s on %d nominal states for %d epochs",
        ", ".join(type(x).__name__ for x in (proposal, value_fn) if x is not None) or "nothing",
        n,
        config.pretrain_epochs,
    )


def _pretrain_q_step(q_net: QNetwork, env: AdversarialMdp, states, actions, target: float) -> None:
    if q_net.kind is ActionKind.DISCRETE:
        k = env.action_space.size
        tiled = np.repeat(states, k, axis=0)
        all_actions = np.tile(np.arange(k), len(states))
        inputs = q_net.inputs(env, tiled)
        q_net.update(inputs, all_actions, np.full(len(tiled), target), np.ones(len(tiled)), len(tiled))
    else:
        inputs = q_net.inputs(env, states, actions)
        q_net.update(inputs, actions, np.full(len(states), target), np.ones(len(states)), len(states))
