"""Policy-gradient adaptive importance sampling.

Each member minimises -(1/N) sum_i sum_t (1{R_i > gamma_k} w_i - b(s_ti)) log q(a_ti | s_ti)
on the trajectories assigned to it; the optional baseline b regresses
onto the weighted elite indicator.
"""

import logging

import numpy as np

from rare_ais.core.mdp import AdversarialMdp, TrajectoryBatch, auxiliary_stream
from rare_ais.estimators.config import EstimatorConfig, Method
from rare_ais.estimators.dataset import EstimateResult
from rare_ais.estimators.loop import INIT_STREAM, PRETRAIN_STREAM, nominal_mixture, run_adaptive
from rare_ais.estimators.mixture import MixtureProposal, mis_reassign
from rare_ais.estimators.pretrain import pretrain
from rare_ais.neural.networks import ValueNetwork, create_policy


logger = logging.getLogger(__name__)


def elite_targets(batch: TrajectoryBatch, log_weights: np.ndarray, gamma_k: float) -> np.ndarray:
    """(N,) weighted elite indicator 1{R_i > gamma_k} w_i."""
    return np.where(batch.returns > gamma_k, np.exp(log_weights), 0.0)


def _step_inputs(env: AdversarialMdp, batch: TrajectoryBatch):
    states = batch.step_states()
    return states, env.features(states), env.flatten_actions(batch.actions)


def _coefficients(env, states, batch, log_weights, gamma_k, baseline: ValueNetwork | None) -> np.ndarray:
    coefs = np.repeat(elite_targets(batch, log_weights, gamma_k), batch.horizon)
    if baseline is not None:
        coefs = coefs - baseline.value(env, states)
    return coefs


def pg_loss(policy, env, batch, log_weights, gamma_k, baseline=None, params=None):
    """Policy-gradient surrogate loss and its gradient at `params`."""
    states, features, actions = _step_inputs(env, batch)
    coefs = _coefficients(env, states, batch, log_weights, gamma_k, baseline)
    return policy.score_loss(features, actions, coefs, len(batch), params)


def pg_update(policy, env, batch, log_weights, gamma_k, baseline=None) -> bool:
    """One Adam step on the policy-gradient loss over the whole batch.

    Returns:
        False if the update was skipped for non-finite values
    """
    states, features, actions = _step_inputs(env, batch)
    coefs = _coefficients(env, states, batch, log_weights, gamma_k, baseline)
    return policy.update(features, actions, coefs, len(batch)) is not None


def baseline_loss(baseline: ValueNetwork, env, batch, log_weights, gamma_k, params=None):
    """(1/N) sum_i sum_t (b(s_ti) - 1{R_i > gamma_k} w_i)^2 and its gradient."""
    _, features, _ = _step_inputs(env, batch)
    targets = np.repeat(elite_targets(batch, log_weights, gamma_k), batch.horizon)
    return baseline.regression_loss(features, targets, np.ones(len(targets)), len(batch), params)


def baseline_update(baseline: ValueNetwork, env, batch, log_weights, gamma_k) -> bool:
    _, features, _ = _step_inputs(env, batch)
    targets = np.repeat(elite_targets(batch, log_weights, gamma_k), batch.horizon)
    return baseline.update(features, targets, np.ones(len(targets)), len(batch)) is not None


class PolicyGradientLearner:
    """Per-member policy and baseline updates on hard-EM assigned samples."""

    def __init__(self, mixture: MixtureProposal, baselines: list[ValueNetwork] | None = None):
        self.mixture = mixture
        self.baselines = baselines
        self.skipped_updates = 0

    def update(self, env, batch, log_weights, gamma_k) -> None:
        assignment = mis_reassign(env, batch, self.mixture)
        for m, member in enumerate(self.mixture.members):
            mask = assignment == m
            if not np.any(mask):
                continue
            sub, sub_w = batch.select(mask), log_weights[mask]
            baseline = self.baselines[m] if self.baselines else None
            if not pg_update(member, env, sub, sub_w, gamma_k, baseline):
                self.skipped_updates += 1
            if baseline is not None and not baseline_update(baseline, env, sub, sub_w, gamma_k):
                self.skipped_updates += 1


def pg_ais(config: EstimatorConfig, env: AdversarialMdp) -> EstimateResult:
    """Policy-gradient adaptive importance sampling with M neural members."""
    if config.freeze_nominal:
        return run_adaptive(env, config, Method.PG, nominal_mixture(env, config), learner=None)

    members, baselines = [], []
    for m in range(config.n_members):
        rng = auxiliary_stream(config.seed, INIT_STREAM, m)
        policy = create_policy(
            env, rng, hidden=config.hidden, lr=config.learning_rate,
            max_grad_norm=config.grad_clip, floor=config.prob_floor,
        )
        baseline = None
        if config.baseline:
            baseline = ValueNetwork.create(
                env, rng, hidden=config.hidden, lr=config.learning_rate,
                max_grad_norm=config.grad_clip, init_value=config.pretrain_value_target,
            )
            baselines.append(baseline)
        if config.pretrain:
            pretrain(policy, baseline, env, config, auxiliary_stream(config.seed, PRETRAIN_STREAM, m))
        members.append(policy)

    mixture = MixtureProposal(members, include_nominal=config.defensive)
    learner = PolicyGradientLearner(mixture, baselines or None)
    result = run_adaptive(env, config, Method.PG, mixture, learner)
    logger.info("pg-ais: mu_hat=%.6g after %d samples", result.mu_hat, result.n_samples)
    return result
