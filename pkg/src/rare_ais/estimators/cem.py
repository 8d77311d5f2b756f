"""Cross-entropy method with a state-independent proposal.

The same action distribution is used at every step, and each iteration
refits it by weighted maximum likelihood on the elite trajectories.
"""

import logging
from dataclasses import dataclass

import numpy as np

from rare_ais.core.mdp import (
    ActionKind,
    AdversarialMdp,
    DiscretePolicy,
    GaussianPolicy,
    TrajectoryBatch,
    auxiliary_stream,
)
from rare_ais.estimators.config import EstimatorConfig, Method
from rare_ais.estimators.dataset import EstimateResult
from rare_ais.estimators.loop import INIT_STREAM, nominal_mixture, run_adaptive
from rare_ais.estimators.mixture import MixtureProposal, mis_reassign
from rare_ais.neural.heads import LOG_STD_MIN


logger = logging.getLogger(__name__)

# Relative size of the seeded perturbation that separates CEM members.
MEMBER_PERTURBATION = 0.05


@dataclass(eq=False)
class StaticCategoricalPolicy(DiscretePolicy):
    """One categorical distribution over support indices, shared by all states."""

    weights: np.ndarray

    def probs(self, env, states):
        return np.broadcast_to(self.weights, (len(np.atleast_2d(states)), len(self.weights)))


@dataclass(eq=False)
class StaticGaussianPolicy(GaussianPolicy):
    """One diagonal Gaussian, shared by all states."""

    mean: np.ndarray
    std: np.ndarray

    def mean_std(self, env, states):
        n = len(np.atleast_2d(states))
        return np.broadcast_to(self.mean, (n, len(self.mean))), np.broadcast_to(self.std, (n, len(self.std)))


StaticPolicy = StaticCategoricalPolicy | StaticGaussianPolicy


def initial_cem_policy(
    env: AdversarialMdp,
    rng: np.random.Generator | None = None,
    perturbation: float = 0.0,
) -> StaticPolicy:
    """Nominal parameters at the initial state, optionally perturbed by `rng`."""
    start = env.initial_states(1)
    if env.action_space.kind is ActionKind.DISCRETE:
        probs = np.array(env.nominal_probs(start)[0], dtype=np.float64)
        if rng is not None and perturbation > 0.0:
            probs = probs * np.exp(perturbation * rng.standard_normal(len(probs)))
            probs /= probs.sum()
        return StaticCategoricalPolicy(probs)
    mean, std = env.nominal_mean_std(start)
    mean = np.array(mean[0], dtype=np.float64)
    std = np.array(std[0], dtype=np.float64)
    if rng is not None and perturbation > 0.0:
        mean = mean + perturbation * std * rng.standard_normal(len(mean))
    return StaticGaussianPolicy(mean, std)


def floor_probabilities(probs: np.ndarray, floor: float) -> np.ndarray:
    """Raise every probability to at least floor / K, then renormalise."""
    floored = np.maximum(probs, floor / len(probs))
    return floored / floored.sum()


def cem_update(
    policy: StaticPolicy,
    batch: TrajectoryBatch,
    log_weights: np.ndarray,
    gamma_k: float,
    floor: float = 1e-3,
) -> tuple[StaticPolicy, bool]:
    """Weighted maximum-likelihood refit on trajectories with return above gamma_k.

    Returns:
        The refitted policy and True, or the unchanged policy and False when
        the elite set carries no weight
    """
    elite = batch.returns > gamma_k
    weights = np.exp(np.asarray(log_weights)[elite])
    if not np.any(elite) or not weights.sum() > 0.0:
        return policy, False

    horizon = batch.horizon
    step_weights = np.repeat(weights, horizon)
    if isinstance(policy, StaticCategoricalPolicy):
        k = len(policy.weights)
        counts = np.bincount(
            batch.actions[elite].reshape(-1).astype(np.int64), weights=step_weights, minlength=k
        )
        return StaticCategoricalPolicy(floor_probabilities(counts / counts.sum(), floor)), True

    actions = batch.actions[elite].reshape(len(step_weights), -1)
    total = step_weights.sum()
    mean = (step_weights[:, None] * actions).sum(axis=0) / total
    var = (step_weights[:, None] * (actions - mean) ** 2).sum(axis=0) / total
    std = np.maximum(np.sqrt(var), np.exp(LOG_STD_MIN))
    return StaticGaussianPolicy(mean, std), True


class CemLearner:
    """Refits each mixture member on the trajectories assigned to it."""

    def __init__(self, mixture: MixtureProposal, floor: float):
        self.mixture = mixture
        self.floor = floor
        self.skipped_updates = 0

    def update(self, env, batch, log_weights, gamma_k) -> None:
        assignment = mis_reassign(env, batch, self.mixture)
        for m, member in enumerate(self.mixture.members):
            mask = assignment == m
            if not np.any(mask):
                continue
            refit, ok = cem_update(member, batch.select(mask), log_weights[mask], gamma_k, self.floor)
            if not ok:
                self.skipped_updates += 1
                logger.warning("cem member %d: zero elite mass at gamma_k=%.6g, keeping parameters", m, gamma_k)
                continue
            self.mixture.members[m] = refit


def run_cem(config: EstimatorConfig, env: AdversarialMdp) -> EstimateResult:
    """CEM with M state-independent members and hard-EM assignment."""
    if config.freeze_nominal:
        return run_adaptive(env, config, Method.CEM, nominal_mixture(env, config), learner=None)
    perturbation = MEMBER_PERTURBATION if config.n_members > 1 else 0.0
    members = [
        initial_cem_policy(env, auxiliary_stream(config.seed, INIT_STREAM, m), perturbation)
        for m in range(config.n_members)
    ]
    mixture = MixtureProposal(members, include_nominal=config.defensive)
    return run_adaptive(env, config, Method.CEM, mixture, CemLearner(mixture, config.prob_floor))
