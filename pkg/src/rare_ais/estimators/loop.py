"""The adaptive sampling loop shared by CEM, PG-AIS and VB-AIS, and plain MC."""

import logging
from typing import Protocol

import numpy as np

from rare_ais.core.mdp import AdversarialMdp, NominalPolicy, TrajectoryBatch
from rare_ais.estimators.config import EstimatorConfig, Method
from rare_ais.estimators.dataset import (
    EstimateResult,
    IterationDiagnostics,
    SampleSet,
    adaptive_threshold,
    convergence_curve,
    is_estimate,
    standard_error,
)
from rare_ais.estimators.mixture import MixtureProposal
from rare_ais.errors import NumericalFailureError


logger = logging.getLogger(__name__)

# Tags for auxiliary random streams
INIT_STREAM = 1
PRETRAIN_STREAM = 2
REPLAY_STREAM = 3
REPARAM_STREAM = 4


class Learner(Protocol):
    """Adapts the mixture members after each batch."""

    skipped_updates: int

    def update(
        self,
        env: AdversarialMdp,
        batch: TrajectoryBatch,
        log_weights: np.ndarray,
        gamma_k: float,
    ) -> None: ...


def resolve_gamma(config: EstimatorConfig, env: AdversarialMdp) -> float:
    return env.failure_threshold if config.gamma is None else float(config.gamma)


def nominal_mixture(env: AdversarialMdp, config: EstimatorConfig) -> MixtureProposal:
    """Every member replaced by the nominal policy; used when learning is frozen."""
    members = [NominalPolicy.for_env(env) for _ in range(config.n_members)]
    return MixtureProposal(members, include_nominal=config.defensive)


def member_mean_actions(env: AdversarialMdp, batch: TrajectoryBatch, mixture: MixtureProposal) -> list[float]:
    """Mean action value each trainable member sampled in `batch` (NaN if it sampled none)."""
    means = []
    members = mixture.trainable_index(batch.proposal_index)
    for m in range(len(mixture.members)):
        mask = members == m
        if not np.any(mask):
            means.append(float("nan"))
            continue
        values = env.action_values(env.flatten_actions(batch.actions[mask]))
        means.append(float(np.mean(values)))
    return means


def run_adaptive(
    env: AdversarialMdp,
    config: EstimatorConfig,
    method: Method,
    mixture: MixtureProposal,
    learner: Learner | None,
) -> EstimateResult:
    """Sample, weight, record and adapt until the budget is spent.

    The update threshold gamma_k is the capped batch quantile, held
    monotone across iterations. The final estimate uses gamma only.
    """
    gamma = resolve_gamma(config, env)
    per_iter = config.samples_per_iter(method)
    samples = SampleSet()
    diagnostics: list[IterationDiagnostics] = []
    gamma_k = -np.inf
    used = 0
    batch = None

    while used < config.n_total:
        n = min(per_iter, config.n_total - used)
        batch = TrajectoryBatch.stack(mixture.sample(env, n, config.seed, start_index=used))
        log_weights = mixture.log_weights(env, batch)
        samples.extend_batch(batch, log_weights)
        gamma_k = min(gamma, max(gamma_k, adaptive_threshold(batch.returns, config.rho, gamma)))
        elite_count = int(np.count_nonzero(batch.returns > gamma_k))
        if learner is not None:
            learner.update(env, batch, log_weights, gamma_k)
        used += n

        running = is_estimate(samples, gamma)
        if not np.isfinite(running):
            raise NumericalFailureError(len(diagnostics) + 1, f"running estimate became {running}")
        diagnostics.append(IterationDiagnostics(len(diagnostics) + 1, used, gamma_k, elite_count, running))
        logger.debug(
            "%s iter %d: gamma_k=%.6g elites=%d mu_hat=%.6g",
            method.value, len(diagnostics), gamma_k, elite_count, running,
        )

    return EstimateResult(
        mu_hat=is_estimate(samples, gamma),
        std_err=standard_error(samples, gamma),
        n_samples=len(samples),
        iterations=diagnostics,
        curve=convergence_curve(samples, gamma, config.curve_interval),
        member_mean_actions=member_mean_actions(env, batch, mixture),
        skipped_updates=learner.skipped_updates if learner is not None else 0,
    )


def run_mc(config: EstimatorConfig, env: AdversarialMdp) -> EstimateResult:
    """Plain Monte Carlo under the nominal policy, one stream per trajectory."""
    mixture = MixtureProposal([NominalPolicy.for_env(env)])
    return run_adaptive(env, config, Method.MC, mixture, learner=None)
