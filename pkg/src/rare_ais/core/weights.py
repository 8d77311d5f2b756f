"""Importance weights for trajectories.

Transition densities cancel in every ratio because transitions are
deterministic given the action, so a weight only needs the per-step
action log densities. Everything is computed in log space; a weight is
exponentiated only when it is handed to a caller.
"""

import math
from typing import TYPE_CHECKING, Sequence

import numpy as np
from scipy.special import logsumexp

from rare_ais.core.mdp import AdversarialMdp, ProposalPolicy, Trajectory, TrajectoryBatch
from rare_ais.errors import ArgumentError, InvalidSupportError, WeightOverflowError

if TYPE_CHECKING:
    from rare_ais.estimators.mixture import MixtureProposal


def _exp_checked(log_weight: float) -> float:
    with np.errstate(over="ignore"):
        weight = float(np.exp(log_weight))
    if not np.isfinite(weight):
        raise WeightOverflowError(log_weight)
    return weight


def log_importance_weight(traj: Trajectory) -> float:
    """sum log pi - sum log q over the trajectory."""
    return traj.log_weight


def importance_weight(traj: Trajectory) -> float:
    """p(tau) / q(tau) for the proposal that generated `traj`.

    Raises:
        WeightOverflowError: the weight overflows after exponentiation.
    """
    return _exp_checked(traj.log_weight)


def partial_log_weight(traj: Trajectory, k: int) -> float:
    """Log of the product of per-step ratios for steps 1..k-1."""
    if not 1 <= k <= len(traj) + 1:
        raise ArgumentError(f"partial weight index {k} outside 1..{len(traj) + 1}")
    diff = traj.nominal_logps[: k - 1] - traj.proposal_logps[: k - 1]
    return float(np.sum(diff))


def partial_weight(traj: Trajectory, k: int) -> float:
    """Partial importance weight up to (not including) the action taken at s_k.

    Steps are 1-based: partial_weight(traj, 1) is the empty product and
    partial_weight(traj, T + 1) is the full importance weight.
    """
    return _exp_checked(partial_log_weight(traj, k))


def cumulative_log_weights(
    nominal_logps: np.ndarray,
    proposal_logps: np.ndarray,
    inclusive: bool = True,
) -> np.ndarray:
    """(N, T) running log weights.

    With `inclusive` the entry at step t covers actions 0..t; otherwise it
    covers 0..t-1 (the weight of reaching the state the action is taken in).
    """
    running = np.cumsum(nominal_logps - proposal_logps, axis=1)
    if inclusive:
        return running
    return np.concatenate([np.zeros((running.shape[0], 1)), running[:, :-1]], axis=1)


def dm_partial_log_weights(
    nominal_logps: np.ndarray,
    member_logps: np.ndarray,
    inclusive: bool = True,
) -> np.ndarray:
    """(N, T) running log weights against the equal-weight mixture of M members.

    Args:
        nominal_logps: (N, T) per-step nominal log densities
        member_logps: (N, T, M) per-step log densities under each member
        inclusive: include the action taken at each step
    """
    running_q = np.cumsum(member_logps, axis=1)
    log_mix = logsumexp(running_q, axis=2) - math.log(member_logps.shape[2])
    running = np.cumsum(nominal_logps, axis=1) - log_mix
    if inclusive:
        return running
    return np.concatenate([np.zeros((running.shape[0], 1)), running[:, :-1]], axis=1)


def policy_log_densities(
    env: AdversarialMdp,
    policies: Sequence[ProposalPolicy],
    batch: TrajectoryBatch,
) -> np.ndarray:
    """(N, T, M) per-step log densities of each trajectory's actions under each policy."""
    states = batch.step_states()
    actions = env.flatten_actions(batch.actions)
    n, horizon = batch.nominal_logps.shape
    columns = [p.log_prob(env, states, actions).reshape(n, horizon) for p in policies]
    return np.stack(columns, axis=-1)


def dm_log_weight_from_densities(log_p: np.ndarray, log_q: np.ndarray) -> np.ndarray:
    """Deterministic-mixture log weight log p - log((1/M) sum_m q_m).

    Args:
        log_p: (N,) trajectory log densities under the nominal policy
        log_q: (N, M) trajectory log densities under each mixture member

    Raises:
        InvalidSupportError: some trajectory has zero density under every member.
    """
    log_q = np.atleast_2d(log_q)
    log_mix = logsumexp(log_q, axis=1) - math.log(log_q.shape[1])
    if np.any(np.isneginf(log_mix)):
        raise InvalidSupportError("every mixture member assigns zero density to a trajectory")
    return np.asarray(log_p) - log_mix


def dm_log_weights(
    env: AdversarialMdp,
    trajectories: Sequence[Trajectory] | TrajectoryBatch,
    mixture: "MixtureProposal",
) -> np.ndarray:
    """(N,) DM log weights, re-evaluating every trajectory under every sampling member."""
    batch = trajectories if isinstance(trajectories, TrajectoryBatch) else TrajectoryBatch.stack(trajectories)
    log_q = policy_log_densities(env, mixture.sampling_members, batch).sum(axis=1)
    log_p = batch.nominal_logps.sum(axis=1)
    return dm_log_weight_from_densities(log_p, log_q)


def dm_weight(traj: Trajectory, mixture: "MixtureProposal", env: AdversarialMdp) -> float:
    """p(tau) / ((1/M) sum_m q_m(tau)) for a single trajectory."""
    return _exp_checked(float(dm_log_weights(env, [traj], mixture)[0]))


def required_samples(mu: float, eps_rel: float) -> int:
    """Monte Carlo sample count for relative accuracy `eps_rel` at probability `mu`."""
    if not 0.0 < mu < 1.0:
        raise ArgumentError(f"mu must lie in (0, 1), got {mu}")
    if not eps_rel > 0.0:
        raise ArgumentError(f"eps_rel must be positive, got {eps_rel}")
    return int(math.ceil((1.0 - mu) / (mu * eps_rel * eps_rel)))


def coefficient_of_variation(mu: float, n_samples: int) -> float:
    """Relative standard deviation of the N-sample Monte Carlo estimator of mu."""
    if not 0.0 < mu < 1.0:
        return math.inf
    if n_samples < 1:
        raise ArgumentError("n_samples must be at least 1")
    return math.sqrt((1.0 - mu) / (n_samples * mu))
