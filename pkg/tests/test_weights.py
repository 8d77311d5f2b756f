"""Tests for trajectory importance weights."""

import math

import numpy as np
import pytest

from rare_ais.core.mdp import NominalPolicy, TrajectoryBatch, rollout, trajectory_stream
from rare_ais.core.weights import (
    coefficient_of_variation,
    cumulative_log_weights,
    dm_log_weight_from_densities,
    dm_log_weights,
    dm_partial_log_weights,
    dm_weight,
    importance_weight,
    partial_weight,
    policy_log_densities,
    required_samples,
)
from rare_ais.envs import ChainMdp
from rare_ais.errors import ArgumentError, InvalidSupportError
from rare_ais.estimators.cem import StaticCategoricalPolicy
from rare_ais.estimators.mixture import MixtureProposal


NOMINAL = np.array([0.8, 0.15, 0.05])
TILTED = np.array([0.4, 0.3, 0.3])
OTHER = np.array([0.2, 0.2, 0.6])


@pytest.fixture
def env():
    return ChainMdp(threshold=5)


@pytest.fixture
def trajectories(env):
    proposal = StaticCategoricalPolicy(TILTED)
    return [rollout(env, proposal, trajectory_stream(11, i)) for i in range(8)]


class TestStandardWeights:
    """Tests for full and partial single-proposal weights."""

    def test_weight_is_product_of_ratios(self, trajectories):
        """w(tau) should equal the product of pi(a)/q(a) over the actions."""
        for traj in trajectories:
            expected = math.prod(NOMINAL[a] / TILTED[a] for a in traj.actions.astype(int))
            assert importance_weight(traj) == pytest.approx(expected, rel=1e-12)

    def test_partial_weight_bounds(self, trajectories):
        """Index 1 is the empty product and T+1 the full weight."""
        traj = trajectories[0]
        assert partial_weight(traj, 1) == 1.0
        assert partial_weight(traj, len(traj) + 1) == pytest.approx(importance_weight(traj), rel=1e-12)

    def test_partial_weight_prefix(self, trajectories):
        """Partial weight k covers the first k-1 actions."""
        traj = trajectories[1]
        a = traj.actions.astype(int)
        expected = (NOMINAL[a[0]] / TILTED[a[0]]) * (NOMINAL[a[1]] / TILTED[a[1]])
        assert partial_weight(traj, 3) == pytest.approx(expected, rel=1e-12)

    @pytest.mark.parametrize("k", [0, 7])
    def test_partial_weight_out_of_range(self, trajectories, k):
        """Indices outside 1..T+1 should raise ArgumentError."""
        with pytest.raises(ArgumentError):
            partial_weight(trajectories[0], k)

    def test_nominal_rollout_weight_is_one(self, env):
        """Sampling from pi itself gives weight exactly 1."""
        traj = rollout(env, NominalPolicy.for_env(env), trajectory_stream(0, 3))
        assert importance_weight(traj) == 1.0

    def test_cumulative_inclusive_exclusive(self, trajectories):
        """The exclusive running weight is the inclusive one shifted by a step."""
        batch = TrajectoryBatch.stack(trajectories)
        inclusive = cumulative_log_weights(batch.nominal_logps, batch.proposal_logps, inclusive=True)
        exclusive = cumulative_log_weights(batch.nominal_logps, batch.proposal_logps, inclusive=False)

        assert np.all(exclusive[:, 0] == 0.0)
        assert np.allclose(exclusive[:, 1:], inclusive[:, :-1])
        assert np.allclose(inclusive[:, -1], [t.log_weight for t in trajectories])


class TestMixtureWeights:
    """Tests for deterministic-mixture weights."""

    def test_single_member_matches_standard(self, env, trajectories):
        """With M=1 the DM weight equals the standard weight."""
        mixture = MixtureProposal([StaticCategoricalPolicy(TILTED)])
        for traj in trajectories:
            assert dm_weight(traj, mixture, env) == pytest.approx(importance_weight(traj), rel=1e-12)

    def test_two_member_formula(self, env, trajectories):
        """DM weight is p / (0.5 q1 + 0.5 q2)."""
        mixture = MixtureProposal([StaticCategoricalPolicy(TILTED), StaticCategoricalPolicy(OTHER)])
        log_w = dm_log_weights(env, trajectories, mixture)
        for traj, lw in zip(trajectories, log_w):
            a = traj.actions.astype(int)
            p = np.prod(NOMINAL[a])
            q = 0.5 * np.prod(TILTED[a]) + 0.5 * np.prod(OTHER[a])
            assert math.exp(lw) == pytest.approx(p / q, rel=1e-10)

    def test_defensive_includes_nominal(self, env, trajectories):
        """A defensive mixture divides by the average of pi and q."""
        mixture = MixtureProposal([StaticCategoricalPolicy(TILTED)], include_nominal=True)
        log_w = dm_log_weights(env, trajectories, mixture)
        for traj, lw in zip(trajectories, log_w):
            a = traj.actions.astype(int)
            p = np.prod(NOMINAL[a])
            q = 0.5 * p + 0.5 * np.prod(TILTED[a])
            assert math.exp(lw) == pytest.approx(p / q, rel=1e-10)
            assert math.exp(lw) < 2.0

    def test_partial_single_member_matches_cumulative(self, env, trajectories):
        """DM partial weights over one member reduce to the running standard weight."""
        batch = TrajectoryBatch.stack(trajectories)
        member_logps = policy_log_densities(env, [StaticCategoricalPolicy(TILTED)], batch)
        dm = dm_partial_log_weights(batch.nominal_logps, member_logps)
        standard = cumulative_log_weights(batch.nominal_logps, batch.proposal_logps)
        assert np.allclose(dm, standard, atol=1e-12)

    def test_zero_support_raises(self):
        """A trajectory no member can produce has no DM weight."""
        with pytest.raises(InvalidSupportError):
            dm_log_weight_from_densities(np.zeros(1), np.full((1, 2), -np.inf))


class TestSampleSizes:
    """Tests for sample-size and coefficient-of-variation helpers."""

    def test_required_samples_formula(self):
        """N = (1 - mu) / (mu eps^2), rounded up."""
        mu, eps = 2.5e-5, 0.1
        assert required_samples(mu, eps) == math.ceil((1.0 - mu) / (mu * eps * eps))

    def test_required_samples_grows_with_precision(self):
        """Halving the tolerance should roughly quadruple the sample count."""
        assert required_samples(1e-3, 0.05) > 3 * required_samples(1e-3, 0.1)

    @pytest.mark.parametrize("mu,eps", [(0.0, 0.1), (1.0, 0.1), (0.5, 0.0)])
    def test_required_samples_domain(self, mu, eps):
        """mu outside (0, 1) or non-positive eps should raise ArgumentError."""
        with pytest.raises(ArgumentError):
            required_samples(mu, eps)

    def test_coefficient_of_variation(self):
        """sqrt((1 - mu) / (N mu))."""
        assert coefficient_of_variation(0.01, 100) == pytest.approx(math.sqrt(0.99))
        assert coefficient_of_variation(0.0, 100) == math.inf
