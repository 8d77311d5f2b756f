"""Tests for the adversarial MDP core: distributions, streams, rollouts and trajectories."""

import numpy as np
import pytest

from rare_ais.core.distributions import (
    LOG_SQRT_2PI,
    categorical_logprob,
    check_indices,
    gaussian_logprob,
    sample_categorical,
)
from rare_ais.core.mdp import (
    ActionKind,
    NominalPolicy,
    SampleRecord,
    Trajectory,
    TrajectoryBatch,
    rollout,
    rollout_batch,
    trajectory_stream,
)
from rare_ais.envs import ChainMdp, DisturbanceModel, PendulumMdp
from rare_ais.errors import ArgumentError, InvalidActionError, NumericalFailureError, WeightOverflowError


class SplitEndChain(ChainMdp):
    """Chain whose even rows report done after every step."""

    def step(self, states, actions):
        next_states, done = super().step(states, actions)
        return next_states, done | (np.arange(len(next_states)) % 2 == 0)


class ExplodingChain(ChainMdp):
    """Chain whose accumulator turns into NaN."""

    def step(self, states, actions):
        next_states, done = super().step(states, actions)
        next_states[:, 1] = np.nan
        return next_states, done


class TestDistributions:
    """Tests for the vectorised categorical and Gaussian helpers."""

    def test_inverse_cdf_sampling(self):
        """Uniforms should map to the interval they fall in."""
        probs = np.tile([0.2, 0.5, 0.3], (4, 1))
        idx = sample_categorical(probs, np.array([0.0, 0.19, 0.2, 0.99]))
        assert idx.tolist() == [0, 0, 1, 2]

    def test_zero_probability_action_never_drawn(self):
        """Zero-width intervals should be skipped."""
        probs = np.tile([0.5, 0.0, 0.5], (3, 1))
        idx = sample_categorical(probs, np.array([0.1, 0.5, 0.9]))
        assert 1 not in idx.tolist()

    def test_categorical_logprob(self):
        """Log probability should pick the action column."""
        probs = np.array([[0.2, 0.5, 0.3], [0.1, 0.1, 0.8]])
        logp = categorical_logprob(probs, np.array([1, 2]))
        assert logp == pytest.approx(np.log([0.5, 0.8]))

    @pytest.mark.parametrize("bad", [3, -1, 1.5])
    def test_check_indices_rejects(self, bad):
        """Out-of-support actions should raise InvalidActionError."""
        with pytest.raises(InvalidActionError):
            check_indices(np.array([0, bad]), 3)

    def test_gaussian_logprob_at_mean(self):
        """Standard normal density at the mean is -log sqrt(2 pi)."""
        logp = gaussian_logprob(np.zeros((1, 1)), np.ones((1, 1)), np.zeros((1, 1)))
        assert logp[0] == pytest.approx(-LOG_SQRT_2PI)


class TestRollout:
    """Tests for rollouts and the per-trajectory random streams."""

    def test_chain_nominal_rollout(self):
        """A nominal rollout should have weight one and fixed horizon."""
        env = ChainMdp()
        traj = rollout(env, NominalPolicy.for_env(env), trajectory_stream(0, 0))

        assert len(traj) == env.horizon
        assert traj.states.shape == (env.horizon + 1, 2)
        assert np.array_equal(traj.nominal_logps, traj.proposal_logps)
        assert traj.log_weight == 0.0

    def test_chain_return_matches_actions(self):
        """Chain return is 1 exactly when the action sum reaches the threshold."""
        env = ChainMdp(threshold=3)
        for i in range(30):
            traj = rollout(env, NominalPolicy.for_env(env), trajectory_stream(7, i))
            assert traj.ret == float(traj.actions.sum() >= 3)

    def test_stream_independent_of_batch(self):
        """A trajectory should not depend on which other streams share its batch."""
        env = ChainMdp()
        alone = rollout_batch(env, NominalPolicy.for_env(env), [trajectory_stream(3, 2)])[0]
        together = rollout_batch(env, NominalPolicy.for_env(env), [trajectory_stream(3, i) for i in range(3)])[2]
        assert np.array_equal(alone.actions, together.actions)
        assert np.array_equal(alone.states, together.states)

    def test_same_seed_same_trajectory(self):
        """Identical streams should give identical trajectories."""
        env = PendulumMdp(DisturbanceModel.continuous())
        a = rollout(env, NominalPolicy.for_env(env), trajectory_stream(1, 5))
        b = rollout(env, NominalPolicy.for_env(env), trajectory_stream(1, 5))
        assert np.array_equal(a.actions, b.actions)
        assert a.ret == b.ret

    def test_continuous_action_shape(self):
        """Continuous rollouts store one action row per step."""
        env = PendulumMdp(DisturbanceModel.continuous())
        traj = rollout(env, NominalPolicy.for_env(env), trajectory_stream(0, 0))
        assert traj.actions.shape == (env.horizon, 1)

    def test_kind_mismatch_rejected(self):
        """A continuous proposal cannot drive a discrete environment."""
        with pytest.raises(ArgumentError):
            rollout(ChainMdp(), NominalPolicy(ActionKind.CONTINUOUS), trajectory_stream(0, 0))

    def test_nominal_kind_follows_env(self):
        """The nominal proposal takes its action kind from the environment."""
        assert NominalPolicy.for_env(ChainMdp()).kind is ActionKind.DISCRETE
        assert NominalPolicy.for_env(PendulumMdp(DisturbanceModel.continuous())).kind is ActionKind.CONTINUOUS

    def test_nominal_kind_required(self):
        """There is no default action kind."""
        with pytest.raises(TypeError):
            NominalPolicy()

    def test_ragged_termination_rejected(self):
        """Trajectories of one batch must end on the same step."""
        env = SplitEndChain()
        with pytest.raises(ArgumentError):
            rollout_batch(env, NominalPolicy.for_env(env), [trajectory_stream(0, i) for i in range(2)])

    def test_non_finite_state_raises(self):
        """A NaN state should raise NumericalFailureError carrying the step."""
        with pytest.raises(NumericalFailureError) as excinfo:
            rollout(ExplodingChain(), NominalPolicy(ActionKind.DISCRETE), trajectory_stream(0, 0))
        assert excinfo.value.step == 1

    def test_empty_stream_list(self):
        """No streams means no trajectories."""
        assert rollout_batch(ChainMdp(), NominalPolicy(ActionKind.DISCRETE), []) == []


class TestTrajectory:
    """Tests for trajectory and batch containers."""

    def test_trajectory_is_read_only(self):
        """Stored arrays should reject writes."""
        traj = rollout(ChainMdp(), NominalPolicy(ActionKind.DISCRETE), trajectory_stream(0, 0))
        with pytest.raises(ValueError):
            traj.actions[0] = 2

    def test_length_mismatch_rejected(self):
        """States must be one longer than actions and log densities."""
        with pytest.raises(ArgumentError):
            Trajectory(
                states=np.zeros((3, 2)),
                actions=np.zeros(3),
                nominal_logps=np.zeros(3),
                proposal_logps=np.zeros(3),
                ret=0.0,
            )

    def test_batch_stack_and_select(self):
        """Stacked batches should keep shapes and support masking."""
        env = ChainMdp()
        trajs = rollout_batch(env, NominalPolicy.for_env(env), [trajectory_stream(0, i) for i in range(4)], proposal_index=1)
        batch = TrajectoryBatch.stack(trajs)

        assert len(batch) == 4
        assert batch.horizon == env.horizon
        assert batch.step_states().shape == (4 * env.horizon, 2)
        assert batch.proposal_index.tolist() == [1, 1, 1, 1]

        sub = batch.select(np.array([True, False, True, False]))
        assert len(sub) == 2
        assert np.array_equal(sub.actions[1], trajs[2].actions)

    def test_stack_empty_rejected(self):
        """Stacking nothing should raise."""
        with pytest.raises(ArgumentError):
            TrajectoryBatch.stack([])

    def test_sample_record_overflow(self):
        """A record whose weight overflows should raise."""
        with pytest.raises(WeightOverflowError):
            SampleRecord(ret=1.0, log_weight=1000.0)

    def test_sample_record_weight(self):
        """Weights are stored in log space and exponentiated on access."""
        record = SampleRecord(ret=1.0, log_weight=np.log(0.25))
        assert record.weight == pytest.approx(0.25)
