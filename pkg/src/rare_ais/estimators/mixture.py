"""Mixtures of proposals: equal allocation, DM weights and hard-EM assignment."""

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from rare_ais.core.mdp import (
    AdversarialMdp,
    NominalPolicy,
    ProposalPolicy,
    Trajectory,
    TrajectoryBatch,
    rollout_batch,
    trajectory_stream,
)
from rare_ais.core.weights import (
    cumulative_log_weights,
    dm_log_weights,
    dm_partial_log_weights,
    policy_log_densities,
)
from rare_ais.errors import ArgumentError


@dataclass
class MixtureProposal:
    """M trainable members, optionally preceded by the nominal policy.

    Sampling index 0 is the nominal policy when `include_nominal` is set;
    trainable member m then samples under index m + 1.
    """

    members: list[ProposalPolicy]
    include_nominal: bool = False
    _nominal: NominalPolicy = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if not self.members:
            raise ArgumentError("a mixture needs at least one member")
        kinds = {m.kind for m in self.members}
        if len(kinds) != 1:
            raise ArgumentError("mixture members disagree on the action kind")
        self._nominal = NominalPolicy(kind=self.members[0].kind)

    @property
    def offset(self) -> int:
        """Sampling index of trainable member 0."""
        return 1 if self.include_nominal else 0

    @property
    def sampling_members(self) -> list[ProposalPolicy]:
        if self.include_nominal:
            return [self._nominal, *self.members]
        return list(self.members)

    def allocation(self, n: int) -> list[int]:
        """n // S samples per sampling member, the remainder to the lowest indices."""
        count = len(self.sampling_members)
        base, extra = divmod(n, count)
        return [base + (1 if i < extra else 0) for i in range(count)]

    def sample(self, env: AdversarialMdp, n: int, seed: int, start_index: int = 0) -> list[Trajectory]:
        """Draw `n` trajectories; stream `start_index + j` feeds the j-th one."""
        trajectories: list[Trajectory] = []
        index = start_index
        for member_index, (member, count) in enumerate(zip(self.sampling_members, self.allocation(n))):
            rngs = [trajectory_stream(seed, index + j) for j in range(count)]
            trajectories.extend(rollout_batch(env, member, rngs, member_index))
            index += count
        return trajectories

    def log_weights(self, env: AdversarialMdp, batch: TrajectoryBatch) -> np.ndarray:
        """(N,) log weights; DM weights whenever more than one member samples."""
        if len(self.sampling_members) == 1:
            return batch.nominal_logps.sum(axis=1) - batch.proposal_logps.sum(axis=1)
        return dm_log_weights(env, batch, self)

    def partial_log_weights(
        self,
        env: AdversarialMdp,
        batch: TrajectoryBatch,
        inclusive: bool = True,
    ) -> np.ndarray:
        """(N, T) running log weights against the sampling mixture."""
        if len(self.sampling_members) == 1:
            member_logps = policy_log_densities(env, self.sampling_members, batch)[:, :, 0]
            return cumulative_log_weights(batch.nominal_logps, member_logps, inclusive)
        member_logps = policy_log_densities(env, self.sampling_members, batch)
        return dm_partial_log_weights(batch.nominal_logps, member_logps, inclusive)

    def trainable_index(self, proposal_index: np.ndarray) -> np.ndarray:
        """Map sampling indices to trainable member indices (-1 for the nominal member)."""
        return np.asarray(proposal_index, dtype=np.int64) - self.offset


def mis_reassign(
    env: AdversarialMdp,
    trajectories: Sequence[Trajectory] | TrajectoryBatch,
    mixture: MixtureProposal,
) -> np.ndarray:
    """Assign each trajectory to the trainable member most likely to have produced it.

    Ties go to the lowest member index.

    Returns:
        (N,) trainable member index per trajectory
    """
    batch = trajectories if isinstance(trajectories, TrajectoryBatch) else TrajectoryBatch.stack(trajectories)
    if len(mixture.members) == 1:
        return np.zeros(len(batch), dtype=np.int64)
    log_q = policy_log_densities(env, mixture.members, batch).sum(axis=1)
    return np.argmax(log_q, axis=1).astype(np.int64)
