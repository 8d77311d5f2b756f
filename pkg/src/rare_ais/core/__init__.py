"""Adversarial-MDP core: environments interface, rollouts and importance weights."""

from rare_ais.core.mdp import (
    ActionKind,
    ActionSpace,
    AdversarialMdp,
    DiscretePolicy,
    GaussianPolicy,
    NominalPolicy,
    ProposalPolicy,
    SampleRecord,
    Trajectory,
    TrajectoryBatch,
    rollout,
    rollout_batch,
    trajectory_stream,
)
from rare_ais.core.weights import (
    dm_weight,
    importance_weight,
    partial_weight,
    required_samples,
)

__all__ = [
    "ActionKind",
    "ActionSpace",
    "AdversarialMdp",
    "DiscretePolicy",
    "GaussianPolicy",
    "NominalPolicy",
    "ProposalPolicy",
    "SampleRecord",
    "Trajectory",
    "TrajectoryBatch",
    "dm_weight",
    "importance_weight",
    "partial_weight",
    "required_samples",
    "rollout",
    "rollout_batch",
    "trajectory_stream",
]
