"""Environments: the inverted pendulum and the enumerable toy chain."""

from rare_ais.envs.chain import ChainMdp
from rare_ais.envs.oracle import ExactTables, enumerate_mu, exact_q, optimal_proposal
from rare_ais.envs.pendulum import DisturbanceModel, DynamicsForm, PendulumMdp, SpreadConvention

__all__ = [
    "ChainMdp",
    "DisturbanceModel",
    "DynamicsForm",
    "ExactTables",
    "PendulumMdp",
    "SpreadConvention",
    "enumerate_mu",
    "exact_q",
    "optimal_proposal",
]
