"""Failure-probability estimators: MC, CEM, PG-AIS and VB-AIS."""

from rare_ais.estimators.cem import cem_update, run_cem
from rare_ais.estimators.config import EstimatorConfig, Method, ReplayWeights
from rare_ais.estimators.dataset import (
    EstimateResult,
    SampleSet,
    adaptive_threshold,
    is_estimate,
    mc_estimate,
)
from rare_ais.estimators.loop import run_mc
from rare_ais.estimators.mixture import MixtureProposal, mis_reassign
from rare_ais.estimators.policy_gradient import baseline_update, pg_ais, pg_update
from rare_ais.estimators.pretrain import pretrain
from rare_ais.estimators.value_based import (
    ReplayBuffer,
    ValueGuidedPolicy,
    vb_ais,
    vb_policy_update,
    vb_q_update,
    vb_target,
)

ESTIMATORS = {
    Method.MC: run_mc,
    Method.CEM: run_cem,
    Method.PG: pg_ais,
    Method.VB: vb_ais,
}


def run_estimator(method: Method, config: EstimatorConfig, env) -> EstimateResult:
    """Dispatch to the estimator implementing `method`."""
    return ESTIMATORS[method](config, env)


__all__ = [
    "ESTIMATORS",
    "EstimateResult",
    "EstimatorConfig",
    "Method",
    "MixtureProposal",
    "ReplayBuffer",
    "ReplayWeights",
    "SampleSet",
    "ValueGuidedPolicy",
    "adaptive_threshold",
    "baseline_update",
    "cem_update",
    "is_estimate",
    "mc_estimate",
    "mis_reassign",
    "pg_ais",
    "pg_update",
    "pretrain",
    "run_cem",
    "run_estimator",
    "run_mc",
    "vb_ais",
    "vb_policy_update",
    "vb_q_update",
    "vb_target",
]
