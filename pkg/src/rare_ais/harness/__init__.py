"""Experiment harness: configuration, ground truth, trials, ablations and result files."""

from rare_ais.harness.config import ExperimentConfig, load_config
from rare_ais.harness.report import AblationTable, ExperimentReport, GroundTruth, TrialResult
from rare_ais.harness.runner import (
    ExperimentRunner,
    build_env,
    calibrate_failure_threshold,
    run_ablation,
    run_experiment,
    run_ground_truth,
)
from rare_ais.harness.store import ResultStore

__all__ = [
    "AblationTable",
    "ExperimentConfig",
    "ExperimentReport",
    "ExperimentRunner",
    "GroundTruth",
    "ResultStore",
    "TrialResult",
    "build_env",
    "calibrate_failure_threshold",
    "load_config",
    "run_ablation",
    "run_experiment",
    "run_ground_truth",
]
