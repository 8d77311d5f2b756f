"""Experiment orchestration.

The ExperimentRunner owns an output directory and drives ground-truth
runs, configured experiments and ablation suites, writing every result
through a ResultStore.
"""

import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from itertools import repeat
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from rare_ais.core.mdp import AdversarialMdp, trajectory_stream
from rare_ais.core.weights import coefficient_of_variation
from rare_ais.envs import ChainMdp, DisturbanceModel, DynamicsForm, PendulumMdp, SpreadConvention, enumerate_mu
from rare_ais.envs.pendulum import PUBLISHED_FAILURE_RATES
from rare_ais.errors import ArgumentError, ConfigError
from rare_ais.estimators import run_estimator
from rare_ais.harness.config import ExperimentConfig, load_config
from rare_ais.harness.report import (
    AblationTable,
    CalibrationCandidate,
    CalibrationResult,
    ExperimentReport,
    GroundTruth,
    TrialResult,
)
from rare_ais.harness.store import ResultStore


logger = logging.getLogger(__name__)

GROUND_TRUTH_CHUNK = 100_000
# 0.15 to 0.30 rad in 0.005 steps, bracketing both published failure rates
CALIBRATION_GRID = tuple(round(0.15 + 0.005 * i, 3) for i in range(31))

CURVE_HEADER = ("trial", "samples_used", "mu_hat", "std_err")
ITERS_HEADER = ("trial", "iteration", "samples_used", "gamma_k", "elite_count", "mu_hat_running")
ABLATION_HEADER = ("label", "eps_abs_mean", "eps_abs_std", "eps_rel_mean", "eps_rel_std")

# Paired settings per ablation suite: (column label, overrides)
ABLATION_SUITES: dict[str, tuple[tuple[str, dict], tuple[str, dict]]] = {
    "pretrain": (("pretrained", {"pretrain": True}), ("not pretrained", {"pretrain": False})),
    "defensive": (("vanilla", {"defensive": False}), ("defensive", {"defensive": True})),
    "baseline": (("no baseline", {"baseline": False}), ("baseline", {"baseline": True})),
}


def build_env(config: ExperimentConfig) -> AdversarialMdp:
    """Instantiate the environment named by `config.env` with its overrides."""
    if config.env == "chain":
        return ChainMdp(threshold=config.chain_threshold)
    if config.env == "pendulum-discrete":
        disturbance = DisturbanceModel.discrete()
    elif config.env == "pendulum-continuous":
        disturbance = DisturbanceModel.continuous(SpreadConvention(config.continuous_std_convention))
    else:
        raise ConfigError("env", f"unknown env {config.env!r}")
    return PendulumMdp(disturbance, gamma_fail=config.gamma_fail, dynamics_form=DynamicsForm(config.dynamics_form))


def failure_threshold(config: ExperimentConfig, env: AdversarialMdp) -> float:
    return env.failure_threshold if config.estimator.gamma is None else config.estimator.gamma


# -------------------------------------------------------------------------
# Ground truth
# -------------------------------------------------------------------------


def nominal_return_chunks(
    env: AdversarialMdp,
    n_samples: int,
    seed: int,
    chunk_size: int = GROUND_TRUTH_CHUNK,
) -> Iterator[np.ndarray]:
    """Returns of `n_samples` nominal episodes, yielded chunk by chunk.

    Chunk c draws from stream (seed, c), so the result does not depend
    on how the chunks are scheduled.
    """
    if n_samples < 1:
        raise ArgumentError("n_samples must be at least 1")
    done = 0
    chunk = 0
    while done < n_samples:
        n = min(chunk_size, n_samples - done)
        yield env.nominal_returns(n, trajectory_stream(seed, chunk))
        done += n
        chunk += 1


def binomial_std_err(failures: int, n_samples: int) -> float:
    mu = failures / n_samples
    return math.sqrt(mu * (1.0 - mu) / (n_samples - 1)) if n_samples > 1 else 0.0


def run_ground_truth(
    env: AdversarialMdp,
    n_samples: int,
    seed: int,
    gamma: float | None = None,
    chunk_size: int = GROUND_TRUTH_CHUNK,
) -> GroundTruth:
    """Plain Monte Carlo over vectorised nominal episodes."""
    gamma = env.failure_threshold if gamma is None else gamma
    failures = sum(
        int(np.count_nonzero(returns > gamma))
        for returns in nominal_return_chunks(env, n_samples, seed, chunk_size)
    )
    mu = failures / n_samples
    logger.info("ground truth %s: mu=%.6g (%d failures in %d episodes)", env.name, mu, failures, n_samples)
    return GroundTruth(
        env=env.name,
        mu=mu,
        std_err=binomial_std_err(failures, n_samples),
        coefficient_of_variation=coefficient_of_variation(mu, n_samples),
        n_samples=n_samples,
        seed=seed,
        env_params=env.params(),
    )


def failure_quantile(returns: np.ndarray, rate: float) -> float:
    """Threshold that a fraction `rate` of the returns exceed."""
    if not 0.0 < rate < 1.0:
        raise ArgumentError(f"rate must lie in (0, 1), got {rate}")
    return float(np.quantile(np.asarray(returns, dtype=np.float64), 1.0 - rate))


def calibrate_failure_threshold(
    config: ExperimentConfig,
    n_samples: int,
    seed: int,
    grid: Sequence[float] = CALIBRATION_GRID,
    chunk_size: int = GROUND_TRUTH_CHUNK,
) -> CalibrationResult:
    """Score candidate failure angles against the published failure rate.

    One set of nominal returns is simulated and every candidate is scored
    on it. A candidate passes when its estimate lies within three standard
    errors of the target; the chosen angle is the one closest in log
    ratio. The empirical quantile matching the target is recorded too.
    """
    if config.env not in PUBLISHED_FAILURE_RATES:
        raise ConfigError("env", f"no published failure rate to calibrate {config.env!r} against")
    target = PUBLISHED_FAILURE_RATES[config.env]
    env = build_env(config)
    returns = np.concatenate(list(nominal_return_chunks(env, n_samples, seed, chunk_size)))
    result = CalibrationResult(
        env=config.env,
        target=target,
        n_samples=n_samples,
        seed=seed,
        quantile=failure_quantile(returns, target),
    )
    best = math.inf
    for gamma_fail in grid:
        failures = int(np.count_nonzero(returns > gamma_fail))
        mu = failures / n_samples
        std_err = binomial_std_err(failures, n_samples)
        passes = abs(mu - target) <= 3.0 * std_err
        result.candidates.append(CalibrationCandidate(float(gamma_fail), mu, std_err, passes))
        if mu > 0.0 and abs(math.log(mu / target)) < best:
            best = abs(math.log(mu / target))
            result.chosen = float(gamma_fail)
    logger.info("calibration %s: empirical quantile %.4f, chosen %s", config.env, result.quantile, result.chosen)
    if not any(c.passes for c in result.candidates):
        logger.warning(
            "calibration %s: no candidate within 3 standard errors of %.3g; closest is %s",
            config.env, target, result.chosen,
        )
    return result


# -------------------------------------------------------------------------
# Trials
# -------------------------------------------------------------------------


def run_trial(config: ExperimentConfig, trial: int, mu: float) -> tuple[TrialResult, float]:
    """One seeded estimator run; a top-level function so process pools can pickle it."""
    env = build_env(config)
    seed = config.trial_seed(trial)
    logger.info("trial %d (seed %d): %s on %s", trial, seed, config.method.value, env.name)
    start = time.perf_counter()
    estimate = run_estimator(config.method, config.estimator_for_trial(trial), env)
    elapsed = time.perf_counter() - start
    result = TrialResult.score(trial, seed, estimate, mu)
    logger.info("trial %d done in %.1fs: mu_hat=%.6g eps_abs=%.3f", trial, elapsed, result.mu_hat, result.eps_abs)
    return result, elapsed


def run_trials(config: ExperimentConfig, mu: float) -> list[tuple[TrialResult, float]]:
    """All trials, merged in trial order whether run serially or in a process pool."""
    trials = range(config.trials)
    if config.workers == 1:
        return [run_trial(config, trial, mu) for trial in trials]
    with ProcessPoolExecutor(max_workers=config.workers) as pool:
        return list(pool.map(run_trial, repeat(config), trials, repeat(mu)))


class ExperimentRunner:
    """Runs experiments and persists their results under one output directory."""

    def __init__(self, out_dir: Path | str):
        """Initialize the runner.

        Args:
            out_dir: Directory receiving report.json and its companions
        """
        self.store = ResultStore(out_dir)

    @property
    def out_dir(self) -> Path:
        return self.store.out_dir

    def resolve_mu(self, config: ExperimentConfig, env: AdversarialMdp | None = None) -> float:
        """Reference failure probability from the ground-truth file, or the exact oracle.

        Raises:
            ConfigError: no usable ground truth for this environment.
        """
        env = env or build_env(config)
        if config.ground_truth_file:
            truth = self.store.read_ground_truth_sync(config.ground_truth_file)
            if truth is None:
                raise ConfigError(
                    "ground_truth_file", f"cannot read ground truth from {config.ground_truth_file}"
                )
            if truth.env != env.name:
                raise ConfigError(
                    "ground_truth_file", f"ground truth is for {truth.env}, config runs {env.name}"
                )
            return truth.mu
        if isinstance(env, ChainMdp):
            return enumerate_mu(env, failure_threshold(config, env))
        raise ConfigError("ground_truth_file", f"{env.name} needs a ground_truth_file")

    def write_ground_truth(self, truth: GroundTruth, path: Path | str) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.store.write_json_sync(path, truth.to_dict())
        logger.info("wrote %s", path)
        return path

    def write_calibration(self, result: CalibrationResult, path: Path | str) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.store.write_json_sync(path, result.to_dict())
        logger.info("wrote %s", path)
        return path

    def run_experiment(self, config: ExperimentConfig, mu: float | None = None) -> ExperimentReport:
        """Run every trial of `config` and write the report files."""
        mu = self.resolve_mu(config) if mu is None else mu
        if not mu > 0.0:
            raise ConfigError("ground_truth_file", f"reference mu must be positive, got {mu}")
        outcomes = run_trials(config, mu)
        report = ExperimentReport(
            config=config.to_dict(),
            mu_true=mu,
            trials=[result for result, _ in outcomes],
            wall_clock=[elapsed for _, elapsed in outcomes],
        )
        self.save_report(report)
        return report

    def save_report(self, report: ExperimentReport) -> None:
        self.store.init_dir_sync()
        self.store.write_json_sync(self.store.report_path, report.to_dict())
        self.store.write_csv_sync(self.store.curve_path, CURVE_HEADER, report.curve_rows())
        self.store.write_csv_sync(self.store.iters_path, ITERS_HEADER, report.iteration_rows())
        self.store.write_json_sync(self.store.timing_path, report.timing_dict())
        logger.info("wrote report for %d trials to %s", len(report.trials), self.out_dir)

    def load_report(self) -> ExperimentReport | None:
        """Read report.json back, with curves and iterations from the CSV files."""
        return self.store.read_report_sync()

    def run_ablation(self, suite: str, config: ExperimentConfig) -> AblationTable:
        """Run both sides of an ablation on identical seeds and write the comparison table.

        Raises:
            ConfigError: `suite` is not one of pretrain, defensive, baseline.
        """
        if suite not in ABLATION_SUITES:
            raise ConfigError("suite", f"unknown ablation suite {suite!r}; expected one of {', '.join(ABLATION_SUITES)}")
        mu = self.resolve_mu(config)
        labels, reports = [], []
        for label, overrides in ABLATION_SUITES[suite]:
            side = ExperimentRunner(self.out_dir / label.replace(" ", "-"))
            logger.info("ablation %s: running %r", suite, label)
            reports.append(side.run_experiment(config.with_overrides(**overrides), mu))
            labels.append(label)
        table = AblationTable(suite, tuple(labels), tuple(reports))

        self.store.init_dir_sync()
        self.store.write_json_sync(self.store.ablation_path("json"), table.to_dict())
        self.store.write_csv_sync(self.store.ablation_path("csv"), ABLATION_HEADER, table.rows())
        self.store.write_text_sync(self.store.ablation_path("txt"), table.to_text())
        logger.info("wrote ablation table to %s", self.out_dir)
        return table


def run_experiment(config_path: Path | str, out_dir: Path | str) -> ExperimentReport:
    """Load a config file and run it into `out_dir`."""
    return ExperimentRunner(out_dir).run_experiment(load_config(config_path))


def run_ablation(suite: str, config_path: Path | str, out_dir: Path | str) -> AblationTable:
    return ExperimentRunner(out_dir).run_ablation(suite, load_config(config_path))
