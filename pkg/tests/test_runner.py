"""Tests for experiment orchestration and report persistence."""

import json
import math
from pathlib import Path

import numpy as np
import pytest

from rare_ais.envs import ChainMdp, PendulumMdp, enumerate_mu
from rare_ais.envs.pendulum import PUBLISHED_FAILURE_RATES
from rare_ais.errors import ArgumentError, ConfigError
from rare_ais.estimators import Method
from rare_ais.harness import runner
from rare_ais.harness.config import ExperimentConfig
from rare_ais.harness.report import GroundTruth
from rare_ais.harness.runner import (
    ExperimentRunner,
    build_env,
    calibrate_failure_threshold,
    failure_quantile,
    run_ground_truth,
)


SMOKE_CONFIG = Path(__file__).parent.parent / "configs" / "chain-smoke.cfg"


@pytest.fixture
def chain_config():
    return ExperimentConfig(method=Method.MC, env="chain", chain_threshold=5, trials=2, seed=3).with_overrides(
        n_total=200, n_per_iter=50, curve_interval=50
    )


class TestBuildEnv:
    """Tests for environment construction from a config."""

    def test_chain(self):
        """The chain takes its threshold from the config."""
        env = build_env(ExperimentConfig(env="chain", chain_threshold=5))
        assert isinstance(env, ChainMdp)
        assert env.threshold == 5

    def test_pendulum_overrides(self):
        """The failure angle override reaches the pendulum."""
        env = build_env(ExperimentConfig(env="pendulum-continuous", gamma_fail=0.5))
        assert isinstance(env, PendulumMdp)
        assert env.name == "pendulum-continuous"
        assert env.params()["gamma_fail"] == 0.5

    def test_default_failure_angles(self):
        """Without an override each pendulum variant gets its calibrated angle."""
        assert build_env(ExperimentConfig(env="pendulum-discrete")).failure_threshold == 0.185
        assert build_env(ExperimentConfig(env="pendulum-continuous")).failure_threshold == 0.253

    def test_default_angle_fails_sometimes(self):
        """The default angle is exceeded by some nominal episodes."""
        env = build_env(ExperimentConfig(env="pendulum-discrete"))
        truth = run_ground_truth(env, 400_000, seed=0)
        assert truth.mu > 0.0


class TestGroundTruth:
    """Tests for long Monte Carlo reference runs."""

    def test_chain_estimate_near_exact(self):
        """MC on the chain lands within five standard errors of the exact value."""
        env = ChainMdp(threshold=5)
        truth = run_ground_truth(env, 20_000, seed=1, chunk_size=5_000)
        assert truth.env == "chain"
        assert truth.n_samples == 20_000
        assert abs(truth.mu - enumerate_mu(env, env.failure_threshold)) < 5.0 * truth.std_err

    def test_deterministic(self):
        """The same seed and chunking give the same estimate."""
        env = ChainMdp(threshold=5)
        assert run_ground_truth(env, 3_000, 4, chunk_size=1_000) == run_ground_truth(env, 3_000, 4, chunk_size=1_000)

    def test_rejects_empty_run(self):
        """At least one episode is needed."""
        with pytest.raises(ArgumentError):
            run_ground_truth(ChainMdp(), 0, seed=0)

    def test_calibrate_needs_published_rate(self):
        """The chain has no published failure rate to calibrate against."""
        with pytest.raises(ConfigError) as excinfo:
            calibrate_failure_threshold(ExperimentConfig(env="chain"), 100, 0)
        assert excinfo.value.key == "env"

    def test_calibrate_pendulum(self):
        """Every grid angle is scored on one shared set of returns."""
        result = calibrate_failure_threshold(ExperimentConfig(env="pendulum-discrete"), 2_000, 0, grid=(0.01, 1.0))
        assert [c.gamma_fail for c in result.candidates] == [0.01, 1.0]
        assert result.candidates[0].mu_hat >= result.candidates[1].mu_hat
        assert result.chosen in (None, 0.01, 1.0)
        assert result.quantile is not None and result.quantile > 0.0

    def test_failure_quantile(self):
        """The quantile is exceeded by exactly the requested fraction."""
        returns = np.arange(1, 1001) / 1000.0
        threshold = failure_quantile(returns, 0.01)
        assert np.count_nonzero(returns > threshold) == 10

    @pytest.mark.parametrize("rate", [0.0, 1.0])
    def test_failure_quantile_rate_range(self, rate):
        """Rates outside (0, 1) are rejected."""
        with pytest.raises(ArgumentError):
            failure_quantile(np.ones(4), rate)

    @pytest.mark.slow
    @pytest.mark.parametrize("env_name", ["pendulum-discrete", "pendulum-continuous"])
    def test_default_angle_matches_published_rate(self, env_name):
        """Ground truth at the default angle is within three standard errors of the published rate."""
        env = build_env(ExperimentConfig(env=env_name))
        truth = run_ground_truth(env, 5_000_000, seed=0)
        target = PUBLISHED_FAILURE_RATES[env_name]
        assert abs(truth.mu - target) <= 3.0 * math.sqrt(target * (1.0 - target) / truth.n_samples)


class TestResolveMu:
    """Tests for choosing the reference failure probability."""

    def test_chain_uses_oracle(self, tmp_path, chain_config):
        """Without a ground-truth file the chain is enumerated exactly."""
        assert ExperimentRunner(tmp_path).resolve_mu(chain_config) == pytest.approx(0.012695)

    def test_ground_truth_file(self, tmp_path, chain_config):
        """A written ground-truth file is read back."""
        experiment = ExperimentRunner(tmp_path)
        path = experiment.write_ground_truth(GroundTruth("chain", 0.02, 0.001, 5.0, 1000, 0), tmp_path / "gt" / "chain.json")
        assert path.exists()
        assert experiment.resolve_mu(chain_config.with_overrides(ground_truth_file=str(path))) == 0.02

    def test_env_mismatch(self, tmp_path, chain_config):
        """Ground truth for another environment is rejected."""
        experiment = ExperimentRunner(tmp_path)
        path = experiment.write_ground_truth(GroundTruth("pendulum-discrete", 1e-3, 1e-4, 3.0, 1000, 0), tmp_path / "gt.json")
        with pytest.raises(ConfigError) as excinfo:
            experiment.resolve_mu(chain_config.with_overrides(ground_truth_file=str(path)))
        assert excinfo.value.key == "ground_truth_file"

    def test_missing_file(self, tmp_path, chain_config):
        """An unreadable ground-truth file is a config error."""
        with pytest.raises(ConfigError):
            ExperimentRunner(tmp_path).resolve_mu(chain_config.with_overrides(ground_truth_file=str(tmp_path / "no.json")))

    def test_pendulum_needs_file(self, tmp_path):
        """The pendulum has no exact oracle."""
        with pytest.raises(ConfigError):
            ExperimentRunner(tmp_path).resolve_mu(ExperimentConfig(env="pendulum-discrete"))


class TestExperimentRunner:
    """Tests for running and persisting experiments."""

    def test_smoke_config(self, tmp_path):
        """The shipped chain smoke run writes every report file."""
        report = runner.run_experiment(SMOKE_CONFIG, tmp_path)

        assert len(report.trials) == 1
        assert len(report.trials[0].estimate.curve) == 100
        assert len(report.trials[0].estimate.iterations) == 5
        for name in ("report.json", "curve.csv", "iters.csv", "timing.json"):
            assert (tmp_path / name).exists()

    def test_report_contents(self, tmp_path, chain_config):
        """report.json records config, reference value, seeds and summary."""
        ExperimentRunner(tmp_path).run_experiment(chain_config)
        data = json.loads((tmp_path / "report.json").read_text())

        assert data["config"]["method"] == "mc"
        assert data["mu_true"] == pytest.approx(0.012695)
        assert data["seeds"] == [3, 4]
        assert set(data["summary"]) == {"mu_hat", "eps_abs", "eps_rel"}

    def test_reruns_are_identical(self, tmp_path, chain_config):
        """The same config and seed produce byte-identical report files."""
        ExperimentRunner(tmp_path / "a").run_experiment(chain_config)
        ExperimentRunner(tmp_path / "b").run_experiment(chain_config)
        for name in ("report.json", "curve.csv", "iters.csv"):
            assert (tmp_path / "a" / name).read_text() == (tmp_path / "b" / name).read_text()

    def test_load_report(self, tmp_path, chain_config):
        """A saved report loads back with its curves, iterations and timings."""
        experiment = ExperimentRunner(tmp_path)
        original = experiment.run_experiment(chain_config)

        loaded = experiment.load_report()

        assert loaded.mu_true == original.mu_true
        assert [t.mu_hat for t in loaded.trials] == [t.mu_hat for t in original.trials]
        assert loaded.trials[1].estimate.curve == original.trials[1].estimate.curve
        assert loaded.trials[0].estimate.iterations == original.trials[0].estimate.iterations
        assert len(loaded.wall_clock) == 2

    def test_load_missing_report(self, tmp_path):
        """No report.json loads as None."""
        assert ExperimentRunner(tmp_path).load_report() is None

    def test_non_positive_mu(self, tmp_path, chain_config):
        """A zero reference probability cannot score relative errors."""
        with pytest.raises(ConfigError):
            ExperimentRunner(tmp_path).run_experiment(chain_config, mu=0.0)

    def test_workers_match_serial(self, tmp_path, chain_config):
        """A process pool merges trials in order with the serial results."""
        serial = ExperimentRunner(tmp_path / "serial").run_experiment(chain_config)
        pooled = ExperimentRunner(tmp_path / "pooled").run_experiment(chain_config.with_overrides(workers=2))
        assert [t.mu_hat for t in pooled.trials] == [t.mu_hat for t in serial.trials]
        assert [t.seed for t in pooled.trials] == [3, 4]


class TestAblation:
    """Tests for paired ablation suites."""

    def test_table_and_files(self, tmp_path, chain_config):
        """Both sides run on the same seeds and the table files are written."""
        table = ExperimentRunner(tmp_path).run_ablation("baseline", chain_config)

        assert table.labels == ("no baseline", "baseline")
        assert len(table.rows()) == 2
        assert table.reports[0].seeds == table.reports[1].seeds
        for suffix in ("json", "csv", "txt"):
            assert (tmp_path / f"ablation.{suffix}").exists()
        assert (tmp_path / "no-baseline" / "report.json").exists()
        assert (tmp_path / "baseline" / "report.json").exists()
        assert (tmp_path / "ablation.txt").read_text().startswith("Effect of baseline")

    def test_sides_get_overrides(self, tmp_path, chain_config):
        """Each side records its own override."""
        table = ExperimentRunner(tmp_path).run_ablation("defensive", chain_config)
        assert [r.config["defensive"] for r in table.reports] == [False, True]

    def test_unknown_suite(self, tmp_path, chain_config):
        """Unknown suites raise ConfigError naming the suite key."""
        with pytest.raises(ConfigError) as excinfo:
            ExperimentRunner(tmp_path).run_ablation("dropout", chain_config)
        assert excinfo.value.key == "suite"
