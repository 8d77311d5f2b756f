"""Tests for harness result types."""

import json
import math

import pytest

from rare_ais.estimators.dataset import CurvePoint, EstimateResult, IterationDiagnostics
from rare_ais.harness.report import (
    REPORT_VERSION,
    AblationTable,
    CalibrationCandidate,
    CalibrationResult,
    ExperimentReport,
    GroundTruth,
    TrialResult,
    attach_series,
    mean_std,
    relative_errors,
)


def _trial(trial: int, mu_hat: float, mu: float = 0.5) -> TrialResult:
    estimate = EstimateResult(
        mu_hat=mu_hat,
        std_err=0.01,
        n_samples=100,
        curve=[CurvePoint(50, mu_hat * 2, 0.02), CurvePoint(100, mu_hat, 0.01)],
        iterations=[IterationDiagnostics(1, 50, 0.3, 5, mu_hat)],
    )
    return TrialResult.score(trial, 10 + trial, estimate, mu)


def _report(*mu_hats: float) -> ExperimentReport:
    return ExperimentReport(
        config={"method": "mc"},
        mu_true=0.5,
        trials=[_trial(i, m) for i, m in enumerate(mu_hats)],
        wall_clock=[1.5] * len(mu_hats),
    )


class TestErrorMetrics:
    """Tests for the per-trial and across-trial error metrics."""

    def test_relative_errors(self):
        """Absolute deviation is unsigned and bias keeps the sign."""
        eps_abs, eps_rel = relative_errors(0.4, 0.5)
        assert eps_abs == pytest.approx(0.2)
        assert eps_rel == pytest.approx(-0.2)

    def test_mean_std(self):
        """The standard deviation is the population one."""
        mean, std = mean_std([1.0, 3.0])
        assert mean == 2.0
        assert std == 1.0

    def test_mean_std_empty(self):
        """No values give NaN."""
        mean, std = mean_std([])
        assert math.isnan(mean) and math.isnan(std)


class TestGroundTruth:
    """Tests for GroundTruth."""

    def test_round_trip(self):
        """to_dict and from_dict agree through JSON."""
        truth = GroundTruth("chain", 0.0127, 0.001, 7.8, 10_000, 3, {"threshold": 5})
        assert GroundTruth.from_dict(json.loads(json.dumps(truth.to_dict()))) == truth

    def test_defaults_for_missing_fields(self):
        """Only env and mu are required."""
        truth = GroundTruth.from_dict({"env": "pendulum-discrete", "mu": 1e-3})
        assert truth.n_samples == 0
        assert truth.coefficient_of_variation == math.inf


class TestTrialResult:
    """Tests for TrialResult."""

    def test_score(self):
        """Scoring fills both error metrics."""
        result = _trial(0, 0.6)
        assert result.seed == 10
        assert result.eps_abs == pytest.approx(0.2)
        assert result.eps_rel == pytest.approx(0.2)

    def test_round_trip_drops_series(self):
        """Curves and iterations live in CSV files, not in the dictionary."""
        restored = TrialResult.from_dict(_trial(1, 0.4).to_dict())
        assert restored.mu_hat == 0.4
        assert restored.estimate.n_samples == 100
        assert restored.estimate.curve == []
        assert restored.estimate.iterations == []


class TestExperimentReport:
    """Tests for ExperimentReport."""

    def test_summary(self):
        """The summary holds mean and std of each metric."""
        summary = _report(0.6, 0.4).summary()
        assert summary["mu_hat"][0] == pytest.approx(0.5)
        assert summary["eps_abs"][0] == pytest.approx(0.2)
        assert summary["eps_abs"][1] == pytest.approx(0.0, abs=1e-12)
        assert summary["eps_rel"][0] == pytest.approx(0.0, abs=1e-12)
        assert summary["eps_rel"][1] == pytest.approx(0.2)

    def test_to_dict(self):
        """The dictionary carries version, seeds and summary but no timings."""
        data = _report(0.6, 0.4).to_dict()
        assert data["report_version"] == REPORT_VERSION
        assert data["seeds"] == [10, 11]
        assert data["summary"]["mu_hat"]["mean"] == pytest.approx(0.5)
        assert "wall_clock" not in data

    def test_timing(self):
        """Timings are summed separately."""
        assert _report(0.6, 0.4).timing_dict() == {"wall_clock": [1.5, 1.5], "total": 3.0}

    def test_rows(self):
        """Curve and iteration rows are tagged with the trial index."""
        report = _report(0.6, 0.4)
        assert report.curve_rows()[2] == (1, 50, 0.8, 0.02)
        assert report.iteration_rows() == [(0, 1, 50, 0.3, 5, 0.6), (1, 1, 50, 0.3, 5, 0.4)]

    def test_attach_series(self):
        """Series read back from CSV text restore the curves."""
        report = _report(0.6, 0.4)
        restored = ExperimentReport.from_dict(report.to_dict())
        curve = [{"trial": str(r[0]), "samples_used": str(r[1]), "mu_hat": str(r[2]), "std_err": str(r[3])} for r in report.curve_rows()]
        iters = [
            dict(zip(("trial", "iteration", "samples_used", "gamma_k", "elite_count", "mu_hat_running"), map(str, r)))
            for r in report.iteration_rows()
        ]

        attach_series(restored, curve, iters)

        assert restored.trials[1].estimate.curve == report.trials[1].estimate.curve
        assert restored.trials[0].estimate.iterations == report.trials[0].estimate.iterations


class TestAblationTable:
    """Tests for AblationTable."""

    @pytest.fixture
    def table(self):
        return AblationTable("pretraining", ("with", "without"), (_report(0.6, 0.4), _report(0.7, 0.7)))

    def test_rows(self, table):
        """One row per side with eps_abs and eps_rel statistics."""
        rows = table.rows()
        assert [r[0] for r in rows] == ["with", "without"]
        assert rows[1][1] == pytest.approx(0.4)
        assert rows[1][3] == pytest.approx(0.4)

    def test_to_dict(self, table):
        """The dictionary names the suite and its columns."""
        data = table.to_dict()
        assert data["suite"] == "pretraining"
        assert data["columns"] == ["with", "without"]
        assert data["rows"][0]["eps_abs_mean"] == pytest.approx(0.2)

    def test_to_text(self, table):
        """Metrics are rows, variants are columns, cells read mean ± std."""
        lines = table.to_text().splitlines()
        assert lines[0] == "Effect of pretraining"
        assert "with" in lines[1] and "without" in lines[1]
        assert lines[2].startswith("Average absolute deviation")
        assert "0.20 ± 0.00" in lines[2]
        assert "0.40 ± 0.00" in lines[2]
        assert lines[3].startswith("Empirical bias")
        assert "0.00 ± 0.20" in lines[3]


class TestCalibrationResult:
    """Tests for CalibrationResult."""

    def test_to_dict(self):
        """Candidates serialize in order with the chosen angle."""
        result = CalibrationResult(
            env="pendulum-discrete",
            target=1e-3,
            n_samples=1000,
            seed=0,
            candidates=[CalibrationCandidate(0.5, 2e-3, 1e-3, False), CalibrationCandidate(0.6, 1e-3, 1e-3, True)],
            chosen=0.6,
        )
        data = result.to_dict()
        assert data["chosen"] == 0.6
        assert [c["passes"] for c in data["candidates"]] == [False, True]
