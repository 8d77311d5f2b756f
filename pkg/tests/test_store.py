"""Tests for the experiment output file layer."""

import json

import pytest

from rare_ais.estimators.dataset import CurvePoint, EstimateResult, IterationDiagnostics
from rare_ais.harness.report import ExperimentReport, GroundTruth, TrialResult
from rare_ais.harness.store import ResultStore


def _report() -> ExperimentReport:
    estimate = EstimateResult(
        mu_hat=0.011,
        std_err=0.002,
        n_samples=400,
        iterations=[IterationDiagnostics(0, 200, 0.0, 5, 0.01), IterationDiagnostics(1, 400, 0.5, 9, 0.011)],
        curve=[CurvePoint(200, 0.01, 0.003), CurvePoint(400, 0.011, 0.002)],
    )
    return ExperimentReport(
        config={"method": "pg", "env": "chain"},
        mu_true=0.012695,
        trials=[TrialResult.score(0, 7, estimate, 0.012695)],
        wall_clock=[1.5],
    )


def _save(store: ResultStore, report: ExperimentReport) -> None:
    store.init_dir_sync()
    store.write_json_sync(store.report_path, report.to_dict())
    store.write_json_sync(store.timing_path, report.timing_dict())
    store.write_csv_sync(store.curve_path, ("trial", "samples_used", "mu_hat", "std_err"), report.curve_rows())
    store.write_csv_sync(
        store.iters_path,
        ("trial", "iteration", "samples_used", "gamma_k", "elite_count", "mu_hat_running"),
        report.iteration_rows(),
    )


class TestResultStore:
    """Tests for synchronous ResultStore operations."""

    def test_paths(self, tmp_path):
        """Standard files live directly under the output directory."""
        store = ResultStore(tmp_path / "out")
        assert store.report_path == (tmp_path / "out" / "report.json").resolve()
        assert store.curve_path.name == "curve.csv"
        assert store.iters_path.name == "iters.csv"
        assert store.timing_path.name == "timing.json"
        assert store.ablation_path("txt").name == "ablation.txt"

    def test_init_dir_sync(self, tmp_path):
        """init_dir_sync creates missing parents."""
        store = ResultStore(tmp_path / "a" / "b")
        store.init_dir_sync()
        assert store.out_dir.is_dir()

    def test_write_json_sync(self, tmp_path):
        """JSON is written atomically with no temp file left behind."""
        store = ResultStore(tmp_path)
        store.write_json_sync(store.timing_path, {"wall_clock": [0.5]})

        assert json.loads(store.timing_path.read_text()) == {"wall_clock": [0.5]}
        assert not (tmp_path / "timing.json.tmp").exists()

    def test_write_csv_overwrites(self, tmp_path):
        """A second write replaces the first."""
        store = ResultStore(tmp_path)
        store.write_csv_sync(store.iters_path, ("a",), [(1,)])
        store.write_csv_sync(store.iters_path, ("a",), [(2,), (3,)])
        assert store.iters_path.read_text() == "a\n2\n3\n"

    def test_read_report(self, tmp_path):
        """A saved report reads back with timings, curve points and iterations."""
        store = ResultStore(tmp_path)
        original = _report()
        _save(store, original)

        loaded = store.read_report_sync()

        assert loaded.mu_true == original.mu_true
        assert loaded.config == original.config
        assert loaded.wall_clock == [1.5]
        assert loaded.trials[0].seed == 7
        assert loaded.trials[0].estimate.curve == original.trials[0].estimate.curve
        assert loaded.trials[0].estimate.iterations == original.trials[0].estimate.iterations

    def test_read_report_without_companions(self, tmp_path):
        """report.json alone reads with empty timings and series."""
        store = ResultStore(tmp_path)
        store.write_json_sync(store.report_path, _report().to_dict())

        loaded = store.read_report_sync()

        assert loaded.wall_clock == []
        assert loaded.trials[0].estimate.curve == []

    def test_read_report_missing(self, tmp_path):
        """A missing report reads as None."""
        assert ResultStore(tmp_path).read_report_sync() is None

    @pytest.mark.parametrize("text", ["{broken", "[1, 2]", '{"config": {}}'])
    def test_read_report_invalid(self, tmp_path, text):
        """Malformed JSON, a non-object or a missing mu_true reads as None."""
        store = ResultStore(tmp_path)
        store.report_path.write_text(text)
        assert store.read_report_sync() is None

    def test_read_ground_truth(self, tmp_path):
        """A ground-truth file reads back as GroundTruth."""
        store = ResultStore(tmp_path)
        truth = GroundTruth("pendulum-discrete", 2.5e-5, 2e-6, 0.08, 5_000_000, 0, {"gamma_fail": 0.185})
        store.write_json_sync(tmp_path / "gt.json", truth.to_dict())

        assert store.read_ground_truth_sync(tmp_path / "gt.json") == truth

    def test_read_ground_truth_incomplete(self, tmp_path):
        """A file without env and mu is not ground truth."""
        store = ResultStore(tmp_path)
        (tmp_path / "gt.json").write_text('{"std_err": 0.1}')
        assert store.read_ground_truth_sync(tmp_path / "gt.json") is None
        assert store.read_ground_truth_sync(tmp_path / "absent.json") is None


@pytest.mark.asyncio
class TestResultStoreAsync:
    """Async tests for ResultStore."""

    async def test_read_report(self, tmp_path):
        """The async reader sees the same report as the sync one."""
        store = ResultStore(tmp_path)
        _save(store, _report())

        loaded = await store.read_report()

        assert loaded.mu_true == 0.012695
        assert loaded.wall_clock == [1.5]
        assert len(loaded.trials[0].estimate.curve) == 2

    async def test_read_report_missing(self, tmp_path):
        """A missing report reads as None."""
        assert await ResultStore(tmp_path / "empty").read_report() is None
