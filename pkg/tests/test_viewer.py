import pytest
from textual.widgets import DataTable

from rare_ais.estimators import Method
from rare_ais.harness.config import ExperimentConfig
from rare_ais.harness.runner import ExperimentRunner
from rare_ais.viewer import ReportViewerApp
from rare_ais.viewer.report_viewer import COLUMNS


def _write_report(out_dir):
    config = ExperimentConfig(method=Method.MC, env="chain", chain_threshold=5, trials=3).with_overrides(
        n_total=100, n_per_iter=50
    )
    return ExperimentRunner(out_dir).run_experiment(config)


@pytest.mark.asyncio
async def test_viewer_shows_trials(tmp_path):
    report = _write_report(tmp_path)

    app = ReportViewerApp(tmp_path)
    async with app.run_test() as pilot:
        await pilot.pause()
        table = app.query_one("#trials", DataTable)

        assert len(table.columns) == len(COLUMNS)
        assert table.row_count == 3
        assert app.report is not None
        assert app.report.mu_true == report.mu_true
        assert len(app.report.wall_clock) == 3
        assert app.summary_text().startswith("mc on chain, 3 trials")


@pytest.mark.asyncio
async def test_viewer_without_report(tmp_path):
    app = ReportViewerApp(tmp_path / "empty")
    async with app.run_test() as pilot:
        await pilot.pause()
        table = app.query_one("#trials", DataTable)

        assert app.report is None
        assert table.row_count == 0
        assert app.summary_text() == ""


@pytest.mark.asyncio
async def test_viewer_reload_picks_up_new_report(tmp_path):
    app = ReportViewerApp(tmp_path)
    async with app.run_test() as pilot:
        await pilot.pause()
        assert app.report is None

        _write_report(tmp_path)
        await pilot.press("r")
        await pilot.pause()

        assert app.query_one("#trials", DataTable).row_count == 3
