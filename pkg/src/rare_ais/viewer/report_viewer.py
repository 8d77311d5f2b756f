"""Terminal viewer for an experiment output directory."""

from pathlib import Path

from textual.app import App, ComposeResult
from textual.binding import Binding
from textual.containers import Vertical
from textual.widgets import DataTable, Footer, Header, Label

from rare_ais.harness.report import ExperimentReport
from rare_ais.harness.store import ResultStore


COLUMNS = ("trial", "seed", "mu_hat", "eps_abs", "eps_rel", "samples", "wall-clock (s)")


class ReportViewerApp(App):
    """Per-trial table and across-trial summary of one report.json."""

    CSS = """
    #summary {
        height: auto;
        padding: 1;
        border: solid $primary;
    }

    #trials {
        height: 1fr;
    }
    """

    BINDINGS = [
        Binding("r", "reload", "Reload", show=True),
        Binding("q", "quit", "Quit", show=True),
    ]

    def __init__(self, out_dir: Path | str):
        super().__init__()
        self.store = ResultStore(out_dir)
        self.report: ExperimentReport | None = None

    def compose(self) -> ComposeResult:
        yield Header()
        with Vertical():
            yield Label("loading...", id="summary")
            yield DataTable(id="trials", zebra_stripes=True)
        yield Footer()

    async def on_mount(self) -> None:
        self.title = "rare-ais report"
        self.sub_title = str(self.store.out_dir)
        table = self.query_one("#trials", DataTable)
        table.add_columns(*COLUMNS)
        await self.load_report()

    async def load_report(self) -> None:
        """Read the report with its timings and refill the table."""
        self.report = await self.store.read_report()
        summary = self.query_one("#summary", Label)
        table = self.query_one("#trials", DataTable)
        table.clear()
        if self.report is None:
            summary.update(f"No report found in {self.store.out_dir}")
            return

        wall_clock = self.report.wall_clock
        for i, trial in enumerate(self.report.trials):
            elapsed = f"{wall_clock[i]:.1f}" if i < len(wall_clock) else "-"
            table.add_row(
                str(trial.trial),
                str(trial.seed),
                f"{trial.mu_hat:.4g}",
                f"{trial.eps_abs:.3f}",
                f"{trial.eps_rel:+.3f}",
                str(trial.estimate.n_samples),
                elapsed,
            )
        summary.update(self.summary_text())

    def summary_text(self) -> str:
        if self.report is None:
            return ""
        stats = self.report.summary()
        config = self.report.config
        return (
            f"{config.get('method', '?')} on {config.get('env', '?')}, "
            f"{len(self.report.trials)} trials, mu = {self.report.mu_true:.4g}\n"
            f"eps_abs {stats['eps_abs'][0]:.2f} ± {stats['eps_abs'][1]:.2f}   "
            f"eps_rel {stats['eps_rel'][0]:+.2f} ± {stats['eps_rel'][1]:.2f}"
        )

    async def action_reload(self) -> None:
        await self.load_report()
        self.notify("Report reloaded")
