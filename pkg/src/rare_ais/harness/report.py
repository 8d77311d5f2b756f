"""Result types written by the experiment harness.

Every type round-trips through `to_dict` / `from_dict` so reports can be
re-read by the viewer and by later analysis.
"""

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from rare_ais.estimators.dataset import CurvePoint, EstimateResult, IterationDiagnostics


# Report format version for compatibility checking
REPORT_VERSION = "1.0.0"


def relative_errors(mu_hat: float, mu: float) -> tuple[float, float]:
    """Relative absolute deviation |mu_hat - mu| / mu and signed bias (mu_hat - mu) / mu."""
    return abs(mu_hat - mu) / mu, (mu_hat - mu) / mu


def mean_std(values: list[float]) -> tuple[float, float]:
    """Across-trial mean and population standard deviation."""
    if not values:
        return math.nan, math.nan
    array = np.asarray(values, dtype=np.float64)
    return float(array.mean()), float(array.std())


@dataclass
class GroundTruth:
    """A long Monte Carlo run used as the reference failure probability."""

    env: str
    mu: float
    std_err: float
    coefficient_of_variation: float
    n_samples: int
    seed: int
    env_params: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        """Serialize to dictionary."""
        return {
            "env": self.env,
            "mu": self.mu,
            "std_err": self.std_err,
            "coefficient_of_variation": self.coefficient_of_variation,
            "n_samples": self.n_samples,
            "seed": self.seed,
            "env_params": self.env_params,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "GroundTruth":
        """Deserialize from dictionary."""
        return cls(
            env=data["env"],
            mu=data["mu"],
            std_err=data.get("std_err", 0.0),
            coefficient_of_variation=data.get("coefficient_of_variation", math.inf),
            n_samples=data.get("n_samples", 0),
            seed=data.get("seed", 0),
            env_params=data.get("env_params", {}),
        )


@dataclass
class TrialResult:
    """One seeded run of an estimator, scored against the reference mu."""

    trial: int
    seed: int
    mu_hat: float
    eps_abs: float
    eps_rel: float
    estimate: EstimateResult

    @classmethod
    def score(cls, trial: int, seed: int, estimate: EstimateResult, mu: float) -> "TrialResult":
        eps_abs, eps_rel = relative_errors(estimate.mu_hat, mu)
        return cls(trial, seed, estimate.mu_hat, eps_abs, eps_rel, estimate)

    def to_dict(self) -> dict[str, Any]:
        """Serialize to dictionary; curves and iterations go to the CSV files."""
        return {
            "trial": self.trial,
            "seed": self.seed,
            "mu_hat": self.mu_hat,
            "eps_abs": self.eps_abs,
            "eps_rel": self.eps_rel,
            "std_err": self.estimate.std_err,
            "n_samples": self.estimate.n_samples,
            "member_mean_actions": list(self.estimate.member_mean_actions),
            "skipped_updates": self.estimate.skipped_updates,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "TrialResult":
        """Deserialize from dictionary."""
        estimate = EstimateResult(
            mu_hat=data["mu_hat"],
            std_err=data.get("std_err", 0.0),
            n_samples=data.get("n_samples", 0),
            member_mean_actions=data.get("member_mean_actions", []),
            skipped_updates=data.get("skipped_updates", 0),
        )
        return cls(
            trial=data["trial"],
            seed=data["seed"],
            mu_hat=data["mu_hat"],
            eps_abs=data["eps_abs"],
            eps_rel=data["eps_rel"],
            estimate=estimate,
        )


@dataclass
class ExperimentReport:
    """All trials of one configured experiment.

    Wall-clock timings are kept beside the report rather than inside it,
    so identical configs produce identical report files.
    """

    config: dict[str, Any]
    mu_true: float
    trials: list[TrialResult] = field(default_factory=list)
    wall_clock: list[float] = field(default_factory=list)

    @property
    def seeds(self) -> list[int]:
        return [t.seed for t in self.trials]

    def summary(self) -> dict[str, tuple[float, float]]:
        """Mean and standard deviation of mu_hat, eps_abs and eps_rel across trials."""
        return {
            "mu_hat": mean_std([t.mu_hat for t in self.trials]),
            "eps_abs": mean_std([t.eps_abs for t in self.trials]),
            "eps_rel": mean_std([t.eps_rel for t in self.trials]),
        }

    def curve_rows(self) -> list[tuple[int, int, float, float]]:
        return [
            (t.trial, p.samples_used, p.mu_hat, p.std_err)
            for t in self.trials
            for p in t.estimate.curve
        ]

    def iteration_rows(self) -> list[tuple[int, int, int, float, int, float]]:
        return [
            (t.trial, d.iteration, d.samples_used, d.gamma_k, d.elite_count, d.mu_hat_running)
            for t in self.trials
            for d in t.estimate.iterations
        ]

    def timing_dict(self) -> dict[str, Any]:
        return {
            "wall_clock": list(self.wall_clock),
            "total": float(sum(self.wall_clock)),
        }

    def to_dict(self) -> dict[str, Any]:
        """Serialize to dictionary."""
        summary = self.summary()
        return {
            "report_version": REPORT_VERSION,
            "config": self.config,
            "mu_true": self.mu_true,
            "seeds": self.seeds,
            "trials": [t.to_dict() for t in self.trials],
            "summary": {
                key: {"mean": mean, "std": std} for key, (mean, std) in summary.items()
            },
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ExperimentReport":
        """Deserialize from dictionary."""
        return cls(
            config=data.get("config", {}),
            mu_true=data["mu_true"],
            trials=[TrialResult.from_dict(t) for t in data.get("trials", [])],
        )


def attach_series(
    report: ExperimentReport,
    curve_rows: list[dict[str, str]],
    iteration_rows: list[dict[str, str]],
) -> ExperimentReport:
    """Restore per-trial curves and iteration diagnostics read back from CSV."""
    by_trial = {t.trial: t.estimate for t in report.trials}
    for row in curve_rows:
        estimate = by_trial.get(int(row["trial"]))
        if estimate is not None:
            estimate.curve.append(
                CurvePoint(int(row["samples_used"]), float(row["mu_hat"]), float(row["std_err"]))
            )
    for row in iteration_rows:
        estimate = by_trial.get(int(row["trial"]))
        if estimate is not None:
            estimate.iterations.append(
                IterationDiagnostics(
                    iteration=int(row["iteration"]),
                    samples_used=int(row["samples_used"]),
                    gamma_k=float(row["gamma_k"]),
                    elite_count=int(row["elite_count"]),
                    mu_hat_running=float(row["mu_hat_running"]),
                )
            )
    return report


@dataclass
class AblationTable:
    """Paired configurations compared on the same trials and seeds."""

    suite: str
    labels: tuple[str, str]
    reports: tuple[ExperimentReport, ExperimentReport]

    def rows(self) -> list[tuple[str, float, float, float, float]]:
        """(label, mean eps_abs, std eps_abs, mean eps_rel, std eps_rel) per side."""
        rows = []
        for label, report in zip(self.labels, self.reports):
            summary = report.summary()
            rows.append((label, *summary["eps_abs"], *summary["eps_rel"]))
        return rows

    def to_dict(self) -> dict[str, Any]:
        """Serialize to dictionary."""
        return {
            "report_version": REPORT_VERSION,
            "suite": self.suite,
            "columns": list(self.labels),
            "rows": [
                {
                    "label": label,
                    "eps_abs_mean": abs_mean,
                    "eps_abs_std": abs_std,
                    "eps_rel_mean": rel_mean,
                    "eps_rel_std": rel_std,
                }
                for label, abs_mean, abs_std, rel_mean, rel_std in self.rows()
            ],
        }

    def to_text(self) -> str:
        """Metrics as rows, variants as columns, mean ± std in each cell."""
        rows = self.rows()
        cells = {
            "Average absolute deviation": [f"{r[1]:.2f} ± {r[2]:.2f}" for r in rows],
            "Empirical bias": [f"{r[3]:.2f} ± {r[4]:.2f}" for r in rows],
        }
        first = max(len(name) for name in cells)
        widths = [max(len(label), *(len(v[i]) for v in cells.values())) for i, label in enumerate(self.labels)]
        lines = [
            f"Effect of {self.suite}",
            "  ".join([" " * first, *(label.rjust(w) for label, w in zip(self.labels, widths))]),
        ]
        for name, values in cells.items():
            lines.append("  ".join([name.ljust(first), *(v.rjust(w) for v, w in zip(values, widths))]))
        return "\n".join(lines) + "\n"


@dataclass
class CalibrationCandidate:
    gamma_fail: float
    mu_hat: float
    std_err: float
    passes: bool

    def to_dict(self) -> dict[str, Any]:
        return {
            "gamma_fail": self.gamma_fail,
            "mu_hat": self.mu_hat,
            "std_err": self.std_err,
            "passes": self.passes,
        }


@dataclass
class CalibrationResult:
    """Failure-angle candidates scored against a published failure rate."""

    env: str
    target: float
    n_samples: int
    seed: int
    candidates: list[CalibrationCandidate] = field(default_factory=list)
    chosen: float | None = None
    quantile: float | None = None   # empirical (1 - target) quantile of the return

    def to_dict(self) -> dict[str, Any]:
        """Serialize to dictionary."""
        return {
            "env": self.env,
            "target": self.target,
            "n_samples": self.n_samples,
            "seed": self.seed,
            "candidates": [c.to_dict() for c in self.candidates],
            "chosen": self.chosen,
            "quantile": self.quantile,
        }
