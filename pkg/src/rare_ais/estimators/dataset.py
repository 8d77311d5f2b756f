"""The accumulated dataset D of (return, weight) pairs and the estimators over it."""

import math
from dataclasses import asdict, dataclass, field
from typing import Any, Sequence

import numpy as np

from rare_ais.core.mdp import SampleRecord, TrajectoryBatch
from rare_ais.errors import ArgumentError, WeightOverflowError


class SampleSet:
    """Append-only columnar store of sample records.

    Holds returns and log weights as growing arrays so the running
    estimate can be read after every iteration without building records.
    """

    def __init__(self) -> None:
        self._returns: list[np.ndarray] = []
        self._log_weights: list[np.ndarray] = []
        self._proposal_index: list[np.ndarray] = []

    def __len__(self) -> int:
        return sum(len(r) for r in self._returns)

    def extend(self, returns: np.ndarray, log_weights: np.ndarray, proposal_index: np.ndarray) -> None:
        """Append a batch.

        Raises:
            WeightOverflowError: some weight overflows when exponentiated.
        """
        log_weights = np.asarray(log_weights, dtype=np.float64)
        with np.errstate(over="ignore"):
            finite = np.isfinite(np.exp(log_weights))
        if not np.all(finite):
            raise WeightOverflowError(float(log_weights[~finite][0]))
        self._returns.append(np.asarray(returns, dtype=np.float64))
        self._log_weights.append(log_weights)
        self._proposal_index.append(np.asarray(proposal_index, dtype=np.int64))

    def extend_batch(self, batch: TrajectoryBatch, log_weights: np.ndarray) -> None:
        self.extend(batch.returns, log_weights, batch.proposal_index)

    @property
    def returns(self) -> np.ndarray:
        return np.concatenate(self._returns) if self._returns else np.zeros(0)

    @property
    def weights(self) -> np.ndarray:
        return np.exp(np.concatenate(self._log_weights)) if self._log_weights else np.zeros(0)

    def records(self) -> list[SampleRecord]:
        log_w = np.concatenate(self._log_weights) if self._log_weights else np.zeros(0)
        idx = np.concatenate(self._proposal_index) if self._proposal_index else np.zeros(0, dtype=np.int64)
        return [
            SampleRecord(ret=float(r), log_weight=float(w), proposal_index=int(i))
            for r, w, i in zip(self.returns, log_w, idx)
        ]


Records = Sequence[SampleRecord] | SampleSet


def _columns(records: Records) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(records, SampleSet):
        returns, weights = records.returns, records.weights
    else:
        returns = np.array([r.ret for r in records], dtype=np.float64)
        weights = np.array([r.weight for r in records], dtype=np.float64)
    if len(returns) == 0:
        raise ArgumentError("cannot estimate from an empty record set")
    return returns, weights


def mc_estimate(records: Records, gamma: float) -> float:
    """Fraction of returns strictly above gamma."""
    returns, _ = _columns(records)
    return float(np.count_nonzero(returns > gamma)) / len(returns)


def is_estimate(records: Records, gamma: float) -> float:
    """Weighted failure mean (1/N) sum_i w_i 1{R_i > gamma} over every record."""
    returns, weights = _columns(records)
    return float(np.sum(np.where(returns > gamma, weights, 0.0))) / len(returns)


def standard_error(records: Records, gamma: float) -> float:
    """Standard error of `is_estimate`."""
    returns, weights = _columns(records)
    if len(returns) < 2:
        return 0.0
    values = np.where(returns > gamma, weights, 0.0)
    return float(np.std(values, ddof=1)) / math.sqrt(len(values))


def adaptive_threshold(returns: np.ndarray, rho: float, gamma: float) -> float:
    """Descending rho-quantile of the batch returns, capped above at gamma."""
    returns = np.asarray(returns, dtype=np.float64)
    if len(returns) == 0:
        raise ArgumentError("adaptive threshold needs at least one return")
    if not 0.0 < rho <= 1.0:
        raise ArgumentError(f"rho must lie in (0, 1], got {rho}")
    ordered = np.sort(returns)[::-1]
    index = max(math.ceil(rho * len(ordered) - 1e-12) - 1, 0)
    return min(gamma, float(ordered[index]))


@dataclass(frozen=True)
class CurvePoint:
    samples_used: int
    mu_hat: float
    std_err: float


def convergence_curve(records: Records, gamma: float, interval: int) -> list[CurvePoint]:
    """Running estimate and standard error every `interval` samples, plus the final sample."""
    returns, weights = _columns(records)
    values = np.where(returns > gamma, weights, 0.0)
    n = np.arange(1, len(values) + 1, dtype=np.float64)
    total = np.cumsum(values)
    total_sq = np.cumsum(values * values)
    mean = total / n
    with np.errstate(invalid="ignore", divide="ignore"):
        var = np.where(n > 1, (total_sq - n * mean * mean) / (n - 1), 0.0)
    err = np.sqrt(np.maximum(var, 0.0) / n)
    marks = list(range(interval, len(values) + 1, interval))
    if not marks or marks[-1] != len(values):
        marks.append(len(values))
    return [CurvePoint(m, float(mean[m - 1]), float(err[m - 1])) for m in marks]


@dataclass(frozen=True)
class IterationDiagnostics:
    """What one adaptive iteration looked like."""

    iteration: int
    samples_used: int
    gamma_k: float
    elite_count: int
    mu_hat_running: float


@dataclass
class EstimateResult:
    """Final estimate plus everything recorded along the way."""

    mu_hat: float
    std_err: float
    n_samples: int
    iterations: list[IterationDiagnostics] = field(default_factory=list)
    curve: list[CurvePoint] = field(default_factory=list)
    member_mean_actions: list[float] = field(default_factory=list)
    skipped_updates: int = 0

    def to_dict(self) -> dict[str, Any]:
        """Serialize to dictionary."""
        return {
            "mu_hat": self.mu_hat,
            "std_err": self.std_err,
            "n_samples": self.n_samples,
            "iterations": [asdict(d) for d in self.iterations],
            "curve": [asdict(p) for p in self.curve],
            "member_mean_actions": list(self.member_mean_actions),
            "skipped_updates": self.skipped_updates,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "EstimateResult":
        """Deserialize from dictionary."""
        return cls(
            mu_hat=data["mu_hat"],
            std_err=data["std_err"],
            n_samples=data["n_samples"],
            iterations=[IterationDiagnostics(**d) for d in data.get("iterations", [])],
            curve=[CurvePoint(**p) for p in data.get("curve", [])],
            member_mean_actions=data.get("member_mean_actions", []),
            skipped_updates=data.get("skipped_updates", 0),
        )
