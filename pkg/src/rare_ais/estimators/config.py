"""Estimator hyperparameters."""

from dataclasses import dataclass, fields
from enum import Enum
from typing import Any

from rare_ais.errors import ArgumentError


class Method(Enum):
    """Estimation algorithm."""

    MC = "mc"
    CEM = "cem"
    PG = "pg"
    VB = "vb"


class ReplayWeights(Enum):
    """Whether replayed partial weights are recomputed or kept from insertion."""

    CURRENT = "current"
    FROZEN = "frozen"


# Samples between updates when the config leaves n_per_iter unset.
DEFAULT_SAMPLES_PER_ITER = {
    Method.MC: 200,
    Method.CEM: 200,
    Method.PG: 200,
    Method.VB: 20,
}


@dataclass(frozen=True)
class EstimatorConfig:
    """Settings shared by every adaptive estimator.

    `gamma = None` means the environment's own failure threshold.
    `n_per_iter = 0` means the method's default batch size.
    """

    gamma: float | None = None
    rho: float = 0.1
    n_per_iter: int = 0
    n_total: int = 50_000
    n_members: int = 1
    defensive: bool = False
    baseline: bool = False
    pretrain: bool = True
    pretrain_epochs: int = 100
    pretrain_points: int = 10_000
    pretrain_value_target: float = 0.1
    hidden: tuple[int, ...] = (32, 32)
    learning_rate: float = 3e-4
    grad_clip: float = 1.0
    batch_size: int = 1024
    replay_capacity: int = 64_000
    replay_weights: ReplayWeights = ReplayWeights.CURRENT
    shared_replay: bool = True
    target_interval: int = 10
    reparam_samples: int = 4
    quadrature_nodes: int = 16
    prob_floor: float = 1e-3
    value_floor: float = 1e-12
    curve_interval: int = 200
    freeze_nominal: bool = False
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 < self.rho <= 1.0:
            raise ArgumentError(f"rho must lie in (0, 1], got {self.rho}")
        if self.n_total < 1:
            raise ArgumentError("n_total must be positive")
        if self.n_per_iter < 0 or self.n_per_iter > self.n_total:
            raise ArgumentError(f"n_per_iter {self.n_per_iter} must lie in 0..n_total")
        if self.n_members < 1:
            raise ArgumentError("n_members must be at least 1")
        if self.curve_interval < 1:
            raise ArgumentError("curve_interval must be positive")
        if self.target_interval < 1 or self.reparam_samples < 1 or self.quadrature_nodes < 1:
            raise ArgumentError("target_interval, reparam_samples and quadrature_nodes must be positive")

    def samples_per_iter(self, method: Method) -> int:
        n = self.n_per_iter or DEFAULT_SAMPLES_PER_ITER[method]
        return min(n, self.n_total)

    def to_dict(self) -> dict[str, Any]:
        """Serialize to dictionary."""
        data = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, Enum):
                value = value.value
            elif isinstance(value, tuple):
                value = list(value)
            data[f.name] = value
        return data

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "EstimatorConfig":
        """Deserialize from dictionary, ignoring keys that are not estimator settings."""
        known = {f.name for f in fields(cls)}
        kwargs = {k: v for k, v in data.items() if k in known}
        if "hidden" in kwargs:
            kwargs["hidden"] = tuple(int(w) for w in kwargs["hidden"])
        if "replay_weights" in kwargs:
            kwargs["replay_weights"] = ReplayWeights(kwargs["replay_weights"])
        return cls(**kwargs)
