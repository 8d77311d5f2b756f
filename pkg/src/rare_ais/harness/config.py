"""Experiment configuration: flat `key = value` files mapped onto dataclasses."""

import json
import math
from dataclasses import dataclass, field, fields, replace
from enum import Enum
from pathlib import Path
from typing import Any

from rare_ais.errors import ArgumentError, ConfigError
from rare_ais.estimators.config import EstimatorConfig, Method, ReplayWeights


ENV_NAMES = ("pendulum-discrete", "pendulum-continuous", "chain")

_TRUE = {"true", "yes", "1", "on"}
_FALSE = {"false", "no", "0", "off"}


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a run needs: method, environment, trials and estimator settings.

    Serialises to one flat mapping; estimator keys sit beside the
    experiment keys.
    """

    method: Method = Method.PG
    env: str = "pendulum-discrete"
    trials: int = 10
    seed: int = 0
    ground_truth_file: str = ""
    workers: int = 1
    gamma_fail: float | None = None
    dynamics_form: str = "standard"
    continuous_std_convention: str = "std"
    chain_threshold: int = 8
    estimator: EstimatorConfig = field(default_factory=EstimatorConfig)

    def __post_init__(self) -> None:
        if self.env not in ENV_NAMES:
            raise ConfigError("env", f"unknown env {self.env!r}; expected one of {', '.join(ENV_NAMES)}")
        if self.trials < 1:
            raise ConfigError("trials", "trials must be at least 1")
        if self.workers < 1:
            raise ConfigError("workers", "workers must be at least 1")
        if self.dynamics_form not in ("standard", "verbatim"):
            raise ConfigError("dynamics_form", f"unknown dynamics_form {self.dynamics_form!r}")
        if self.continuous_std_convention not in ("std", "variance"):
            raise ConfigError(
                "continuous_std_convention",
                f"unknown continuous_std_convention {self.continuous_std_convention!r}",
            )

    def trial_seed(self, trial: int) -> int:
        return self.seed + trial

    def estimator_for_trial(self, trial: int) -> EstimatorConfig:
        return replace(self.estimator, seed=self.trial_seed(trial))

    def with_overrides(self, **overrides: Any) -> "ExperimentConfig":
        """Copy with flat keys replaced, experiment or estimator alike."""
        data = self.to_dict()
        data.update(overrides)
        return ExperimentConfig.from_dict(data)

    def to_dict(self) -> dict[str, Any]:
        """Serialize to one flat dictionary."""
        data: dict[str, Any] = {}
        for f in fields(self):
            if f.name == "estimator":
                continue
            value = getattr(self, f.name)
            data[f.name] = value.value if isinstance(value, Enum) else value
        data.update(self.estimator.to_dict())
        data.pop("seed", None)
        data["seed"] = self.seed
        return data

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ExperimentConfig":
        """Deserialize from a flat dictionary, coercing text values.

        Raises:
            ConfigError: a key is unknown or its value cannot be coerced.
        """
        experiment_defaults = {f.name: f.default for f in fields(cls) if f.name != "estimator"}
        estimator_defaults = EstimatorConfig()
        estimator_keys = {f.name for f in fields(EstimatorConfig)}
        top: dict[str, Any] = {}
        est: dict[str, Any] = {}
        for key, value in data.items():
            if key in experiment_defaults:
                top[key] = _coerce(key, value, experiment_defaults[key])
            elif key in estimator_keys:
                est[key] = _coerce(key, value, getattr(estimator_defaults, key))
            else:
                raise ConfigError(key)
        est.pop("seed", None)
        try:
            estimator = EstimatorConfig(**est)
        except ArgumentError as exc:
            raise ConfigError(_first_key(est), str(exc)) from exc
        return cls(**top, estimator=estimator)


def _first_key(values: dict[str, Any]) -> str:
    return next(iter(values), "estimator")


def _coerce(key: str, value: Any, default: Any) -> Any:
    """Convert `value` to the type of the field's default."""
    try:
        if isinstance(default, Enum):
            return type(default)(value.value if isinstance(value, Enum) else str(value).strip().lower())
        if isinstance(default, bool):
            if isinstance(value, bool):
                return value
            text = str(value).strip().lower()
            if text in _TRUE:
                return True
            if text in _FALSE:
                return False
            raise ValueError(value)
        if isinstance(default, tuple):
            if isinstance(value, str):
                value = value.replace(",", " ").split()
            return tuple(int(v) for v in value)
        if isinstance(default, int):
            if isinstance(value, str):
                number = float(value)
                if not number.is_integer():
                    raise ValueError(value)
                return int(number)
            return int(value)
        if default is None or isinstance(default, float):
            if value is None or (isinstance(value, str) and value.strip().lower() in ("", "none")):
                return None
            return _float(value)
        return str(value).strip()
    except (TypeError, ValueError) as exc:
        raise ConfigError(key, f"invalid value for {key}: {value!r}") from exc


def _float(value: Any) -> float:
    """Floats, also accepting `pi/4`-style fractions of pi."""
    if isinstance(value, str):
        text = value.strip().lower().replace(" ", "")
        if text.startswith("pi"):
            rest = text[2:]
            return math.pi / float(rest[1:]) if rest.startswith("/") else math.pi * float(rest or 1)
    return float(value)


def parse_config_text(text: str) -> dict[str, str]:
    """Flat `key = value` lines; `#` starts a comment."""
    data: dict[str, str] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(line, f"line {number}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        data[key] = value
    return data


def load_config(path: Path | str) -> ExperimentConfig:
    """Read a `.cfg` (key = value) or `.json` (flat object) configuration file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc}") from exc
    if path.suffix == ".json":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError("config", f"{path} is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config", f"{path} must hold a flat JSON object")
    else:
        data = parse_config_text(text)
    return ExperimentConfig.from_dict(data)


__all__ = ["ENV_NAMES", "ExperimentConfig", "Method", "ReplayWeights", "load_config", "parse_config_text"]
