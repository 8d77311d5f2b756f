"""Trainable policy, baseline and Q networks.

Each network owns an `Mlp` and its `AdamState`. Losses are exposed as
`(loss, flat gradient)` pairs evaluated at optional explicit parameters so
they can be checked against finite differences.
"""

import logging
import warnings

import numpy as np

from rare_ais.core.mdp import ActionKind, AdversarialMdp, DiscretePolicy, GaussianPolicy
from rare_ais.errors import NonFiniteLossError, NumericalWarning
from rare_ais.neural.heads import CategoricalHead, GaussianHead
from rare_ais.neural.mlp import LossFn, Mlp, param_grad
from rare_ais.neural.optim import AdamState, adam_step


logger = logging.getLogger(__name__)

DEFAULT_HIDDEN = (32, 32)
POLICY_OUTPUT_SCALE = 0.01


def warn_skipped(name: str, reason: str) -> None:
    """Report a skipped update through both warnings and the log."""
    message = f"{name}: update skipped ({reason})"
    warnings.warn(message, NumericalWarning, stacklevel=3)
    logger.warning(message)


class TrainableMlp:
    """An `Mlp` paired with the Adam state that updates it."""

    def __init__(self, mlp: Mlp, optimizer: AdamState):
        self.mlp = mlp
        self.optimizer = optimizer

    @property
    def label(self) -> str:
        return type(self).__name__

    def apply_gradient(self, grad: np.ndarray) -> bool:
        """One Adam step; non-finite gradients are skipped with a warning."""
        if not np.all(np.isfinite(grad)):
            warn_skipped(self.label, "non-finite gradient")
            return False
        self.mlp.params, self.optimizer = adam_step(self.optimizer, self.mlp.params, grad)
        return True

    def fit(self, inputs: np.ndarray, loss_fn: LossFn) -> float | None:
        """Differentiate `loss_fn` at the current parameters and step once."""
        try:
            loss, grad = param_grad(self.mlp, inputs, loss_fn)
        except NonFiniteLossError as exc:
            warn_skipped(self.label, str(exc))
            return None
        if not self.apply_gradient(grad):
            return None
        return loss

    def _clone_into(self, other: "TrainableMlp") -> "TrainableMlp":
        other.mlp = self.mlp.copy()
        other.optimizer = self.optimizer
        return other


def _score_loss_fn(head, actions: np.ndarray, coefs: np.ndarray, normalizer: float) -> LossFn:
    """-(1 / normalizer) sum_i coefs_i log q(a_i | s_i)."""

    def loss_fn(out: np.ndarray) -> tuple[float, np.ndarray]:
        logp = head.log_prob(out, actions)
        loss = -float(np.sum(coefs * logp)) / normalizer
        return loss, -head.log_prob_grad(out, actions, coefs) / normalizer

    return loss_fn


class NeuralCategoricalPolicy(TrainableMlp, DiscretePolicy):
    """State-dependent categorical proposal over support indices."""

    def __init__(self, mlp: Mlp, head: CategoricalHead, optimizer: AdamState):
        super().__init__(mlp, optimizer)
        self.head = head

    @classmethod
    def create(
        cls,
        env: AdversarialMdp,
        rng: np.random.Generator,
        hidden: tuple[int, ...] = DEFAULT_HIDDEN,
        lr: float = 3e-4,
        max_grad_norm: float = 1.0,
        floor: float = 1e-3,
    ) -> "NeuralCategoricalPolicy":
        """Network whose initial output reproduces the nominal probabilities."""
        head = CategoricalHead(env.action_space.size, floor)
        widths = (env.feature_dim, *hidden, head.output_dim)
        mlp = Mlp.initialize(widths, rng, output_scale=POLICY_OUTPUT_SCALE)
        nominal = env.nominal_probs(env.initial_states(1))[0]
        mlp.set_output_bias(head.bias_for(nominal))
        return cls(mlp, head, AdamState.create(mlp.n_params, lr, max_grad_norm))

    def probs(self, env, states):
        return self.head.probs(self.mlp.predict(env.features(states)))

    def score_loss(self, features, actions, coefs, normalizer, params=None):
        return param_grad(self.mlp, features, _score_loss_fn(self.head, actions, coefs, normalizer), params)

    def update(self, features, actions, coefs, normalizer) -> float | None:
        return self.fit(features, _score_loss_fn(self.head, actions, coefs, normalizer))

    def copy(self) -> "NeuralCategoricalPolicy":
        return self._clone_into(NeuralCategoricalPolicy(self.mlp, self.head, self.optimizer))


class NeuralGaussianPolicy(TrainableMlp, GaussianPolicy):
    """State-dependent diagonal Gaussian proposal."""

    def __init__(self, mlp: Mlp, head: GaussianHead, optimizer: AdamState):
        super().__init__(mlp, optimizer)
        self.head = head

    @classmethod
    def create(
        cls,
        env: AdversarialMdp,
        rng: np.random.Generator,
        hidden: tuple[int, ...] = DEFAULT_HIDDEN,
        lr: float = 3e-4,
        max_grad_norm: float = 1.0,
    ) -> "NeuralGaussianPolicy":
        """Network whose initial mean and std match the nominal disturbance."""
        head = GaussianHead(env.action_space.size)
        widths = (env.feature_dim, *hidden, head.output_dim)
        mlp = Mlp.initialize(widths, rng, output_scale=POLICY_OUTPUT_SCALE)
        mean, std = env.nominal_mean_std(env.initial_states(1))
        mlp.set_output_bias(head.bias_for(mean[0], std[0]))
        return cls(mlp, head, AdamState.create(mlp.n_params, lr, max_grad_norm))

    def mean_std(self, env, states):
        return self.head.mean_std(self.mlp.predict(env.features(states)))

    def rsample(self, env, states, noise):
        return self.head.rsample(self.mlp.predict(env.features(states)), noise)

    def score_loss(self, features, actions, coefs, normalizer, params=None):
        return param_grad(self.mlp, features, _score_loss_fn(self.head, actions, coefs, normalizer), params)

    def update(self, features, actions, coefs, normalizer) -> float | None:
        return self.fit(features, _score_loss_fn(self.head, actions, coefs, normalizer))

    def copy(self) -> "NeuralGaussianPolicy":
        return self._clone_into(NeuralGaussianPolicy(self.mlp, self.head, self.optimizer))


def create_policy(env: AdversarialMdp, rng: np.random.Generator, **kwargs):
    """Neural proposal matching the environment's action kind."""
    if env.action_space.kind is ActionKind.DISCRETE:
        return NeuralCategoricalPolicy.create(env, rng, **kwargs)
    kwargs.pop("floor", None)
    return NeuralGaussianPolicy.create(env, rng, **kwargs)


def _regression_loss_fn(targets, weights, normalizer, column=None) -> LossFn:
    """(1 / normalizer) sum_i w_i (f_i - y_i)^2 over one output column per row."""

    def loss_fn(out: np.ndarray) -> tuple[float, np.ndarray]:
        rows = np.arange(len(out))
        cols = np.zeros(len(out), dtype=np.int64) if column is None else column
        resid = out[rows, cols] - targets
        loss = float(np.sum(weights * resid * resid)) / normalizer
        grad = np.zeros_like(out)
        grad[rows, cols] = 2.0 * weights * resid / normalizer
        return loss, grad

    return loss_fn


class ValueNetwork(TrainableMlp):
    """Scalar state function b(s), used as the policy-gradient baseline."""

    @classmethod
    def create(
        cls,
        env: AdversarialMdp,
        rng: np.random.Generator,
        hidden: tuple[int, ...] = DEFAULT_HIDDEN,
        lr: float = 3e-4,
        max_grad_norm: float = 1.0,
        init_value: float = 0.1,
    ) -> "ValueNetwork":
        mlp = Mlp.initialize((env.feature_dim, *hidden, 1), rng, output_scale=POLICY_OUTPUT_SCALE)
        mlp.set_output_bias(np.array([init_value]))
        return cls(mlp, AdamState.create(mlp.n_params, lr, max_grad_norm))

    def value(self, env, states) -> np.ndarray:
        return self.mlp.predict(env.features(states))[:, 0]

    def regression_loss(self, features, targets, weights, normalizer, params=None):
        return param_grad(self.mlp, features, _regression_loss_fn(targets, weights, normalizer), params)

    def update(self, features, targets, weights, normalizer) -> float | None:
        return self.fit(features, _regression_loss_fn(targets, weights, normalizer))

    def copy(self) -> "ValueNetwork":
        return self._clone_into(ValueNetwork(self.mlp, self.optimizer))


class QNetwork(TrainableMlp):
    """Action value Q(s, a).

    Discrete environments get one output per support action; continuous
    environments take the action as extra input columns and emit one value.
    """

    def __init__(self, mlp: Mlp, optimizer: AdamState, kind: ActionKind):
        super().__init__(mlp, optimizer)
        self.kind = kind

    @classmethod
    def create(
        cls,
        env: AdversarialMdp,
        rng: np.random.Generator,
        hidden: tuple[int, ...] = DEFAULT_HIDDEN,
        lr: float = 3e-4,
        max_grad_norm: float = 1.0,
        init_value: float = 0.1,
    ) -> "QNetwork":
        kind = env.action_space.kind
        if kind is ActionKind.DISCRETE:
            widths = (env.feature_dim, *hidden, env.action_space.size)
        else:
            widths = (env.feature_dim + env.action_space.size, *hidden, 1)
        mlp = Mlp.initialize(widths, rng, output_scale=POLICY_OUTPUT_SCALE)
        mlp.set_output_bias(np.full(widths[-1], init_value))
        return cls(mlp, AdamState.create(mlp.n_params, lr, max_grad_norm), kind)

    def inputs(self, env, states, actions=None) -> np.ndarray:
        features = env.features(states)
        if self.kind is ActionKind.DISCRETE:
            return features
        return np.hstack([features, np.asarray(actions, dtype=np.float64).reshape(len(features), -1)])

    def _column(self, actions) -> np.ndarray | None:
        if self.kind is ActionKind.DISCRETE:
            return np.asarray(actions, dtype=np.int64)
        return None

    def values(self, env, states) -> np.ndarray:
        """(N, K) Q values for every support action; discrete only."""
        return self.mlp.predict(self.inputs(env, states))

    def action_values(self, env, states, actions) -> np.ndarray:
        out = self.mlp.predict(self.inputs(env, states, actions))
        if self.kind is ActionKind.DISCRETE:
            return out[np.arange(len(out)), np.asarray(actions, dtype=np.int64)]
        return out[:, 0]

    def regression_loss(self, inputs, actions, targets, weights, normalizer, params=None):
        loss_fn = _regression_loss_fn(targets, weights, normalizer, self._column(actions))
        return param_grad(self.mlp, inputs, loss_fn, params)

    def update(self, inputs, actions, targets, weights, normalizer) -> float | None:
        return self.fit(inputs, _regression_loss_fn(targets, weights, normalizer, self._column(actions)))

    def copy(self) -> "QNetwork":
        return self._clone_into(QNetwork(self.mlp, self.optimizer, self.kind))
