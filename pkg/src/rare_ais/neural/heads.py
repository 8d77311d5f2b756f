"""Policy heads mapping raw network outputs to action distributions.

Both heads keep full support: the categorical head mixes a uniform floor
into its softmax and the Gaussian head clamps its log-std.
"""

from dataclasses import dataclass

import numpy as np

from rare_ais.core.distributions import (
    categorical_logprob,
    check_indices,
    gaussian_logprob,
    sample_categorical,
)
from rare_ais.errors import ArgumentError


LOG_STD_MIN = -5.0
LOG_STD_MAX = 2.0


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


@dataclass(frozen=True)
class CategoricalHead:
    """One logit per support action, probabilities (1 - f) softmax + f / K."""

    n_actions: int
    floor: float = 1e-3

    @property
    def output_dim(self) -> int:
        return self.n_actions

    def probs(self, logits: np.ndarray) -> np.ndarray:
        return (1.0 - self.floor) * softmax(np.atleast_2d(logits)) + self.floor / self.n_actions

    def log_prob(self, logits: np.ndarray, actions: np.ndarray) -> np.ndarray:
        return categorical_logprob(self.probs(logits), actions)

    def log_prob_grad(self, logits: np.ndarray, actions: np.ndarray, coefs: np.ndarray) -> np.ndarray:
        """d/dlogits of sum_i coefs_i log p(a_i)."""
        logits = np.atleast_2d(logits)
        idx = check_indices(actions, self.n_actions)
        s = softmax(logits)
        rows = np.arange(len(idx))
        p_a = (1.0 - self.floor) * s[rows, idx] + self.floor / self.n_actions
        onehot = np.zeros_like(s)
        onehot[rows, idx] = 1.0
        scale = np.asarray(coefs, dtype=np.float64) * (1.0 - self.floor) * s[rows, idx] / p_a
        return scale[:, None] * (onehot - s)

    def sample(self, logits: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        logits = np.atleast_2d(logits)
        return sample_categorical(self.probs(logits), rng.random(len(logits)))

    def bias_for(self, probs: np.ndarray) -> np.ndarray:
        """Logits whose floored probabilities equal `probs`."""
        probs = np.asarray(probs, dtype=np.float64)
        inner = (probs - self.floor / self.n_actions) / (1.0 - self.floor)
        if np.any(inner <= 0.0):
            raise ArgumentError("target probabilities fall below the head's floor")
        logits = np.log(inner)
        return logits - logits.mean()


@dataclass(frozen=True)
class GaussianHead:
    """Diagonal Gaussian: the first `dim` outputs are the mean, the rest the log-std."""

    dim: int = 1

    @property
    def output_dim(self) -> int:
        return 2 * self.dim

    def _split(self, outputs: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        outputs = np.atleast_2d(outputs)
        mean = outputs[:, : self.dim]
        raw = outputs[:, self.dim :]
        log_std = np.clip(raw, LOG_STD_MIN, LOG_STD_MAX)
        active = (raw > LOG_STD_MIN) & (raw < LOG_STD_MAX)
        return mean, log_std, active

    def mean_std(self, outputs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        mean, log_std, _ = self._split(outputs)
        return mean, np.exp(log_std)

    def log_prob(self, outputs: np.ndarray, actions: np.ndarray) -> np.ndarray:
        mean, std = self.mean_std(outputs)
        return gaussian_logprob(mean, std, np.asarray(actions).reshape(mean.shape))

    def log_prob_grad(self, outputs: np.ndarray, actions: np.ndarray, coefs: np.ndarray) -> np.ndarray:
        """d/doutputs of sum_i coefs_i log q(a_i)."""
        mean, log_std, active = self._split(outputs)
        std = np.exp(log_std)
        z = (np.asarray(actions).reshape(mean.shape) - mean) / std
        c = np.asarray(coefs, dtype=np.float64)[:, None]
        return np.concatenate([c * z / std, c * (z * z - 1.0) * active], axis=1)

    def sample(self, outputs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        outputs = np.atleast_2d(outputs)
        return self.rsample(outputs, rng.standard_normal((len(outputs), self.dim)))

    def rsample(self, outputs: np.ndarray, noise: np.ndarray) -> np.ndarray:
        """mean + std * noise."""
        mean, std = self.mean_std(outputs)
        return mean + std * noise

    def rsample_grad(self, outputs: np.ndarray, noise: np.ndarray, grad_action: np.ndarray) -> np.ndarray:
        """Chain dLoss/daction through a = mean + std * noise back to the outputs."""
        _, log_std, active = self._split(outputs)
        std = np.exp(log_std)
        return np.concatenate([grad_action, grad_action * std * noise * active], axis=1)

    def bias_for(self, mean: np.ndarray, std: np.ndarray) -> np.ndarray:
        mean = np.broadcast_to(np.asarray(mean, dtype=np.float64), (self.dim,))
        std = np.broadcast_to(np.asarray(std, dtype=np.float64), (self.dim,))
        return np.concatenate([mean, np.log(std)])


def head_sample(head, outputs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    return head.sample(outputs, rng)


def head_logprob(head, outputs: np.ndarray, actions: np.ndarray) -> np.ndarray:
    return head.log_prob(outputs, actions)


def head_rsample(head: GaussianHead, outputs: np.ndarray, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Reparameterised sample and the noise that produced it."""
    outputs = np.atleast_2d(outputs)
    noise = rng.standard_normal((len(outputs), head.dim))
    return head.rsample(outputs, noise), noise
