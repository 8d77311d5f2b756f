"""Feed-forward network with ReLU hidden layers and reverse-mode gradients.

Parameters live in one flat float64 array. Layer i contributes a
(widths[i], widths[i+1]) weight block, stored row-major, followed by its
bias vector.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from rare_ais.errors import ArgumentError, NonFiniteLossError


LossFn = Callable[[np.ndarray], tuple[float, np.ndarray]]


def param_count(widths: tuple[int, ...]) -> int:
    return sum(a * b + b for a, b in zip(widths[:-1], widths[1:]))


def _layers(widths: tuple[int, ...]) -> list[tuple[slice, tuple[int, int], slice]]:
    layers = []
    offset = 0
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        w = slice(offset, offset + fan_in * fan_out)
        offset += fan_in * fan_out
        b = slice(offset, offset + fan_out)
        offset += fan_out
        layers.append((w, (fan_in, fan_out), b))
    return layers


@dataclass
class Mlp:
    """Multilayer perceptron `widths[0] -> ... -> widths[-1]`."""

    widths: tuple[int, ...]
    params: np.ndarray

    def __post_init__(self) -> None:
        self.widths = tuple(int(w) for w in self.widths)
        if len(self.widths) < 2 or min(self.widths) < 1:
            raise ArgumentError(f"invalid layer widths {self.widths}")
        self.params = np.asarray(self.params, dtype=np.float64).copy()
        if self.params.shape != (param_count(self.widths),):
            raise ArgumentError(
                f"expected {param_count(self.widths)} parameters for widths {self.widths}, "
                f"got {self.params.shape}"
            )
        self._layers = _layers(self.widths)

    @classmethod
    def initialize(
        cls,
        widths: tuple[int, ...],
        rng: np.random.Generator,
        output_scale: float = 1.0,
    ) -> "Mlp":
        """Fan-in scaled uniform weights, zero biases.

        Args:
            widths: layer widths including input and output
            rng: stream the weights are drawn from
            output_scale: multiplier applied to the final weight block
        """
        widths = tuple(int(w) for w in widths)
        params = np.zeros(param_count(widths))
        layers = _layers(widths)
        for i, (w, shape, _) in enumerate(layers):
            bound = 1.0 / np.sqrt(shape[0])
            block = rng.uniform(-bound, bound, size=shape[0] * shape[1])
            if i == len(layers) - 1:
                block *= output_scale
            params[w] = block
        return cls(widths, params)

    @property
    def n_params(self) -> int:
        return len(self.params)

    @property
    def output_bias(self) -> np.ndarray:
        return self.params[self._layers[-1][2]]

    def set_output_bias(self, bias: np.ndarray) -> None:
        self.params[self._layers[-1][2]] = np.asarray(bias, dtype=np.float64)

    def weights(self, params: np.ndarray | None = None) -> list[tuple[np.ndarray, np.ndarray]]:
        params = self.params if params is None else params
        return [(params[w].reshape(shape), params[b]) for w, shape, b in self._layers]

    def forward(self, x: np.ndarray, params: np.ndarray | None = None) -> tuple[np.ndarray, list]:
        """Batched forward pass; returns the output and the cache backward needs."""
        h = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if h.shape[1] != self.widths[0]:
            raise ArgumentError(f"input has {h.shape[1]} columns, network expects {self.widths[0]}")
        cache = []
        blocks = self.weights(params)
        for i, (w, b) in enumerate(blocks):
            z = h @ w + b
            cache.append((h, z))
            h = np.maximum(z, 0.0) if i < len(blocks) - 1 else z
        return h, cache

    def predict(self, x: np.ndarray, params: np.ndarray | None = None) -> np.ndarray:
        return self.forward(x, params)[0]

    def backward(self, cache: list, grad_out: np.ndarray, params: np.ndarray | None = None) -> np.ndarray:
        """Flat parameter gradient given dLoss/dOutput for every row."""
        blocks = self.weights(params)
        grad = np.zeros_like(self.params)
        delta = np.asarray(grad_out, dtype=np.float64)
        for i in range(len(blocks) - 1, -1, -1):
            h, z = cache[i]
            if i < len(blocks) - 1:
                delta = delta * (z > 0.0)
            w_slice, _, b_slice = self._layers[i]
            grad[w_slice] = (h.T @ delta).ravel()
            grad[b_slice] = delta.sum(axis=0)
            delta = delta @ blocks[i][0].T
        return grad

    def copy(self) -> "Mlp":
        return Mlp(self.widths, self.params.copy())

    # ---- Snapshots ----

    def save(self, path: Path | str) -> None:
        """Write parameters as text with a `# widths ...` header line."""
        header = "widths " + " ".join(str(w) for w in self.widths)
        np.savetxt(path, self.params, header=header)

    @classmethod
    def load(cls, path: Path | str) -> "Mlp":
        path = Path(path)
        with open(path, "r") as f:
            first = f.readline().lstrip("#").split()
        if not first or first[0] != "widths":
            raise ArgumentError(f"{path} has no widths header")
        widths = tuple(int(w) for w in first[1:])
        return cls(widths, np.atleast_1d(np.loadtxt(path)))


def forward(mlp: Mlp, x: np.ndarray) -> np.ndarray:
    return mlp.predict(x)


def param_grad(
    mlp: Mlp,
    x: np.ndarray,
    loss_fn: LossFn,
    params: np.ndarray | None = None,
) -> tuple[float, np.ndarray]:
    """Loss and its exact parameter gradient.

    Args:
        mlp: network to differentiate
        x: (N, widths[0]) batch of inputs
        loss_fn: maps the (N, out) output to (loss, dLoss/dOutput)
        params: evaluate at these parameters instead of `mlp.params`

    Raises:
        NonFiniteLossError: the loss is NaN or infinite.
    """
    out, cache = mlp.forward(x, params)
    loss, grad_out = loss_fn(out)
    if not np.isfinite(loss):
        raise NonFiniteLossError(float(loss))
    return float(loss), mlp.backward(cache, grad_out, params)
