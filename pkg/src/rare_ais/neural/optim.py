"""Adam with global-norm gradient clipping."""

from dataclasses import dataclass, replace

import numpy as np

from rare_ais.errors import ArgumentError


@dataclass(frozen=True)
class AdamState:
    """Moment accumulators and hyperparameters for one parameter vector."""

    m: np.ndarray
    v: np.ndarray
    step: int = 0
    lr: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    max_grad_norm: float = 1.0

    @classmethod
    def create(cls, n_params: int, lr: float = 3e-4, max_grad_norm: float = 1.0) -> "AdamState":
        return cls(m=np.zeros(n_params), v=np.zeros(n_params), lr=lr, max_grad_norm=max_grad_norm)


def clip_by_global_norm(grad: np.ndarray, max_norm: float) -> np.ndarray:
    norm = float(np.linalg.norm(grad))
    if max_norm > 0.0 and norm > max_norm:
        return grad * (max_norm / norm)
    return grad


def adam_step(state: AdamState, params: np.ndarray, grad: np.ndarray) -> tuple[np.ndarray, AdamState]:
    """Clip `grad` to the state's global norm, then take one Adam step.

    Returns:
        Updated parameters and the advanced optimizer state
    """
    if params.shape != grad.shape or params.shape != state.m.shape:
        raise ArgumentError(
            f"shape mismatch: params {params.shape}, grad {grad.shape}, state {state.m.shape}"
        )
    g = clip_by_global_norm(np.asarray(grad, dtype=np.float64), state.max_grad_norm)
    step = state.step + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * g
    v = state.beta2 * state.v + (1.0 - state.beta2) * g * g
    m_hat = m / (1.0 - state.beta1**step)
    v_hat = v / (1.0 - state.beta2**step)
    new_params = params - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return new_params, replace(state, m=m, v=v, step=step)
