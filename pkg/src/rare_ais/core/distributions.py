"""Vectorised categorical and Gaussian helpers used by environments and policies."""

import math

import numpy as np

from rare_ais.errors import InvalidActionError


LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


def sample_categorical(probs: np.ndarray, uniforms: np.ndarray) -> np.ndarray:
    """Inverse-CDF sampling of one index per row.

    Args:
        probs: (N, K) row-stochastic matrix
        uniforms: (N,) draws from U[0, 1)

    Returns:
        (N,) integer action indices
    """
    probs = np.atleast_2d(probs)
    cdf = np.cumsum(probs, axis=1)
    idx = np.sum(cdf <= np.asarray(uniforms)[:, None], axis=1)
    return np.minimum(idx, probs.shape[1] - 1).astype(np.int64)


def check_indices(actions: np.ndarray, n_actions: int) -> np.ndarray:
    """Return actions as int64 indices, raising on anything outside 0..K-1."""
    actions = np.asarray(actions)
    as_int = actions.astype(np.int64)
    bad = (as_int != actions) | (as_int < 0) | (as_int >= n_actions)
    if np.any(bad):
        raise InvalidActionError(actions[bad].ravel()[0].item())
    return as_int


def categorical_logprob(probs: np.ndarray, actions: np.ndarray) -> np.ndarray:
    """Log probability of each row's action under a (N, K) probability matrix."""
    probs = np.atleast_2d(probs)
    idx = check_indices(actions, probs.shape[1])
    with np.errstate(divide="ignore"):
        return np.log(probs[np.arange(len(idx)), idx])


def gaussian_logprob(mean: np.ndarray, std: np.ndarray, actions: np.ndarray) -> np.ndarray:
    """Diagonal Gaussian log density summed over the last axis."""
    z = (actions - mean) / std
    return np.sum(-0.5 * z * z - np.log(std) - LOG_SQRT_2PI, axis=-1)
