"""Numpy feed-forward networks, Adam and policy heads."""

from rare_ais.neural.heads import CategoricalHead, GaussianHead, head_logprob, head_rsample, head_sample
from rare_ais.neural.mlp import Mlp, forward, param_grad
from rare_ais.neural.networks import (
    NeuralCategoricalPolicy,
    NeuralGaussianPolicy,
    QNetwork,
    ValueNetwork,
    create_policy,
)
from rare_ais.neural.optim import AdamState, adam_step

__all__ = [
    "AdamState",
    "CategoricalHead",
    "GaussianHead",
    "Mlp",
    "NeuralCategoricalPolicy",
    "NeuralGaussianPolicy",
    "QNetwork",
    "ValueNetwork",
    "adam_step",
    "create_policy",
    "forward",
    "head_logprob",
    "head_rsample",
    "head_sample",
    "param_grad",
]
