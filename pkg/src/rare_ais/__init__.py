"""rare-ais - adaptive importance sampling for rare-event probabilities in adversarial MDPs."""

from rare_ais.app import main

__all__ = ["main"]
