"""Exception types shared across rare-ais."""


class RareEventError(Exception):
    """Base class for every error raised by rare-ais."""


class ArgumentError(RareEventError, ValueError):
    """An argument is outside the domain of the operation."""


class NumericalFailureError(RareEventError):
    """A rollout produced a non-finite state."""

    def __init__(self, step: int, message: str | None = None):
        self.step = step
        super().__init__(message or f"non-finite state at step {step}")


class NonFiniteLossError(RareEventError):
    """A training loss evaluated to NaN or infinity."""

    def __init__(self, loss: float):
        self.loss = loss
        super().__init__(f"non-finite loss: {loss}")


class WeightOverflowError(RareEventError):
    """An importance weight overflowed when leaving log space."""

    def __init__(self, log_weight: float):
        self.log_weight = log_weight
        super().__init__(f"importance weight overflows (log weight {log_weight:.6g})")


class InvalidActionError(RareEventError, ValueError):
    """An action lies outside a discrete support."""

    def __init__(self, action: object):
        self.action = action
        super().__init__(f"action {action!r} is outside the support")


class InvalidSupportError(RareEventError):
    """Every mixture member assigns zero density to a trajectory."""


class UndefinedProposalError(RareEventError):
    """The optimal proposal is undefined because no failure is reachable."""

    def __init__(self, state: object):
        self.state = state
        super().__init__(f"V(s) = 0 at state {state!r}; optimal proposal undefined")


class CapacityError(RareEventError):
    """An exact enumeration would exceed the supported size."""


class ConfigError(RareEventError):
    """A configuration key is unknown or holds an invalid value."""

    def __init__(self, key: str, message: str | None = None):
        self.key = key
        super().__init__(message or f"invalid configuration key: {key}")


class NumericalWarning(RuntimeWarning):
    """A training update was skipped because of non-finite values."""
