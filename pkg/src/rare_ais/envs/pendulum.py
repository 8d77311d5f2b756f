"""Inverted pendulum under a rule-based balancing controller.

The adversary chooses an additive disturbance torque each step. The
controller's own torque is clipped to +/-2 N m before the disturbance is
added; the sum is not re-clipped. The state carries the running maximum
of |theta| so that the risk return max_t |theta_t| is available from the
terminal state alone.

State rows are [t, theta, omega, max_abs_theta].
"""

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from rare_ais.core.mdp import ActionKind, ActionSpace, AdversarialMdp, Trajectory
from rare_ais.errors import ArgumentError, InvalidActionError


GRAVITY = 10.0
LENGTH = 1.0
MASS = 1.0
DT = 0.05
MAX_SPEED = 8.0
MAX_TORQUE = 2.0
HORIZON = 20

DISCRETE_TORQUES = (-1.0, -0.25, 0.0, 0.25, 1.0)
PRINTED_PROBABILITIES = (0.016, 0.30, 0.37, 0.30, 0.016)
CONTINUOUS_SPREAD = 0.4

# Published Monte Carlo failure rates used as calibration anchors.
PUBLISHED_FAILURE_RATES = {
    "pendulum-discrete": 2.53e-5,
    "pendulum-continuous": 1.96e-5,
}

# Empirical (1 - rate) quantiles of max |theta| under the standard dynamics
# and std spread, so the default failure rates land on the published ones.
# Other dynamics forms or spread conventions need `rare-ais calibrate`.
DEFAULT_FAILURE_ANGLES = {
    ActionKind.DISCRETE: 0.185,
    ActionKind.CONTINUOUS: 0.253,
}


class DynamicsForm(Enum):
    """Which angular-velocity update to integrate."""

    STANDARD = "standard"   # dt multiplies gravity and torque terms
    VERBATIM = "verbatim"   # dt multiplies the torque term only


class SpreadConvention(Enum):
    """How the continuous spread parameter 0.4 is read."""

    STD = "std"
    VARIANCE = "variance"


@dataclass(frozen=True)
class DisturbanceModel:
    """Nominal distribution of the disturbance torque."""

    kind: ActionKind
    support: tuple[float, ...] = ()
    probs: tuple[float, ...] = ()
    spread: float = CONTINUOUS_SPREAD
    convention: SpreadConvention = SpreadConvention.STD

    def __post_init__(self) -> None:
        if self.kind is ActionKind.DISCRETE:
            if len(self.support) != len(self.probs) or not self.support:
                raise ArgumentError("discrete disturbance needs matching support and probabilities")
            if abs(math.fsum(self.probs) - 1.0) > 1e-12:
                raise ArgumentError(f"disturbance probabilities sum to {math.fsum(self.probs)}")
        elif not self.spread > 0.0:
            raise ArgumentError("continuous disturbance spread must be positive")

    @classmethod
    def discrete(cls) -> "DisturbanceModel":
        """Five-torque model with the printed probabilities renormalised by their sum."""
        total = math.fsum(PRINTED_PROBABILITIES)
        return cls(
            kind=ActionKind.DISCRETE,
            support=DISCRETE_TORQUES,
            probs=tuple(p / total for p in PRINTED_PROBABILITIES),
        )

    @classmethod
    def continuous(cls, convention: SpreadConvention = SpreadConvention.STD) -> "DisturbanceModel":
        return cls(kind=ActionKind.CONTINUOUS, spread=CONTINUOUS_SPREAD, convention=convention)

    @property
    def std(self) -> float:
        if self.convention is SpreadConvention.VARIANCE:
            return math.sqrt(self.spread)
        return self.spread

    def torque_index(self, torque: float) -> int:
        """Support index of a discrete torque."""
        matches = [i for i, value in enumerate(self.support) if value == torque]
        if not matches:
            raise InvalidActionError(torque)
        return matches[0]

    def torque_logprob(self, torque: float) -> float:
        """Nominal log density of a disturbance torque."""
        if self.kind is ActionKind.DISCRETE:
            return math.log(self.probs[self.torque_index(torque)])
        z = torque / self.std
        return -0.5 * z * z - math.log(self.std) - 0.5 * math.log(2.0 * math.pi)


@dataclass(frozen=True)
class PendulumState:
    """Typed view of one pendulum state row."""

    t: int
    theta: float
    omega: float
    max_abs_theta: float = 0.0

    def to_array(self) -> np.ndarray:
        return np.array([self.t, self.theta, self.omega, self.max_abs_theta], dtype=np.float64)

    @classmethod
    def from_array(cls, row: np.ndarray) -> "PendulumState":
        return cls(t=int(row[0]), theta=float(row[1]), omega=float(row[2]), max_abs_theta=float(row[3]))


def controller_torque(theta, omega):
    """Rule-based balancing torque, clipped to +/-MAX_TORQUE.

    The target velocity is the one that would swing the pendulum back to
    upright; the controller is proportional on the velocity error.
    """
    theta = np.asarray(theta, dtype=np.float64)
    omega = np.asarray(omega, dtype=np.float64)
    omega_target = np.sign(theta) * np.sqrt(60.0 * (1.0 - np.cos(theta)))
    torque = -2.0 * omega + (omega - omega_target)
    return np.clip(torque, -MAX_TORQUE, MAX_TORQUE)


def advance(states: np.ndarray, disturbance: np.ndarray, form: DynamicsForm) -> np.ndarray:
    """One vectorised transition of (N, 4) state rows."""
    t, theta, omega, max_abs = states[:, 0], states[:, 1], states[:, 2], states[:, 3]
    torque = controller_torque(theta, omega) + disturbance
    # -(3g / 2l) sin(theta + pi), written so that theta = 0 is an exact fixed point
    gravity = (3.0 * GRAVITY / (2.0 * LENGTH)) * np.sin(theta)
    actuation = 3.0 * torque / (MASS * LENGTH**2)
    if form is DynamicsForm.VERBATIM:
        new_omega = omega + gravity + actuation * DT
    else:
        new_omega = omega + (gravity + actuation) * DT
    new_omega = np.clip(new_omega, -MAX_SPEED, MAX_SPEED)
    new_theta = theta + omega * DT
    new_max = np.maximum(max_abs, np.abs(new_theta))
    return np.stack([t + 1.0, new_theta, new_omega, new_max], axis=1)


def pendulum_step(
    state: PendulumState,
    disturbance: float,
    form: DynamicsForm = DynamicsForm.STANDARD,
) -> PendulumState:
    """Single-state transition under an additive disturbance torque."""
    row = advance(state.to_array()[None, :], np.array([disturbance], dtype=np.float64), form)
    return PendulumState.from_array(row[0])


def risk_return(traj: Trajectory) -> float:
    """max_t |theta_t| over the whole trajectory."""
    return float(np.max(np.abs(traj.states[:, 1])))


class PendulumMdp(AdversarialMdp):
    """Adversarial MDP whose actions are disturbance torques."""

    horizon = HORIZON
    state_dim = 4
    feature_dim = 3

    def __init__(
        self,
        disturbance: DisturbanceModel | None = None,
        gamma_fail: float | None = None,
        dynamics_form: DynamicsForm = DynamicsForm.STANDARD,
    ):
        self.disturbance = disturbance or DisturbanceModel.discrete()
        if gamma_fail is None:
            gamma_fail = DEFAULT_FAILURE_ANGLES[self.disturbance.kind]
        self.gamma_fail = float(gamma_fail)
        self.dynamics_form = dynamics_form
        if self.disturbance.kind is ActionKind.DISCRETE:
            self.action_space = ActionSpace(ActionKind.DISCRETE, len(self.disturbance.support))
            self._support = np.array(self.disturbance.support, dtype=np.float64)
            self._probs = np.array(self.disturbance.probs, dtype=np.float64)
        else:
            self.action_space = ActionSpace(ActionKind.CONTINUOUS, 1)

    @property
    def failure_threshold(self) -> float:
        return self.gamma_fail

    @property
    def name(self) -> str:
        return f"pendulum-{self.disturbance.kind.value}"

    def initial_state(self) -> np.ndarray:
        return np.zeros(4, dtype=np.float64)

    def torques(self, actions: np.ndarray) -> np.ndarray:
        """Disturbance torque for each row of actions."""
        if self.action_space.kind is ActionKind.DISCRETE:
            return self._support[np.asarray(actions, dtype=np.int64)]
        return np.asarray(actions, dtype=np.float64).reshape(len(actions), -1)[:, 0]

    def action_values(self, actions):
        return self.torques(actions)

    def step(self, states, actions):
        next_states = advance(np.atleast_2d(states), self.torques(actions), self.dynamics_form)
        return next_states, next_states[:, 0] >= self.horizon

    def terminal_return(self, states):
        states = np.atleast_2d(states)
        return np.where(states[:, 0] >= self.horizon, states[:, 3], 0.0)

    def features(self, states):
        states = np.atleast_2d(states)
        return np.stack(
            [states[:, 0] / self.horizon, states[:, 1], states[:, 2] / MAX_SPEED], axis=1
        )

    def nominal_probs(self, states):
        return np.broadcast_to(self._probs, (len(np.atleast_2d(states)), len(self._probs)))

    def nominal_mean_std(self, states):
        n = len(np.atleast_2d(states))
        return np.zeros((n, 1)), np.full((n, 1), self.disturbance.std)

    def nominal_disturbance(self, states, rng: np.random.Generator) -> np.ndarray:
        """Disturbance torques drawn from the nominal model, one per state row."""
        return self.torques(self.nominal_sample(states, rng))

    def torque_logprob(self, torque: float) -> float:
        return self.disturbance.torque_logprob(torque)

    def params(self) -> dict:
        """Environment parameters recorded alongside results."""
        return {
            "name": self.name,
            "gamma_fail": self.gamma_fail,
            "dynamics_form": self.dynamics_form.value,
            "std_convention": self.disturbance.convention.value,
            "horizon": self.horizon,
        }
