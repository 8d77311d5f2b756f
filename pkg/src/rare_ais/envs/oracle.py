"""Exact ground truth for small discrete adversarial MDPs.

Used as the oracle for estimator tests: the failure probability by full
enumeration, Q and V by backward induction over the sparse failure
indicator, and the zero-variance proposal q*(a|s) = Q(s,a) pi(a|s) / V(s).
"""

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from rare_ais.core.mdp import ActionKind, AdversarialMdp, DiscretePolicy
from rare_ais.errors import ArgumentError, CapacityError, UndefinedProposalError


MAX_ENUMERATION = 1_000_000

StateKey = tuple[float, ...]


def state_key(state: np.ndarray) -> StateKey:
    return tuple(float(x) for x in np.asarray(state).ravel())


def _check_enumerable(env: AdversarialMdp) -> int:
    if env.action_space.kind is not ActionKind.DISCRETE:
        raise ArgumentError("exact enumeration needs a discrete action space")
    count = env.action_space.size ** env.horizon
    if count > MAX_ENUMERATION:
        raise CapacityError(
            f"{env.action_space.size}^{env.horizon} = {count} trajectories exceeds {MAX_ENUMERATION}"
        )
    return count


def enumerate_mu(env: AdversarialMdp, gamma: float) -> float:
    """Exact P(R(tau) > gamma) summed over every action sequence."""
    _check_enumerable(env)
    sequences = np.array(
        list(itertools.product(range(env.action_space.size), repeat=env.horizon)),
        dtype=np.int64,
    )
    states = env.initial_states(len(sequences))
    log_p = np.zeros(len(sequences))
    for t in range(env.horizon):
        log_p += env.nominal_logprob(states, sequences[:, t])
        states, done = env.step(states, sequences[:, t])
        if np.all(done):
            break
    failed = env.terminal_return(states) > gamma
    return math.fsum(np.exp(log_p[failed]))


@dataclass(frozen=True)
class ExactTables:
    """Exact Q, V, pi and q* keyed by state."""

    mu: float
    gamma: float
    q_table: dict[StateKey, np.ndarray] = field(default_factory=dict)
    v_table: dict[StateKey, float] = field(default_factory=dict)
    nominal_table: dict[StateKey, np.ndarray] = field(default_factory=dict)
    qstar_table: dict[StateKey, np.ndarray] = field(default_factory=dict)

    def q_function(self) -> "TabularQ":
        return TabularQ(self)


def _reachable_states(env: AdversarialMdp) -> list[list[np.ndarray]]:
    """Non-terminal states grouped by depth, found by forward expansion."""
    layers: list[list[np.ndarray]] = []
    frontier = {state_key(env.initial_state()): env.initial_state()}
    for _ in range(env.horizon):
        layers.append(list(frontier.values()))
        nxt: dict[StateKey, np.ndarray] = {}
        for state in frontier.values():
            for a in range(env.action_space.size):
                s2, done = env.step(state[None, :], np.array([a]))
                if not done[0]:
                    nxt.setdefault(state_key(s2[0]), s2[0])
        if not nxt:
            break
        frontier = nxt
    return layers


def optimal_row(q_values: np.ndarray, nominal: np.ndarray, value: float) -> np.ndarray:
    """q*(a|s) = Q(s,a) pi(a|s) / V(s) for a single state."""
    return q_values * nominal / value


def exact_q(env: AdversarialMdp, gamma: float) -> ExactTables:
    """Backward induction of Q^pi over the indicator return 1{R > gamma}."""
    _check_enumerable(env)
    q_table: dict[StateKey, np.ndarray] = {}
    v_table: dict[StateKey, float] = {}
    nominal_table: dict[StateKey, np.ndarray] = {}
    qstar_table: dict[StateKey, np.ndarray] = {}
    n_actions = env.action_space.size

    for layer in reversed(_reachable_states(env)):
        for state in layer:
            key = state_key(state)
            q = np.zeros(n_actions)
            for a in range(n_actions):
                s2, done = env.step(state[None, :], np.array([a]))
                if done[0]:
                    q[a] = float(env.terminal_return(s2)[0] > gamma)
                else:
                    q[a] = v_table[state_key(s2[0])]
            nominal = np.array(env.nominal_probs(state[None, :])[0], dtype=np.float64)
            value = float(np.dot(nominal, q))
            q_table[key] = q
            v_table[key] = value
            nominal_table[key] = nominal
            if value > 0.0:
                qstar_table[key] = optimal_row(q, nominal, value)

    mu = v_table[state_key(env.initial_state())]
    return ExactTables(
        mu=mu,
        gamma=gamma,
        q_table=q_table,
        v_table=v_table,
        nominal_table=nominal_table,
        qstar_table=qstar_table,
    )


def enumerate_q(env: AdversarialMdp, gamma: float, state: np.ndarray, action: int) -> float:
    """Q(s, a) by enumerating every continuation of (state, action)."""
    s1, done = env.step(np.asarray(state)[None, :], np.array([action]))
    if done[0]:
        return float(env.terminal_return(s1)[0] > gamma)
    remaining = env.horizon - int(round(float(s1[0, 0])))
    sequences = np.array(
        list(itertools.product(range(env.action_space.size), repeat=remaining)), dtype=np.int64
    )
    states = np.tile(s1[0], (len(sequences), 1))
    log_p = np.zeros(len(sequences))
    for t in range(remaining):
        log_p += env.nominal_logprob(states, sequences[:, t])
        states, _ = env.step(states, sequences[:, t])
    failed = env.terminal_return(states) > gamma
    return math.fsum(np.exp(log_p[failed]))


class OptimalProposal(DiscretePolicy):
    """The zero-variance proposal read off exact tables."""

    def __init__(self, tables: ExactTables):
        self.tables = tables

    def probs(self, env, states):
        rows = []
        for state in np.atleast_2d(states):
            key = state_key(state)
            if self.tables.v_table.get(key, 0.0) <= 0.0:
                raise UndefinedProposalError(key)
            rows.append(
                optimal_row(self.tables.q_table[key], self.tables.nominal_table[key], self.tables.v_table[key])
            )
        return np.array(rows)


def optimal_proposal(tables: ExactTables) -> OptimalProposal:
    """Policy q*(a|s) = Q(s,a) pi(a|s) / V(s); raises where V(s) = 0."""
    return OptimalProposal(tables)


class TabularQ:
    """Exact Q tables exposed through the value-network interface."""

    def __init__(self, tables: ExactTables):
        self.tables = tables

    def values(self, env, states) -> np.ndarray:
        return np.array([self.tables.q_table[state_key(s)] for s in np.atleast_2d(states)])
