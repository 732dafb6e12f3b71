"""Brute-force reference for the relative value iteration solver.

Every stationary deterministic policy on a (small) state space is evaluated
exactly from the stationary distributions of the finite chain it induces.
Nothing here shares code with the iterative solver beyond the cost formula
and the transition rule.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.sparse.csgraph import connected_components

from .exceptions import StateSpaceError
from .model import evolve_state
from .solver import StateSpace, stage_cost


@dataclass
class OracleResult:
    gain: float
    policy: np.ndarray          # wait in ticks per state
    optimal_policies: list      # every policy (tuple of grid indices) within tolerance of the optimum
    n_policies: int


def transition_matrix(space: StateSpace, actions) -> np.ndarray:
    """Dense ``P[s, s']`` for the policy choosing grid index ``actions[s]``."""
    n = len(space)
    waits = space.grid.ticks
    P = np.zeros((n, n))
    for i in range(n):
        s = space.state(i)
        z = int(waits[actions[i]])
        for y, p in zip(space.dist.ticks, space.dist.probs):
            P[i, space.index[evolve_state(s, z, y)]] += p
    return P


def policy_costs(space: StateSpace, actions, beta) -> np.ndarray:
    waits = space.grid.values[np.asarray(actions)]
    return np.array([
        stage_cost(a, z, beta, space.dist, space.m) for a, z in zip(space.sum_ages, waits)
    ])


def stationary(P: np.ndarray) -> np.ndarray:
    """Stationary distribution of an irreducible stochastic matrix."""
    n = len(P)
    A = np.vstack([P.T - np.eye(n), np.ones(n)])
    b = np.zeros(n + 1)
    b[-1] = 1.0
    return np.linalg.lstsq(A, b, rcond=None)[0]


def long_run_average(P: np.ndarray, cost: np.ndarray, start: int) -> float:
    """Exact long-run average cost from ``start``, allowing several recurrent classes."""
    n = len(P)
    n_comp, labels = connected_components(P > 0, directed=True, connection="strong")
    closed = [c for c in range(n_comp) if not np.any(P[np.ix_(labels == c, labels != c)] > 0)]
    recurrent = np.isin(labels, closed)
    class_gain = {}
    for c in closed:
        members = np.flatnonzero(labels == c)
        pi = stationary(P[np.ix_(members, members)])
        class_gain[c] = float(pi @ cost[members])
    if recurrent[start]:
        return class_gain[labels[start]]
    # absorption probabilities into each closed class from the transient states
    trans = np.flatnonzero(~recurrent)
    pos = {s: k for k, s in enumerate(trans)}
    Q = P[np.ix_(trans, trans)]
    total = 0.0
    for c in closed:
        r = P[np.ix_(trans, np.flatnonzero(labels == c))].sum(axis=1)
        absorb = np.linalg.solve(np.eye(len(trans)) - Q, r)
        total += absorb[pos[start]] * class_gain[c]
    return total


def policy_bias(P, cost, gain, reference) -> np.ndarray | None:
    """Solve ``gain + h = cost + P h`` with ``h[reference] = 0``; None if not unique."""
    n = len(P)
    A = np.vstack([np.eye(n) - P, np.eye(n)[reference]])
    b = np.concatenate([cost - gain, [0.0]])
    h, _, rank, _ = np.linalg.lstsq(A, b, rcond=None)
    if rank < n:
        return None
    return h


def exhaustive_oracle(space: StateSpace, beta, max_policies=10**6, tol=1e-9) -> OracleResult:
    """Minimum long-run average cost at ``beta`` over all stationary deterministic policies.

    Among the optimal policies, the one that is greedy (smallest-wait ties)
    with respect to its own relative values is returned; if none is, the
    first optimal policy in enumeration order.
    """
    n, k = len(space), len(space.grid)
    count = k ** n
    if count > max_policies:
        raise StateSpaceError(f"{count} policies exceed the oracle cap {max_policies}")
    o = space.reference
    gains = {}
    for actions in itertools.product(range(k), repeat=n):
        P = transition_matrix(space, actions)
        gains[actions] = long_run_average(P, policy_costs(space, actions, beta), o)
    best = min(gains.values())
    optimal = [a for a, g in gains.items() if g <= best + tol * max(1.0, abs(best))]

    chosen = optimal[0]
    all_costs = np.array([[stage_cost(a, z, beta, space.dist, space.m) for z in space.grid.values]
                          for a in space.sum_ages])
    for actions in optimal:
        P = transition_matrix(space, actions)
        h = policy_bias(P, policy_costs(space, actions, beta), gains[actions], o)
        if h is None:
            continue
        q = np.array([[all_costs[i, j] + sum(
            p * h[space.index[evolve_state(space.state(i), int(space.grid.ticks[j]), y)]]
            for y, p in zip(space.dist.ticks, space.dist.probs))
            for j in range(k)] for i in range(n)])
        greedy = np.argmax(q <= q.min(axis=1, keepdims=True) + 1e-9, axis=1)
        if tuple(greedy) == actions:
            chosen = actions
            break
    return OracleResult(best, space.grid.ticks[list(chosen)], optimal, count)
