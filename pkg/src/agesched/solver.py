"""Average-cost dynamic program for the TaA-optimal sampler.

The sampler problem under MAF is a ratio (average area over average stage
length).  For a candidate value ``beta`` the parametric per-stage problem

    p(beta) = min  lim 1/n sum E[(A_i - beta)(Z_i + Y_{i+1}) + m/2 (Z_i + Y_{i+1})^2]

is solved by relative value iteration on the sorted-age state space, and an
outer bisection drives ``beta`` to the root ``p(beta) = 0``, which is the
optimal total average age.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigError, ConvergenceError, SolverError, StateSpaceError
from .model import ServiceDistribution, WaitGrid, evolve_state

log = logging.getLogger(__name__)

STANDARD = "standard"
REVERSED = "reversed"


@dataclass(frozen=True)
class SolverConfig:
    """Tolerances and caps for the bisection / RVI solver.

    ``tau`` is the self-loop probability of the aperiodicity transformation;
    ``None`` means 0.5 for a degenerate service distribution and 0 otherwise.
    ``convention`` selects how the sign of ``p(beta)`` moves the bracket:
    ``"standard"`` (p > 0 means beta is below the optimum) or ``"reversed"``
    (the reverse rule, kept only for comparison).
    """

    eps1: float = 1e-4
    eps2: float = 1e-9
    max_rvi_iters: int = 100_000
    max_bisect_iters: int = 60
    tau: float | None = None
    convention: str = STANDARD
    max_states: int = 1_000_000
    bracket_atol: float = 1e-7

    def __post_init__(self):
        if not (self.eps1 > 0 and self.eps2 > 0):
            raise ConfigError("eps1 and eps2 must be positive")
        if self.tau is not None and not (0.0 <= self.tau < 1.0):
            raise ConfigError("tau must lie in [0, 1)")
        if self.convention not in (STANDARD, REVERSED):
            raise ConfigError(f"unknown bisection convention {self.convention!r}")
        if self.max_rvi_iters < 1 or self.max_bisect_iters < 1:
            raise ConfigError("iteration caps must be positive")

    def resolve_tau(self, dist: ServiceDistribution) -> float:
        if self.tau is not None:
            return float(self.tau)
        return 0.5 if dist.is_degenerate else 0.0


@dataclass
class StateSpace:
    """Recurrent class of sorted age states, in ticks.

    Rows of ``states`` are sorted lexicographically, so row 0 is the
    lexicographically smallest state (the default reference state).
    ``succ[s, k, j]`` is the row index of ``evolve_state(states[s], grid[k], support[j])``.
    """

    states: np.ndarray
    succ: np.ndarray
    index: dict
    m: int
    dist: ServiceDistribution
    grid: WaitGrid
    reference: int = 0

    def __len__(self):
        return len(self.states)

    @property
    def tick(self) -> float:
        return float(self.dist.tick)

    @property
    def sum_ticks(self) -> np.ndarray:
        return self.states.sum(axis=1)

    @property
    def sum_ages(self) -> np.ndarray:
        """Age sums ``A_s`` in time units."""
        return self.sum_ticks.astype(float) * self.tick

    def state(self, i) -> tuple:
        return tuple(int(a) for a in self.states[i])

    def with_reference(self, reference) -> "StateSpace":
        if not isinstance(reference, (int, np.integer)):
            reference = self.index[tuple(reference)]
        return StateSpace(self.states, self.succ, self.index, self.m, self.dist, self.grid, int(reference))


def projected_size(dist: ServiceDistribution, grid: WaitGrid, m: int) -> int:
    return len(dist.ticks) ** m * len(grid) ** (m - 1)


def build_state_space(dist: ServiceDistribution, grid: WaitGrid, m: int, max_states=1_000_000) -> StateSpace:
    """Enumerate every state generated by ``m`` service times and ``m - 1`` waits."""
    if m < 1:
        raise ConfigError("need at least one source")
    if dist.tick != grid.tick:
        raise ConfigError(f"distribution tick {dist.tick} differs from grid tick {grid.tick}")
    size = projected_size(dist, grid, m)
    if size > max_states:
        raise StateSpaceError(f"projected state space {size} exceeds cap {max_states}")

    support = [int(y) for y in dist.ticks]
    waits = [int(z) for z in grid.ticks]
    gaps = sorted({z + y for z in waits for y in support})
    # suffixes of the sorted state, grown from the youngest age upward
    suffixes = {(y,) for y in support}
    for _ in range(m - 1):
        suffixes = {(t[0] + g,) + t for t in suffixes for g in gaps}
    states = np.array(sorted(suffixes), dtype=np.int64).reshape(-1, m)
    index = {tuple(int(a) for a in row): i for i, row in enumerate(states)}

    succ = np.empty((len(states), len(waits), len(support)), dtype=np.int64)
    for i, row in enumerate(states):
        s = tuple(int(a) for a in row)
        for k, z in enumerate(waits):
            for j, y in enumerate(support):
                nxt = evolve_state(s, z, y)
                try:
                    succ[i, k, j] = index[nxt]
                except KeyError:
                    raise StateSpaceError(f"state space not closed: {s} -> {nxt}") from None
    log.debug("built state space: m=%d, %d states (projected %d)", m, len(states), size)
    return StateSpace(states, succ, index, m, dist, grid)


def stage_cost(sum_ages, wait, beta, dist: ServiceDistribution, m) -> float:
    """Expected per-stage cost for age sum ``sum_ages`` and wait ``wait`` (time units)."""
    ey, ey2 = dist.mean, dist.second_moment
    return (sum_ages - beta) * (wait + ey) + 0.5 * m * (wait * wait + 2.0 * wait * ey + ey2)


def cost_matrix(space: StateSpace, beta) -> np.ndarray:
    """``C[s, k]`` for every state and grid wait."""
    z = space.grid.values[None, :]
    a = space.sum_ages[:, None]
    return stage_cost(a, z, beta, space.dist, space.m)


def expected_relative_value(state, wait, h, space: StateSpace) -> float:
    """``sum_y P(Y=y) h(evolve_state(state, wait, y))``; state and wait in ticks."""
    total = 0.0
    for y, p in zip(space.dist.ticks, space.dist.probs):
        nxt = evolve_state(tuple(state), wait, y)
        try:
            total += p * h[space.index[nxt]]
        except KeyError:
            raise StateSpaceError(f"successor {nxt} of {tuple(state)} missing from state space") from None
    return total


def zero_wait_taa(dist: ServiceDistribution, m) -> float:
    """Total average age of MAF with zero waiting."""
    ey, ey2 = dist.mean, dist.second_moment
    return m * (m + 1) / 2.0 * ey + m * ey2 / (2.0 * ey)


def zero_wait_tapa(dist: ServiceDistribution, m) -> float:
    """Total average peak age of MAF with zero waiting: each peak spans m + 1 services."""
    return (m + 1) * dist.mean


def saturating_max_wait(dist: ServiceDistribution, m, step: int) -> int:
    """Smallest grid multiple of ``step`` (ticks) beyond which no optimal wait can lie.

    The per-stage cost is convex in the wait with minimiser
    ``(beta - A_s - m E[Y]) / m`` and the relative values are non-decreasing
    in the wait, so no optimal wait exceeds that minimiser for ``A_s >= 0``
    and ``beta`` up to the zero-wait TaA.
    """
    bound = max(0.0, (zero_wait_taa(dist, m) - m * dist.mean) / m)
    ticks = int(np.ceil(bound / float(dist.tick) - 1e-9))
    return -(-ticks // step) * step


@dataclass
class RviSolution:
    lam: float
    h: np.ndarray
    greedy_wait: np.ndarray
    greedy_index: np.ndarray
    iterations: int
    residual: float
    beta: float


def _greedy(q, tol):
    qmin = q.min(axis=1, keepdims=True)
    return np.argmax(q <= qmin + tol, axis=1)


def rvi_solve(space: StateSpace, beta, cfg: SolverConfig | None = None, reference=None) -> RviSolution:
    """Relative value iteration for the parametric average-cost problem at ``beta``.

    States with ``A_s >= beta - m E[Y]`` are not minimised over: their wait is
    fixed at zero.  Greedy ties resolve to the smallest wait.
    """
    cfg = cfg or SolverConfig()
    if beta < 0:
        raise ConfigError("beta must be non-negative")
    o = space.reference if reference is None else reference
    tau = cfg.resolve_tau(space.dist)
    probs = space.dist.prob_array

    cost = cost_matrix(space, beta)
    pruned = space.sum_ages >= beta - space.m * space.dist.mean
    cost[pruned, 1:] = np.inf

    h = np.zeros(len(space))
    residual = np.inf
    for it in range(1, cfg.max_rvi_iters + 1):
        q = cost + h[space.succ] @ probs
        if tau:
            q = (1.0 - tau) * q + tau * h[:, None]
        j = q.min(axis=1)
        h_new = j - j[o]
        residual = float(np.max(np.abs(h_new - h)))
        h = h_new
        if residual <= cfg.eps2:
            break
    else:
        raise ConvergenceError(
            f"RVI did not converge in {cfg.max_rvi_iters} iterations at beta={beta!r} "
            f"(residual {residual:.3e})",
            residual=residual,
            iterations=cfg.max_rvi_iters,
        )
    idx = _greedy(q, cfg.eps2)
    return RviSolution(
        lam=float(j[o]) / (1.0 - tau),
        h=h,
        greedy_wait=space.grid.ticks[idx],
        greedy_index=idx,
        iterations=it,
        residual=residual,
        beta=float(beta),
    )


@dataclass
class BisectionStep:
    beta: float
    lam: float
    rvi_iterations: int


@dataclass
class PolicyTable:
    """Solved threshold sampler: a wait (ticks) for every state of ``space``."""

    space: StateSpace
    wait: np.ndarray
    beta_star: float
    solution: RviSolution | None = None
    history: list = field(default_factory=list)
    convention: str = STANDARD

    @property
    def m(self):
        return self.space.m

    @property
    def threshold_cutoff(self) -> float:
        return self.beta_star - self.m * self.space.dist.mean

    @property
    def states(self):
        return self.space.states

    def wait_for(self, state, default=None):
        """Wait in ticks for a sorted state (tuple of ticks), or ``default`` if absent."""
        i = self.space.index.get(tuple(int(a) for a in state))
        return default if i is None else int(self.wait[i])

    def threshold_violations(self) -> int:
        """Number of states at or above the cutoff that are told to wait."""
        above = self.space.sum_ages >= self.threshold_cutoff
        return int(np.count_nonzero(self.wait[above] != 0))

    def as_dict(self) -> dict:
        return {self.space.state(i): int(w) for i, w in enumerate(self.wait)}


def bisection_solve(
    dist: ServiceDistribution,
    grid: WaitGrid,
    m,
    cfg: SolverConfig | None = None,
    space: StateSpace | None = None,
) -> PolicyTable:
    """Optimal TaA ``beta*`` and the threshold sampler attaining it."""
    cfg = cfg or SolverConfig()
    if space is None:
        space = build_state_space(dist, grid, m, cfg.max_states)
    lo, hi = 0.0, zero_wait_taa(dist, m)

    top = rvi_solve(space, hi, cfg)
    if top.lam > cfg.bracket_atol * max(1.0, hi):
        raise SolverError(f"p(u) = {top.lam:.3e} > 0 at the zero-wait upper bound u = {hi!r}")

    history = []
    for _ in range(cfg.max_bisect_iters):
        if hi - lo <= cfg.eps1:
            break
        beta = 0.5 * (lo + hi)
        sol = rvi_solve(space, beta, cfg)
        history.append(BisectionStep(beta, sol.lam, sol.iterations))
        if cfg.convention == STANDARD:
            if sol.lam > 0:
                lo = beta
            else:
                hi = beta
        else:
            if sol.lam >= 0:
                hi = beta
            else:
                lo = beta
    if hi - lo > cfg.eps1:
        raise SolverError(f"bisection bracket [{lo}, {hi}] still wider than eps1 after {cfg.max_bisect_iters} steps")

    beta_star = 0.5 * (lo + hi)
    final = rvi_solve(space, beta_star, cfg)
    log.info("beta*=%.6f after %d bisection steps (%d states)", beta_star, len(history), len(space))
    return PolicyTable(space, final.greedy_wait.copy(), beta_star, final, history, cfg.convention)
