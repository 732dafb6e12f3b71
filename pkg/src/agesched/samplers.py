"""Samplers as scikit-learn style estimators.

``fit`` takes observed service times (or a ``ServiceDistribution``) and
``predict`` maps per-source age vectors, shape ``(n_samples, m)``, to the
waiting time inserted after the delivery at which those ages were observed.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import ConfigError
from .model import ServiceDistribution, WaitGrid, as_fraction, lattice_tick, to_ticks
from .sim import SamplerSpec, Scheduler, SimConfig, run
from .solver import SolverConfig, bisection_solve, saturating_max_wait, zero_wait_taa
from .waterfill import WaterFillPolicy, golden_section_threshold, water_fill_wait


def as_distribution(X, sample_weight=None, tick=None) -> ServiceDistribution:
    """Accept a ready distribution or build the empirical one from samples."""
    if isinstance(X, ServiceDistribution):
        return X if tick is None else X.with_tick(tick)
    X = check_array(X, ensure_2d=False, dtype=float)
    return ServiceDistribution.from_samples(X.ravel(), sample_weight, tick=tick)


def _check_ages(X, m):
    X = check_array(X, dtype=float)
    if X.shape[1] != m:
        raise ValueError(f"expected {m} ages per row, got {X.shape[1]}")
    if np.any(X < 0):
        raise ValueError("ages must be non-negative")
    return X


class ZeroWaitSampler(BaseEstimator):
    """Generate a new packet as soon as the previous one is delivered."""

    def fit(self, X=None, y=None, sample_weight=None):
        self.max_wait_ = 0.0
        return self

    def predict(self, X):
        X = check_array(X, dtype=float)
        return np.zeros(X.shape[0])

    def _kernel_spec(self, m):
        return SamplerSpec.zero_wait()


class ConstantWaitSampler(BaseEstimator):
    """Wait a fixed time after every delivery.

    With ``wait=None`` the wait is ``fraction * E[Y]`` of the distribution
    passed to ``fit``.
    """

    def __init__(self, wait=None, fraction=0.3, max_wait=None):
        self.wait = wait
        self.fraction = fraction
        self.max_wait = max_wait

    def fit(self, X=None, y=None, sample_weight=None):
        if self.wait is not None:
            wait = float(self.wait)
        elif X is None:
            raise ConfigError("ConstantWaitSampler needs a wait or service-time data")
        else:
            wait = self.fraction * as_distribution(X, sample_weight).mean
        if wait < 0:
            raise ConfigError("constant wait must be non-negative")
        if self.max_wait is not None and wait > self.max_wait:
            raise ConfigError(f"constant wait {wait} exceeds max_wait {self.max_wait}")
        self.wait_ = wait
        self.max_wait_ = self.max_wait
        return self

    def predict(self, X):
        check_is_fitted(self, "wait_")
        X = check_array(X, dtype=float)
        return np.full(X.shape[0], self.wait_)

    def _kernel_spec(self, m):
        check_is_fitted(self, "wait_")
        return SamplerSpec.constant(self.wait_, self.max_wait_)


class ThresholdSampler(BaseEstimator):
    """Exact TaA-optimal sampler from relative value iteration inside bisection.

    Parameters
    ----------
    m : int
        Number of sources.
    tick : float, str or Fraction, optional
        Time lattice; defaults to the finest one shared by the support and
        the wait grid.
    max_wait : float or "auto"
        Largest wait on the grid.  ``"auto"`` picks the smallest grid value
        that no optimal wait can exceed.
    wait_step : float
        Grid spacing.
    eps1, eps2, max_rvi_iters, max_bisect_iters, tau, convention
        Passed to :class:`SolverConfig`.

    Attributes
    ----------
    policy_table_ : PolicyTable
    beta_star_ : float
        Optimal total average age on the grid.
    threshold_cutoff_ : float
        Age sum at and above which the sampler never waits.
    """

    def __init__(self, m=3, tick=None, max_wait="auto", wait_step=0.25, eps1=1e-4, eps2=1e-9,
                 max_rvi_iters=100_000, max_bisect_iters=60, tau=None, convention="standard"):
        self.m = m
        self.tick = tick
        self.max_wait = max_wait
        self.wait_step = wait_step
        self.eps1 = eps1
        self.eps2 = eps2
        self.max_rvi_iters = max_rvi_iters
        self.max_bisect_iters = max_bisect_iters
        self.tau = tau
        self.convention = convention

    def solver_config(self) -> SolverConfig:
        return SolverConfig(self.eps1, self.eps2, self.max_rvi_iters, self.max_bisect_iters,
                            self.tau, self.convention)

    def make_grid(self, dist: ServiceDistribution) -> WaitGrid:
        step = to_ticks(self.wait_step, dist.tick)
        if self.max_wait == "auto":
            return WaitGrid(saturating_max_wait(dist, self.m, step), step, dist.tick)
        return WaitGrid(to_ticks(self.max_wait, dist.tick), step, dist.tick)

    def fit(self, X, y=None, sample_weight=None):
        dist = as_distribution(X, sample_weight)
        if self.tick is not None:
            tick = as_fraction(self.tick)
        else:
            parts = [dist.tick, self.wait_step]
            if self.max_wait != "auto":
                parts.append(self.max_wait)
            tick = lattice_tick(parts)
        dist = dist.with_tick(tick)
        table = bisection_solve(dist, self.make_grid(dist), self.m, self.solver_config())
        return self.set_table(table)

    def set_table(self, table):
        """Adopt an already solved (e.g. loaded) policy table."""
        self.policy_table_ = table
        self.distribution_ = table.space.dist
        self.beta_star_ = table.beta_star
        self.threshold_cutoff_ = table.threshold_cutoff
        self.max_wait_ = table.space.grid.max_wait_time
        self._tick = table.space.tick
        return self

    @classmethod
    def from_table(cls, table):
        grid = table.space.grid
        tick = table.space.dist.tick
        est = cls(m=table.space.m, tick=tick, max_wait=float(grid.max_wait * tick),
                  wait_step=float(grid.step * tick), convention=table.convention)
        return est.set_table(table)

    def _ticks(self, ages):
        k = np.rint(np.asarray(ages, dtype=float) / self._tick).astype(np.int64)
        if np.any(np.abs(k * self._tick - ages) > 1e-9 * np.maximum(1.0, ages)):
            return None
        return tuple(sorted((int(v) for v in k), reverse=True))

    def covers(self, ages) -> bool:
        """True when the sorted state of ``ages`` is in the solved table."""
        state = self._ticks(ages)
        return state is not None and state in self.policy_table_.space.index

    def predict(self, X):
        """Table wait for each row; states outside the table get zero wait."""
        check_is_fitted(self, "policy_table_")
        X = _check_ages(X, self.m)
        out = np.zeros(X.shape[0])
        for i, row in enumerate(X):
            state = self._ticks(row)
            if state is not None:
                w = self.policy_table_.wait_for(state)
                if w is not None:
                    out[i] = w * self._tick
        return out

    def _kernel_spec(self, m):
        check_is_fitted(self, "policy_table_")
        return SamplerSpec.table(self.policy_table_)


class WaterFillSampler(BaseEstimator):
    """Approximate sampler ``[th - A_s / m]^+`` with a golden-section tuned threshold.

    If ``threshold`` is given, ``fit`` only records it.  Otherwise the
    threshold minimising a fixed-seed simulated TaA under MAF is searched on
    ``[0, search_hi]`` (default: zero-wait TaA / m).
    """

    def __init__(self, m=3, threshold=None, max_wait=None, search_hi=None, tol=1e-3,
                 n_deliveries=200_000, burn_in=1000, seed=12345):
        self.m = m
        self.threshold = threshold
        self.max_wait = max_wait
        self.search_hi = search_hi
        self.tol = tol
        self.n_deliveries = n_deliveries
        self.burn_in = burn_in
        self.seed = seed

    def evaluator(self, dist):
        cfg = SimConfig(self.n_deliveries, self.burn_in, self.seed)

        def taa(th):
            policy = WaterFillPolicy(th, self.m, self.max_wait)
            return run(Scheduler.MAF, policy, dist, self.m, cfg).taa

        return taa

    def fit(self, X=None, y=None, sample_weight=None):
        self.max_wait_ = self.max_wait
        if self.threshold is not None:
            self.threshold_ = float(self.threshold)
            self.search_ = None
            return self
        if X is None:
            raise ConfigError("WaterFillSampler needs a threshold or service-time data")
        dist = as_distribution(X, sample_weight)
        self.search_ = golden_section_threshold(dist, self.m, self.evaluator(dist), self.search_hi, self.tol)
        self.threshold_ = self.search_.th
        self.search_taa_ = self.search_.taa
        return self

    @property
    def policy_(self) -> WaterFillPolicy:
        check_is_fitted(self, "threshold_")
        return WaterFillPolicy(self.threshold_, self.m, self.max_wait_)

    def predict(self, X):
        X = _check_ages(X, self.m)
        policy = self.policy_
        return np.array([water_fill_wait(a, policy) for a in X.sum(axis=1)])

    def _kernel_spec(self, m):
        return SamplerSpec.water_fill(self.policy_.th, self.max_wait_)


__all__ = [
    "ZeroWaitSampler",
    "ConstantWaitSampler",
    "ThresholdSampler",
    "WaterFillSampler",
    "as_distribution",
    "zero_wait_taa",
]
