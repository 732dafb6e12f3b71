"""Shared domain types: service-time distributions, waiting grids and age states.

Time is carried as integer counts of a per-problem ``tick`` (a positive
``Fraction``) so that age states can be deduplicated exactly.  Conversions to
floating point happen only at the boundary (moments, costs, simulation).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Integral, Rational

import numpy as np

from .exceptions import ConfigError

PROB_ATOL = 1e-12


def as_fraction(value) -> Fraction:
    """Exact rational for ``value``; floats go through their shortest repr."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (Integral, Rational)):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value.strip())
    if isinstance(value, (float, np.floating)):
        if not np.isfinite(value):
            raise ConfigError(f"non-finite time value {value!r}")
        return Fraction(repr(float(value)))
    raise ConfigError(f"cannot interpret {value!r} as a time value")


def to_ticks(value, tick: Fraction) -> int:
    """Convert a time value to an exact tick count, rejecting off-lattice values."""
    q = as_fraction(value) / tick
    if q.denominator != 1:
        raise ConfigError(f"value {value} is not a multiple of tick size {tick}")
    return int(q)


@dataclass(frozen=True)
class ServiceDistribution:
    """Finite-support distribution of packet transmission times.

    ``ticks[k]`` occurs with probability ``probs[k]``; support values are
    stored in ticks of size ``tick``.
    """

    ticks: tuple
    probs: tuple
    tick: Fraction

    def __post_init__(self):
        if not isinstance(self.tick, Fraction) or self.tick <= 0:
            raise ConfigError(f"tick size must be a positive Fraction, got {self.tick!r}")
        if len(self.ticks) == 0 or len(self.ticks) != len(self.probs):
            raise ConfigError("support and probabilities must be non-empty and of equal length")
        if len(set(self.ticks)) != len(self.ticks):
            raise ConfigError("support values must be distinct")
        if any(int(t) != t or t < 0 for t in self.ticks):
            raise ConfigError("support values must be non-negative multiples of the tick size")
        if any(not (0.0 < p <= 1.0) for p in self.probs):
            raise ConfigError("probabilities must lie in (0, 1]")
        total = float(sum(self.probs))
        if abs(total - 1.0) > PROB_ATOL:
            raise ConfigError(f"probabilities sum to {total!r}, expected 1")
        if self.mean <= 0:
            raise ConfigError("mean service time must be positive")

    @classmethod
    def from_values(cls, values, probs, tick=None) -> "ServiceDistribution":
        """Build from time values; zero-probability entries are dropped.

        ``tick`` defaults to the largest tick that puts every value on the
        lattice (the gcd of the values, or 1 if all are zero).
        """
        values = [as_fraction(v) for v in values]
        probs = [float(p) for p in probs]
        if len(values) != len(probs):
            raise ConfigError("values and probabilities must have equal length")
        if any(p < 0 for p in probs):
            raise ConfigError("probabilities must be non-negative")
        pairs = sorted((v, p) for v, p in zip(values, probs) if p > 0)
        if tick is None:
            tick = lattice_tick([v for v, _ in pairs])
        tick = as_fraction(tick)
        return cls(
            ticks=tuple(to_ticks(v, tick) for v, _ in pairs),
            probs=tuple(p for _, p in pairs),
            tick=tick,
        )

    @classmethod
    def two_point(cls, p, low=0, high=3, tick=None) -> "ServiceDistribution":
        """Service time equal to ``low`` with probability ``p``, else ``high``."""
        return cls.from_values([low, high], [p, 1.0 - p], tick=tick)

    @classmethod
    def deterministic(cls, value, tick=None) -> "ServiceDistribution":
        return cls.from_values([value], [1.0], tick=tick)

    @classmethod
    def from_samples(cls, samples, weights=None, tick=None) -> "ServiceDistribution":
        """Empirical distribution of observed service times (optionally weighted)."""
        samples = np.asarray(samples, dtype=float).ravel()
        if weights is None:
            weights = np.ones_like(samples)
        weights = np.asarray(weights, dtype=float).ravel()
        if samples.shape != weights.shape:
            raise ConfigError("samples and weights must have the same length")
        if np.any(weights < 0) or weights.sum() <= 0:
            raise ConfigError("weights must be non-negative with a positive sum")
        mass = {}
        for v, w in zip(samples, weights):
            key = as_fraction(v)
            mass[key] = mass.get(key, 0.0) + float(w)
        total = sum(mass.values())
        values = sorted(mass)
        return cls.from_values(values, [mass[v] / total for v in values], tick=tick)

    @property
    def values(self) -> np.ndarray:
        """Support in time units."""
        return np.array(self.ticks, dtype=float) * float(self.tick)

    @property
    def prob_array(self) -> np.ndarray:
        return np.array(self.probs, dtype=float)

    @property
    def mean(self) -> float:
        return float(np.dot(self.prob_array, self.values))

    @property
    def second_moment(self) -> float:
        return float(np.dot(self.prob_array, self.values ** 2))

    @property
    def is_degenerate(self) -> bool:
        return len(self.ticks) == 1

    def describe(self) -> str:
        """Compact ``ticks:prob`` listing used in serialized artifacts."""
        return ",".join(f"{t}:{p!r}" for t, p in zip(self.ticks, self.probs))

    def with_tick(self, tick) -> "ServiceDistribution":
        """Same distribution expressed on a finer (compatible) tick lattice."""
        tick = as_fraction(tick)
        return ServiceDistribution(
            ticks=tuple(to_ticks(t * self.tick, tick) for t in self.ticks),
            probs=self.probs,
            tick=tick,
        )


def lattice_tick(values) -> Fraction:
    """Largest rational ``t`` such that every value is an integer multiple of ``t``."""
    nonzero = [as_fraction(v) for v in values if as_fraction(v) != 0]
    if not nonzero:
        return Fraction(1)
    num, den = 0, 1
    for v in nonzero:
        # gcd of fractions: gcd(numerators) / lcm(denominators)
        num = math.gcd(num, v.numerator)
        den = den * v.denominator // math.gcd(den, v.denominator)
    return Fraction(num, den)


def moments(dist: ServiceDistribution) -> tuple:
    """Return ``(E[Y], E[Y^2])`` in time units."""
    return dist.mean, dist.second_moment


@dataclass(frozen=True)
class WaitGrid:
    """Uniform waiting-time set {0, step, 2*step, ..., max_wait}, in ticks."""

    max_wait: int
    step: int
    tick: Fraction

    def __post_init__(self):
        if self.step <= 0:
            raise ConfigError("wait step must be positive")
        if self.max_wait < 0:
            raise ConfigError("max wait must be non-negative")
        if self.max_wait % self.step != 0:
            raise ConfigError(f"wait step {self.step} does not divide max wait {self.max_wait}")

    @classmethod
    def from_time(cls, max_wait, step, tick) -> "WaitGrid":
        tick = as_fraction(tick)
        return cls(to_ticks(max_wait, tick), to_ticks(step, tick), tick)

    @classmethod
    def zero(cls, tick) -> "WaitGrid":
        """The zero-wait-only grid {0}."""
        return cls(0, 1, as_fraction(tick))

    @property
    def ticks(self) -> np.ndarray:
        return np.arange(0, self.max_wait + 1, self.step, dtype=np.int64)

    @property
    def values(self) -> np.ndarray:
        return self.ticks.astype(float) * float(self.tick)

    @property
    def max_wait_time(self) -> float:
        return self.max_wait * float(self.tick)

    def __len__(self):
        return self.max_wait // self.step + 1

    def scaled(self, factor: int) -> "WaitGrid":
        """Same step with ``max_wait`` multiplied by ``factor``."""
        return WaitGrid(self.max_wait * factor, self.step, self.tick)


def sort_ages(ages) -> tuple:
    """Descending tuple of ages (the sorted state used by the solver)."""
    return tuple(sorted(ages, reverse=True))


def sum_ages(state) -> int:
    return sum(state)


def evolve_state(state, z, y) -> tuple:
    """Sorted state after waiting ``z`` and delivering a packet of service time ``y``.

    Under MAF the oldest source is served, so every other age moves up one
    rank and grows by ``z + y`` while the served source restarts at ``y``.
    """
    return tuple(a + z + y for a in state[1:]) + (y,)


def maf_pick(ages) -> int:
    """Index (0-based) of the oldest source; ties go to the lowest index."""
    ages = list(ages)
    if not ages:
        raise ValueError("need at least one source")
    best = 0
    for i in range(1, len(ages)):
        if ages[i] > ages[best]:
            best = i
    return best
