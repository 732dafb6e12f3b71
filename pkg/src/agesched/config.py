"""Experiment configuration: INI-style sections flattened to dotted keys.

Every key can be overridden as ``section.key=value`` (the CLI ``--set``
flag), and the canonical flattened form is hashed so that output rows can be
traced back to the exact configuration that produced them.
"""
from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import ConfigError, MissingArtifactError
from .model import ServiceDistribution, WaitGrid, as_fraction, lattice_tick, to_ticks
from .sim import Scheduler, SimConfig
from .solver import SolverConfig, saturating_max_wait

DEFAULTS = {
    "problem.m": "3",
    "problem.distribution": "two_point",
    "problem.p": "0.5",
    "problem.low": "0",
    "problem.high": "3",
    "problem.tick_size": "auto",
    "grid.max_wait": "auto",
    "grid.step": "0.25",
    "solver.eps1": "1e-4",
    "solver.eps2": "1e-9",
    "solver.max_rvi_iters": "100000",
    "solver.max_bisect_iters": "60",
    "solver.tau": "auto",
    "solver.convention": "standard",
    "sim.n_deliveries": "200000",
    "sim.burn_in": "1000",
    "sim.seed": "1",
    "sim.replications": "5",
    "waterfill.n_deliveries": "200000",
    "waterfill.burn_in": "1000",
    "waterfill.seed": "12345",
    "waterfill.tol": "1e-3",
    "waterfill.search_hi": "auto",
    "waterfill.max_wait": "none",
    "experiment.roster": "MAF+ZeroWait, RAND+ZeroWait, MAF+ConstantWait, MAF+Table, MAF+WaterFill",
    "experiment.constant_fraction": "0.3",
    "experiment.sweep_variable": "problem.p",
    "experiment.sweep_start": "0.1",
    "experiment.sweep_stop": "0.9",
    "experiment.sweep_step": "0.1",
    "experiment.workers": "1",
    "verify.coupling_seeds": "10",
    "verify.coupling_deliveries": "100000",
    "verify.oracle_cap": "1000000",
}

# keys that cannot change results are left out of the config hash
UNHASHED = frozenset({"experiment.workers"})

SAMPLERS = ("ZeroWait", "ConstantWait", "Table", "WaterFill")


def parse_roster(text):
    roster = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        sched, _, samp = item.partition("+")
        try:
            Scheduler(sched)
        except ValueError:
            raise ConfigError(f"unknown scheduler {sched!r} in roster entry {item!r}") from None
        if samp not in SAMPLERS:
            raise ConfigError(f"unknown sampler {samp!r} in roster entry {item!r}")
        roster.append((sched, samp))
    if not roster:
        raise ConfigError("policy roster is empty")
    return roster


@dataclass
class ExperimentConfig:
    values: dict

    @classmethod
    def load(cls, path=None, overrides=()):
        values = dict(DEFAULTS)
        if path is not None:
            path = Path(path)
            if not path.exists():
                raise MissingArtifactError(f"config file {path} not found")
            parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
            try:
                parser.read(path)
            except configparser.Error as exc:
                raise ConfigError(f"cannot parse {path}: {exc}") from None
            for section in parser.sections():
                for key, value in parser.items(section):
                    values[f"{section}.{key}"] = value
        cfg = cls(values)
        for item in overrides:
            key, sep, value = item.partition("=")
            if not sep:
                raise ConfigError(f"override {item!r} is not of the form section.key=value")
            cfg = cfg.with_value(key.strip(), value.strip())
        cfg.validate()
        return cfg

    def with_value(self, key, value) -> "ExperimentConfig":
        if key not in DEFAULTS:
            raise ConfigError(f"unknown config key {key!r}")
        values = dict(self.values)
        values[key] = str(value)
        return ExperimentConfig(values)

    def get(self, key) -> str:
        unknown = set(self.values) - set(DEFAULTS)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        return self.values[key].strip()

    def _num(self, key, kind=float):
        raw = self.get(key)
        try:
            return kind(raw)
        except ValueError:
            raise ConfigError(f"{key} = {raw!r} is not a valid {kind.__name__}") from None

    def _optional(self, key, *sentinels):
        raw = self.get(key)
        return None if raw.lower() in sentinels else self._num(key)

    def canonical(self) -> str:
        return "\n".join(f"{k}={self.values[k].strip()}" for k in sorted(self.values) if k not in UNHASHED)

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:12]

    # problem -----------------------------------------------------------
    @property
    def m(self) -> int:
        m = self._num("problem.m", int)
        if m < 1:
            raise ConfigError("problem.m must be at least 1")
        return m

    def tick(self, dist=None):
        raw = self.get("problem.tick_size")
        if raw.lower() != "auto":
            return as_fraction(raw)
        parts = [self.get("grid.step")]
        if self.get("grid.max_wait").lower() != "auto":
            parts.append(self.get("grid.max_wait"))
        if dist is not None:
            parts.append(dist.tick)
        return lattice_tick(parts)

    def distribution(self) -> ServiceDistribution:
        kind = self.get("problem.distribution")
        if kind == "two_point":
            p = self._num("problem.p")
            if not 0.0 <= p < 1.0:
                raise ConfigError(f"problem.p = {p} must lie in [0, 1)")
            dist = ServiceDistribution.two_point(p, self.get("problem.low"), self.get("problem.high"))
        else:
            values, probs = [], []
            for item in kind.split(","):
                v, sep, pr = item.partition(":")
                if not sep:
                    raise ConfigError(f"distribution entry {item!r} is not value:prob")
                values.append(v.strip())
                try:
                    probs.append(float(pr))
                except ValueError:
                    raise ConfigError(f"bad probability in {item!r}") from None
            dist = ServiceDistribution.from_values(values, probs)
        return dist.with_tick(self.tick(dist))

    def grid(self, dist: ServiceDistribution) -> WaitGrid:
        step = to_ticks(self.get("grid.step"), dist.tick)
        raw = self.get("grid.max_wait")
        if raw.lower() == "auto":
            return WaitGrid(saturating_max_wait(dist, self.m, step), step, dist.tick)
        return WaitGrid(to_ticks(raw, dist.tick), step, dist.tick)

    def solver(self) -> SolverConfig:
        return SolverConfig(
            eps1=self._num("solver.eps1"),
            eps2=self._num("solver.eps2"),
            max_rvi_iters=self._num("solver.max_rvi_iters", int),
            max_bisect_iters=self._num("solver.max_bisect_iters", int),
            tau=self._optional("solver.tau", "auto"),
            convention=self.get("solver.convention"),
        )

    def sim(self) -> SimConfig:
        return SimConfig(self._num("sim.n_deliveries", int), self._num("sim.burn_in", int),
                         self._num("sim.seed", int))

    @property
    def replications(self) -> int:
        return self._num("sim.replications", int)

    @property
    def roster(self):
        return parse_roster(self.get("experiment.roster"))

    @property
    def workers(self) -> int:
        return max(1, self._num("experiment.workers", int))

    def sweep_values(self):
        start = self._num("experiment.sweep_start")
        stop = self._num("experiment.sweep_stop")
        step = self._num("experiment.sweep_step")
        if step <= 0 or stop < start:
            raise ConfigError("sweep range must have step > 0 and stop >= start")
        count = int(np.floor((stop - start) / step + 1e-9)) + 1
        return [float(f"{start + k * step:.12g}") for k in range(count)]

    def validate(self):
        dist = self.distribution()
        self.grid(dist)
        self.solver()
        sim = self.sim()
        sim.validate(self.m)
        if self.replications < 2:
            raise ConfigError("sim.replications must be at least 2")
        self.roster
        key = self.get("experiment.sweep_variable")
        if key not in DEFAULTS:
            raise ConfigError(f"sweep variable {key!r} is not a config key")
        self.sweep_values()
        return self
