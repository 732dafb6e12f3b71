"""Seeded discrete-event simulation of the generate-at-will multi-source system.

Stage ``i`` runs from delivery ``D_i`` to ``D_{i+1}``: the sampler picks a
wait ``Z_i`` from the ages at ``D_i``, the scheduler picks a source, the
packet is generated at ``D_i + Z_i`` and delivered ``Y_{i+1}`` later.  Over a
stage every age grows linearly, so the area under all age curves is exactly
``A_i (Z_i + Y_{i+1}) + m/2 (Z_i + Y_{i+1})^2``.

Two engines share these semantics: a numba kernel for samplers that expose a
``_kernel_spec`` and a plain-Python loop for anything with ``predict``.
"""
from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .exceptions import ConfigError, SimulationError
from .model import ServiceDistribution

ZERO, CONSTANT, TABLE, WATER_FILL = 0, 1, 2, 3
WAIT_RTOL = 1e-12


class Scheduler(str, enum.Enum):
    MAF = "MAF"
    RAND = "RAND"


@dataclass(frozen=True)
class SamplerSpec:
    """Flat description of a built-in sampler, consumed by the compiled kernel."""

    kind: int
    const: float = 0.0
    th: float = 0.0
    max_wait: float = math.inf
    keys: np.ndarray = field(default_factory=lambda: np.empty(0, np.int64))
    waits: np.ndarray = field(default_factory=lambda: np.empty(0, np.float64))
    tick: float = 1.0
    radix: int = 1
    m: int = 0

    @classmethod
    def zero_wait(cls):
        return cls(ZERO, max_wait=0.0)

    @classmethod
    def constant(cls, wait, max_wait=None):
        return cls(CONSTANT, const=float(wait), max_wait=_cap(max_wait))

    @classmethod
    def water_fill(cls, th, max_wait=None):
        return cls(WATER_FILL, th=float(th), max_wait=_cap(max_wait))

    @classmethod
    def table(cls, table):
        space = table.space
        radix = int(space.states.max()) + 1
        if radix ** space.m >= 2 ** 62:
            raise SimulationError("state encoding overflows 64-bit keys; use engine='python'")
        weights = radix ** np.arange(space.m - 1, -1, -1, dtype=np.int64)
        keys = space.states @ weights
        order = np.argsort(keys)
        return cls(
            TABLE,
            max_wait=space.grid.max_wait_time,
            keys=keys[order],
            waits=table.wait[order].astype(float) * space.tick,
            tick=space.tick,
            radix=radix,
            m=space.m,
        )


def _cap(max_wait):
    return math.inf if max_wait is None else float(max_wait)


@dataclass(frozen=True)
class SimConfig:
    n_deliveries: int = 1_000_000
    burn_in: int = 1000
    seed: int = 0
    initial_ages: tuple | None = None
    service_sequence: np.ndarray | None = None
    trace: bool = False

    def validate(self, m):
        if self.burn_in >= self.n_deliveries:
            raise ConfigError("burn_in must be smaller than n_deliveries")
        if self.burn_in < m:
            raise ConfigError(f"burn_in must be at least m={m}")
        if self.initial_ages is not None:
            if len(self.initial_ages) != m or min(self.initial_ages) < 0:
                raise ConfigError("initial_ages needs m non-negative entries")
        if self.service_sequence is not None and len(self.service_sequence) < self.n_deliveries:
            raise ConfigError("replayed service sequence is shorter than n_deliveries")


@dataclass
class SimResult:
    tapa: float
    taa: float
    deliveries_counted: int
    final_ages: np.ndarray
    fallback_count: int = 0
    last_fallback: int = -1
    trace: dict | None = None
    seed: object = None


def service_stream(dist: ServiceDistribution, n, seed) -> tuple:
    """Service times and RAND picks for one run, from two independent child streams."""
    svc, sch = np.random.SeedSequence(seed).spawn(2)
    idx = np.random.default_rng(svc).choice(len(dist.ticks), size=n, p=dist.prob_array)
    return dist.values[idx], np.random.default_rng(sch)


@njit(cache=True)
def _kernel(m, ys, picks, sched_kind, kind, const, th, max_wait, keys, waits, tick, radix,
            ages0, burn_in, trace, tr_r, tr_z, tr_d, tr_peak, tr_sorted):
    n = ys.shape[0]
    ages = ages0.copy()
    buf = np.empty(m)
    t = 0.0
    peak_sum = 0.0
    area = 0.0
    dur = 0.0
    fallback = 0
    last_fb = -1
    for i in range(n):
        a_sum = 0.0
        for l in range(m):
            a_sum += ages[l]
        if kind == 0:
            z = 0.0
        elif kind == 1:
            z = const
        elif kind == 2:
            for l in range(m):
                buf[l] = ages[l]
            buf.sort()
            key = 0
            ok = True
            for l in range(m - 1, -1, -1):
                k = int(np.rint(buf[l] / tick))
                if k >= radix or abs(buf[l] - k * tick) > 1e-9 * max(1.0, buf[l]):
                    ok = False
                    break
                key = key * radix + k
            z = 0.0
            found = False
            if ok:
                pos = np.searchsorted(keys, key)
                if pos < keys.shape[0] and keys[pos] == key:
                    z = waits[pos]
                    found = True
            if not found:
                fallback += 1
                last_fb = i
        else:
            z = th - a_sum / m
            if z < 0.0:
                z = 0.0
            if z > max_wait:
                z = max_wait
        if not (z >= 0.0 and z <= max_wait * (1.0 + 1e-12)):
            return peak_sum, area, dur, fallback, last_fb, i, z, ages
        if sched_kind == 0:
            r = 0
            for l in range(1, m):
                if ages[l] > ages[r]:
                    r = l
        else:
            r = picks[i]
        y = ys[i]
        dt = z + y
        peak = ages[r] + dt
        if i >= burn_in:
            peak_sum += peak
            area += a_sum * dt + 0.5 * m * dt * dt
            dur += dt
        for l in range(m):
            ages[l] += dt
        ages[r] = y
        t += dt
        if trace:
            tr_r[i] = r
            tr_z[i] = z
            tr_d[i] = t
            tr_peak[i] = peak
            for l in range(m):
                buf[l] = ages[l]
            buf.sort()
            for l in range(m):
                tr_sorted[i, l] = buf[m - 1 - l]
    return peak_sum, area, dur, fallback, last_fb, -1, 0.0, ages


def _resolve_spec(sampler, m):
    spec_fn = getattr(sampler, "_kernel_spec", None)
    if spec_fn is None:
        return None
    spec = spec_fn(m)
    if spec.kind == TABLE and spec.m != m:
        raise ConfigError(f"policy table solved for m={spec.m}, simulation has m={m}")
    return spec


def _finish(m, cfg, ys, peak_sum, area, dur, fallback, last_fb, ages, trace):
    counted = cfg.n_deliveries - cfg.burn_in
    taa = area / dur if dur > 0 else 0.0
    if trace is not None:
        trace["Y"] = ys.copy()
        trace["S"] = trace["D"] - ys
        trace["i"] = np.arange(1, cfg.n_deliveries + 1)
    return SimResult(peak_sum / counted, taa, counted, np.asarray(ages), int(fallback), int(last_fb),
                     trace, cfg.seed)


def run(scheduler, sampler, dist: ServiceDistribution, m, cfg: SimConfig, engine="auto") -> SimResult:
    """Simulate ``cfg.n_deliveries`` deliveries and estimate TaPA and TaA.

    The first ``cfg.burn_in`` deliveries are discarded: peaks are averaged over
    deliveries ``burn_in + 1 .. n`` and areas accumulated over ``[D_burn_in, D_n]``.
    """
    scheduler = Scheduler(scheduler)
    cfg.validate(m)
    n = cfg.n_deliveries
    ys, sch_rng = service_stream(dist, n, cfg.seed)
    if cfg.service_sequence is not None:
        ys = np.asarray(cfg.service_sequence[:n], dtype=float)
    picks = sch_rng.integers(0, m, size=n) if scheduler is Scheduler.RAND else np.zeros(0, np.int64)
    ages0 = np.zeros(m) if cfg.initial_ages is None else np.asarray(cfg.initial_ages, dtype=float)

    spec = _resolve_spec(sampler, m) if engine != "python" else None
    if spec is None:
        if engine == "kernel":
            raise ConfigError(f"{type(sampler).__name__} has no compiled form")
        return _run_python(scheduler, sampler, m, cfg, ys, picks, ages0)

    if cfg.trace:
        tr = dict(r=np.empty(n, np.int64), Z=np.empty(n), D=np.empty(n), peak=np.empty(n),
                  ages=np.empty((n, m)))
    else:
        tr = dict(r=np.empty(0, np.int64), Z=np.empty(0), D=np.empty(0), peak=np.empty(0),
                  ages=np.empty((0, m)))
    peak_sum, area, dur, fallback, last_fb, err, z, ages = _kernel(
        m, ys, picks, 0 if scheduler is Scheduler.MAF else 1,
        spec.kind, spec.const, spec.th, spec.max_wait, spec.keys, spec.waits, spec.tick, spec.radix,
        ages0, cfg.burn_in, cfg.trace, tr["r"], tr["Z"], tr["D"], tr["peak"], tr["ages"])
    if err >= 0:
        raise SimulationError(f"sampler emitted invalid wait {z!r} at stage {err} (max {spec.max_wait})")
    return _finish(m, cfg, ys, peak_sum, area, dur, fallback, last_fb, ages, tr if cfg.trace else None)


def _sampler_wait(sampler, ages):
    if hasattr(sampler, "predict"):
        return float(sampler.predict(ages[None, :])[0])
    return float(sampler(ages))


def _run_python(scheduler, sampler, m, cfg, ys, picks, ages0):
    n = cfg.n_deliveries
    max_wait = getattr(sampler, "max_wait_", None)
    max_wait = math.inf if max_wait is None else max_wait
    covers = getattr(sampler, "covers", None)
    ages = ages0.copy()
    trace = dict(r=[], Z=[], D=[], peak=[], ages=[]) if cfg.trace else None
    t = peak_sum = area = dur = 0.0
    fallback, last_fb = 0, -1
    for i in range(n):
        a_sum = float(sum(ages))
        z = _sampler_wait(sampler, ages)
        if covers is not None and not covers(ages):
            fallback += 1
            last_fb = i
        if not (z >= 0.0 and z <= max_wait * (1.0 + WAIT_RTOL)):
            raise SimulationError(f"sampler emitted invalid wait {z!r} at stage {i} (max {max_wait})")
        if scheduler is Scheduler.MAF:
            r = int(np.argmax(ages))
        else:
            r = int(picks[i])
        y = float(ys[i])
        dt = z + y
        peak = ages[r] + dt
        if i >= cfg.burn_in:
            peak_sum += peak
            area += a_sum * dt + 0.5 * m * dt * dt
            dur += dt
        ages += dt
        ages[r] = y
        t += dt
        if trace is not None:
            trace["r"].append(r)
            trace["Z"].append(z)
            trace["D"].append(t)
            trace["peak"].append(peak)
            trace["ages"].append(np.sort(ages)[::-1].copy())
    if trace is not None:
        trace = {k: np.array(v) for k, v in trace.items()}
    return _finish(m, cfg, ys, peak_sum, area, dur, fallback, last_fb, ages, trace)


@dataclass
class Estimate:
    tapa: float
    taa: float
    tapa_hw: float
    taa_hw: float
    replications: int
    results: list


def estimate_with_ci(scheduler, sampler, dist, m, cfg: SimConfig, replications: int, engine="auto") -> Estimate:
    """Independent-seed replications with normal-approximation 95% half-widths.

    Replication ``r`` uses the seed ``[cfg.seed, r]``.
    """
    if replications < 2:
        raise ConfigError("need at least two replications for a confidence interval")
    results = []
    for r in range(replications):
        rep_cfg = SimConfig(cfg.n_deliveries, cfg.burn_in, [int(cfg.seed), r], cfg.initial_ages)
        results.append(run(scheduler, sampler, dist, m, rep_cfg, engine=engine))
    tapa = np.array([res.tapa for res in results])
    taa = np.array([res.taa for res in results])
    z = 1.959963984540054 / math.sqrt(replications)
    return Estimate(float(tapa.mean()), float(taa.mean()),
                    float(z * tapa.std(ddof=1)), float(z * taa.std(ddof=1)),
                    replications, results)


TRACE_COLUMNS = ("i", "r", "S", "D", "Z", "Y", "peak")


def write_trace_csv(result: SimResult, path):
    """One record per delivery; sources are 1-based, sorted ages as a1..am."""
    tr = result.trace
    if tr is None:
        raise ConfigError("run was not traced (set SimConfig.trace=True)")
    m = tr["ages"].shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_COLUMNS + tuple(f"a{l + 1}" for l in range(m)))
        for k in range(len(tr["i"])):
            w.writerow([int(tr["i"][k]), int(tr["r"][k]) + 1, repr(float(tr["S"][k])), repr(float(tr["D"][k])),
                        repr(float(tr["Z"][k])), repr(float(tr["Y"][k])), repr(float(tr["peak"][k]))]
                       + [repr(float(a)) for a in tr["ages"][k]])
