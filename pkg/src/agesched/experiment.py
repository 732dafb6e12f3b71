"""Per-point experiment pipeline and the CSV schema shared by ``simulate`` and ``sweep``."""
from __future__ import annotations

import csv
import io
from concurrent.futures import ProcessPoolExecutor

from .config import ExperimentConfig
from .exceptions import AgeSchedError, ConfigError
from .samplers import ConstantWaitSampler, ThresholdSampler, WaterFillSampler, ZeroWaitSampler
from .sim import Scheduler, estimate_with_ci
from .solver import bisection_solve

SCHEMA_VERSION = 1
COLUMNS = ("schema", "policy", "variable", "value", "tapa", "tapa_hw", "taa", "taa_hw",
           "n", "replications", "seed", "config_hash", "beta_star", "th")


def build_samplers(cfg: ExperimentConfig, roster, table=None):
    """Fit one sampler per sampler name used in ``roster``.

    ``table`` is a pre-solved policy table; without one, a Table entry is
    solved from the configuration.
    """
    dist = cfg.distribution()
    m = cfg.m
    names = {samp for _, samp in roster}
    out = {}
    if "ZeroWait" in names:
        out["ZeroWait"] = ZeroWaitSampler().fit()
    if "ConstantWait" in names:
        out["ConstantWait"] = ConstantWaitSampler(fraction=cfg._num("experiment.constant_fraction")).fit(dist)
    if "Table" in names:
        if table is None:
            table = bisection_solve(dist, cfg.grid(dist), m, cfg.solver())
        check_table_matches(table, cfg)
        out["Table"] = ThresholdSampler.from_table(table)
    if "WaterFill" in names:
        out["WaterFill"] = WaterFillSampler(
            m=m,
            max_wait=cfg._optional("waterfill.max_wait", "none"),
            search_hi=cfg._optional("waterfill.search_hi", "auto"),
            tol=cfg._num("waterfill.tol"),
            n_deliveries=cfg._num("waterfill.n_deliveries", int),
            burn_in=cfg._num("waterfill.burn_in", int),
            seed=cfg._num("waterfill.seed", int),
        ).fit(dist)
    return out


def check_table_matches(table, cfg: ExperimentConfig):
    dist = cfg.distribution()
    tdist = table.space.dist
    if table.space.m != cfg.m:
        raise ConfigError(f"policy table is for m={table.space.m}, config has m={cfg.m}")
    if sorted(zip(tdist.values.tolist(), tdist.probs)) != sorted(zip(dist.values.tolist(), dist.probs)):
        raise ConfigError(f"policy table distribution {tdist.describe()} does not match the config")


def evaluate(cfg: ExperimentConfig, roster=None, table=None) -> list:
    """Simulate every roster entry at the configured point; one row dict per policy."""
    roster = cfg.roster if roster is None else roster
    samplers = build_samplers(cfg, roster, table)
    dist = cfg.distribution()
    sim_cfg = cfg.sim()
    variable = cfg.get("experiment.sweep_variable")
    rows = []
    for sched, samp in roster:
        sampler = samplers[samp]
        est = estimate_with_ci(Scheduler(sched), sampler, dist, cfg.m, sim_cfg, cfg.replications)
        rows.append({
            "schema": SCHEMA_VERSION,
            "policy": f"{sched}+{samp}",
            "variable": variable,
            "value": cfg.get(variable),
            "tapa": est.tapa,
            "tapa_hw": est.tapa_hw,
            "taa": est.taa,
            "taa_hw": est.taa_hw,
            "n": sim_cfg.n_deliveries - sim_cfg.burn_in,
            "replications": cfg.replications,
            "seed": sim_cfg.seed,
            "config_hash": cfg.config_hash(),
            "beta_star": sampler.beta_star_ if samp == "Table" else "",
            "th": sampler.threshold_ if samp == "WaterFill" else "",
        })
    return rows


def _evaluate_values(values) -> list:
    return evaluate(ExperimentConfig(values))


def sweep(cfg: ExperimentConfig, workers=None):
    """Evaluate every sweep point, in parallel up to ``workers``.

    Returns ``(rows, failure)`` where ``rows`` are in sweep order up to the
    first failing point and ``failure`` is ``None`` or ``(value, exception)``.
    """
    key = cfg.get("experiment.sweep_variable")
    points = [cfg.with_value(key, repr(v)) for v in cfg.sweep_values()]
    for point in points:
        point.validate()
    workers = cfg.workers if workers is None else workers
    rows = []
    if workers <= 1:
        for point in points:
            try:
                rows.extend(evaluate(point))
            except AgeSchedError as exc:
                return rows, (point.get(key), exc)
        return rows, None
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(_evaluate_values, point.values) for point in points]
        for point, fut in zip(points, futures):
            try:
                rows.extend(fut.result())
            except AgeSchedError as exc:
                for f in futures:
                    f.cancel()
                return rows, (point.get(key), exc)
    return rows, None


def format_value(v):
    return repr(v) if isinstance(v, float) else str(v)


def rows_to_csv(rows, failure=None) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COLUMNS)
    for row in rows:
        writer.writerow([format_value(row[c]) for c in COLUMNS])
    if failure is not None:
        value, exc = failure
        buf.write(f"# ABORTED at value={value}: {type(exc).__name__}: {exc}\n")
    return buf.getvalue()


__all__ = ["COLUMNS", "SCHEMA_VERSION", "build_samplers", "evaluate", "sweep", "rows_to_csv"]
