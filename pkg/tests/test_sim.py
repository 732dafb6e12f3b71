import csv
from fractions import Fraction

import numpy as np
import pytest

from agesched import (ConfigError, ConstantWaitSampler, Scheduler, ServiceDistribution, SimConfig,
                      SimulationError, ThresholdSampler, WaterFillPolicy, WaterFillSampler,
                      ZeroWaitSampler,
                      estimate_with_ci, run)
from agesched.sim import SamplerSpec, write_trace_csv


def exact_metrics(trace, m, burn_in):
    """TaPA and TaA from per-source generation times, integrating each age curve separately."""
    gen = [Fraction(0)] * m
    prev = Fraction(0)
    area = Fraction(0)
    peaks = []
    for k, (r, z, y) in enumerate(zip(trace["r"], trace["Z"], trace["Y"])):
        start = prev + Fraction(z)
        now = start + Fraction(y)
        if k >= burn_in:
            area += sum((now * now - prev * prev) / 2 - u * (now - prev) for u in gen)
            peaks.append(now - gen[r])
        gen[r] = start
        prev = now
    # the burn-in window starts at the delivery that ends stage burn_in - 1
    d0 = Fraction(trace["D"][burn_in - 1])
    return float(sum(peaks) / len(peaks)), float(area / (prev - d0))


def zero():
    return ZeroWaitSampler().fit()


@pytest.mark.parametrize("engine", ["kernel", "python"])
@pytest.mark.parametrize("c", [1.0, 2.5])
def test_deterministic_single_source(engine, c):
    d = ServiceDistribution.deterministic(c)
    res = run("MAF", zero(), d, 1, SimConfig(5000, 10, 0), engine=engine)
    assert res.taa == pytest.approx(1.5 * c, rel=1e-12)
    assert res.tapa == pytest.approx(2.0 * c, rel=1e-12)


def test_zero_wait_closed_forms(half):
    res = run("MAF", zero(), half, 3, SimConfig(1_000_000, 1000, 7))
    assert res.tapa == pytest.approx(6.0, rel=0.02)
    assert res.taa == pytest.approx(13.5, rel=0.02)


@pytest.mark.parametrize("sched", ["MAF", "RAND"])
def test_area_against_per_source_integration(half, half_table, sched):
    sampler = ThresholdSampler.from_table(half_table)
    res = run(sched, sampler, half, 3, SimConfig(3000, 50, 4, trace=True))
    tapa, taa = exact_metrics(res.trace, 3, 50)
    assert res.tapa == pytest.approx(tapa, rel=1e-12)
    assert res.taa == pytest.approx(taa, rel=1e-12)


@pytest.mark.parametrize("make", [
    lambda d, t: ZeroWaitSampler().fit(),
    lambda d, t: ConstantWaitSampler().fit(d),
    lambda d, t: WaterFillSampler(threshold=1.2).fit(),
    lambda d, t: ThresholdSampler.from_table(t),
])
@pytest.mark.parametrize("sched", ["MAF", "RAND"])
def test_engines_agree(half, half_table, make, sched):
    sampler = make(half, half_table)
    cfg = SimConfig(4000, 100, 11)
    a = run(sched, sampler, half, 3, cfg, engine="kernel")
    b = run(sched, sampler, half, 3, cfg, engine="python")
    assert a.tapa == pytest.approx(b.tapa, rel=1e-12)
    assert a.taa == pytest.approx(b.taa, rel=1e-12)
    np.testing.assert_allclose(a.final_ages, b.final_ages)
    assert a.fallback_count == b.fallback_count


def test_seeded_runs_repeat(half):
    cfg = SimConfig(20_000, 100, 3)
    a = run("RAND", zero(), half, 3, cfg)
    b = run("RAND", zero(), half, 3, cfg)
    c = run("RAND", zero(), half, 3, SimConfig(20_000, 100, 4))
    assert (a.tapa, a.taa) == (b.tapa, b.taa)
    assert a.taa != c.taa


def test_schedulers_share_service_times(half):
    cfg = SimConfig(1000, 10, 5, trace=True)
    a = run("MAF", zero(), half, 3, cfg)
    b = run("RAND", zero(), half, 3, cfg)
    np.testing.assert_array_equal(a.trace["Y"], b.trace["Y"])
    assert not np.array_equal(a.trace["r"], b.trace["r"])


def test_maf_dominates_rand_epochwise(half):
    for seed in range(3):
        cfg = SimConfig(20_000, 10, seed, trace=True)
        maf = run("MAF", zero(), half, 3, cfg).trace["ages"]
        rand = run("RAND", zero(), half, 3, cfg).trace["ages"]
        assert np.all(maf <= rand + 1e-9)


def test_bare_policy_runs_in_kernel(half):
    res = run("MAF", WaterFillPolicy(1.2, 3), half, 3, SimConfig(4000, 100, 11))
    ref = run("MAF", WaterFillSampler(threshold=1.2).fit(), half, 3, SimConfig(4000, 100, 11))
    assert res.taa == ref.taa


def test_table_fallback_only_during_warmup(half, half_table):
    res = run("MAF", ThresholdSampler.from_table(half_table), half, 3, SimConfig(50_000, 100, 1))
    assert res.last_fallback < 3


def test_replayed_service_sequence(half):
    ys = np.full(100, 3.0)
    res = run("MAF", zero(), half, 1, SimConfig(100, 10, 0, service_sequence=ys))
    assert res.taa == pytest.approx(4.5)


def test_confidence_interval(half):
    est = estimate_with_ci("MAF", zero(), half, 3, SimConfig(20_000, 100, 9), 6)
    taas = np.array([r.taa for r in est.results])
    assert est.taa == pytest.approx(taas.mean())
    assert est.taa_hw == pytest.approx(1.959963984540054 * taas.std(ddof=1) / np.sqrt(6))
    assert len({r.seed[1] for r in est.results}) == 6
    with pytest.raises(ConfigError):
        estimate_with_ci("MAF", zero(), half, 3, SimConfig(20_000, 100, 9), 1)


@pytest.mark.parametrize("cfg", [SimConfig(100, 100, 0), SimConfig(100, 1, 0),
                                 SimConfig(100, 10, 0, initial_ages=(1.0,)),
                                 SimConfig(100, 10, 0, service_sequence=np.zeros(5))])
def test_bad_sim_config(half, cfg):
    with pytest.raises(ConfigError):
        run("MAF", zero(), half, 3, cfg)


def test_invalid_wait_is_rejected(half):
    class Wild:
        def _kernel_spec(self, m):
            return SamplerSpec.constant(2.0, max_wait=1.0)

        def predict(self, X):
            return np.full(len(X), -1.0)

    with pytest.raises(SimulationError):
        run("MAF", Wild(), half, 3, SimConfig(100, 10, 0))
    with pytest.raises(SimulationError):
        run("MAF", Wild(), half, 3, SimConfig(100, 10, 0), engine="python")


def test_table_for_wrong_m(half, half_table):
    with pytest.raises(ConfigError):
        run("MAF", ThresholdSampler.from_table(half_table), half, 2, SimConfig(100, 10, 0))


def test_unknown_scheduler(half):
    with pytest.raises(ValueError):
        run("LIFO", zero(), half, 3, SimConfig(100, 10, 0))
    assert Scheduler("MAF") is Scheduler.MAF


def test_trace_csv(half, tmp_path):
    res = run("MAF", zero(), half, 2, SimConfig(50, 5, 0, trace=True))
    path = tmp_path / "trace.csv"
    write_trace_csv(res, path)
    rows = list(csv.DictReader(path.open()))
    assert len(rows) == 50
    assert list(rows[0]) == ["i", "r", "S", "D", "Z", "Y", "peak", "a1", "a2"]
    assert {r["r"] for r in rows} <= {"1", "2"}
    for r in rows:
        assert float(r["D"]) == pytest.approx(float(r["S"]) + float(r["Y"]))
