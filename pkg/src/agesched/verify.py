"""Self-check batteries: each returns a JSON-friendly dict with ``pass`` and measured residuals."""
from __future__ import annotations

import numpy as np

from .model import ServiceDistribution, WaitGrid
from .oracle import exhaustive_oracle
from .samplers import ConstantWaitSampler, ZeroWaitSampler
from .sim import Scheduler, SimConfig, run
from .solver import (SolverConfig, bisection_solve, build_state_space, rvi_solve,
                     saturating_max_wait, zero_wait_taa)


def tiny_instances():
    """Fixed oracle battery: (label, dist, grid, m), all small enough to enumerate."""
    out = []
    for label, values, m in [
        ("m1_y12_z01", (1, 2), 1),
        ("m1_y03_z01", (0, 3), 1),
        ("m2_y12_z01", (1, 2), 2),
        ("m2_y03_z01", (0, 3), 2),
    ]:
        dist = ServiceDistribution.from_values(values, (0.5, 0.5), tick=1)
        out.append((label, dist, WaitGrid(1, 1, dist.tick), m))
    dist = ServiceDistribution.from_values((0, 1), (0.3, 0.7), tick=1)
    out.append(("m2_y01_z012", dist, WaitGrid(2, 1, dist.tick), 2))
    return out


def monotonicity_violations(space, h, atol, chunk=256) -> int:
    """Pairs ``s <= s'`` componentwise (sorted states) with ``h(s) > h(s') + atol``."""
    states = space.states
    count = 0
    for start in range(0, len(states), chunk):
        block = states[start:start + chunk]
        below = np.all(block[:, None, :] <= states[None, :, :], axis=2)
        worse = h[start:start + chunk, None] > h[None, :] + atol
        count += int(np.count_nonzero(below & worse))
    return count


def oracle_battery(extra=(), cfg: SolverConfig | None = None, cap=10**6, tol=1e-6) -> dict:
    """RVI gain and greedy policy against exhaustive enumeration at several ``beta``."""
    cfg = cfg or SolverConfig()
    cases = []
    for label, dist, grid, m in list(tiny_instances()) + list(extra):
        space = build_state_space(dist, grid, m)
        if len(grid) ** len(space) > cap:
            cases.append({"instance": label, "skipped": f"{len(grid)}^{len(space)} policies exceed cap"})
            continue
        beta_star = bisection_solve(dist, grid, m, cfg, space=space).beta_star
        for beta in (beta_star, 0.5 * zero_wait_taa(dist, m), zero_wait_taa(dist, m)):
            sol = rvi_solve(space, beta, cfg)
            ref = exhaustive_oracle(space, beta, max_policies=cap)
            cases.append({
                "instance": label,
                "beta": beta,
                "states": len(space),
                "residual": abs(sol.lam - ref.gain),
                "policy_agrees": bool(np.array_equal(sol.greedy_wait, ref.policy)),
            })
    checked = [c for c in cases if "residual" in c]
    ok = bool(checked) and all(c["residual"] <= tol and c["policy_agrees"] for c in checked)
    return {"pass": ok, "max_residual": max((c["residual"] for c in checked), default=None),
            "cases": cases}


def threshold_battery(tables) -> dict:
    per = {label: t.threshold_violations() for label, t in tables}
    return {"pass": all(v == 0 for v in per.values()), "violations": per}


def monotonicity_battery(tables, cfg: SolverConfig | None = None) -> dict:
    cfg = cfg or SolverConfig()
    per = {}
    for label, t in tables:
        per[label] = monotonicity_violations(t.space, t.solution.h, 10 * cfg.eps2)
    return {"pass": all(v == 0 for v in per.values()), "violations": per}


def coupling_battery(dist, m, seeds=10, n=100_000, burn_in=None) -> dict:
    """MAF vs RAND on the same service sequence: sorted ages of MAF never exceed RAND's."""
    burn_in = m if burn_in is None else burn_in
    samplers = {"ZeroWait": ZeroWaitSampler().fit(),
                "ConstantWait": ConstantWaitSampler().fit(dist)}
    epochs = dominated = 0
    worst = 0.0
    for name, sampler in samplers.items():
        for seed in range(seeds):
            cfg = SimConfig(n, burn_in, seed, trace=True)
            maf = run(Scheduler.MAF, sampler, dist, m, cfg).trace["ages"]
            rand = run(Scheduler.RAND, sampler, dist, m, cfg).trace["ages"]
            gap = (maf - rand).max(axis=1)
            epochs += len(gap)
            dominated += int(np.count_nonzero(gap <= 1e-9 * np.maximum(1.0, rand.max(axis=1))))
            worst = max(worst, float(gap.max()))
    frac = dominated / epochs
    return {"pass": frac == 1.0, "fraction_dominated": frac, "epochs": epochs,
            "max_excess": worst, "seeds": seeds, "deliveries": n}


def saturation_battery(dist, grid: WaitGrid, m, cfg: SolverConfig | None = None) -> dict:
    """Doubling the largest wait must not move ``beta*`` or the policy on the smaller space."""
    cfg = cfg or SolverConfig()
    small = bisection_solve(dist, grid, m, cfg)
    big = bisection_solve(dist, grid.scaled(2), m, cfg)
    drift = abs(big.beta_star - small.beta_star)
    changed = sum(1 for s, w in small.as_dict().items() if big.wait_for(s) != w)
    return {"pass": drift <= cfg.eps1 and changed == 0, "beta_small": small.beta_star,
            "beta_doubled": big.beta_star, "drift": drift, "policy_changes": changed,
            "states_small": len(small.space), "states_doubled": len(big.space)}


def run_all(dist, grid, m, cfg: SolverConfig | None = None, coupling_seeds=10,
            coupling_deliveries=100_000, oracle_cap=10**6) -> dict:
    """All batteries on the fixed tiny instances plus the configured one."""
    cfg = cfg or SolverConfig()
    tables = [(label, bisection_solve(d, g, mm, cfg)) for label, d, g, mm in tiny_instances()]
    tables.append(("configured", bisection_solve(dist, grid, m, cfg)))
    report = {
        "oracle": oracle_battery([("configured", dist, grid, m)], cfg, cap=oracle_cap),
        "threshold": threshold_battery(tables),
        "monotonicity": monotonicity_battery(tables, cfg),
        "coupling": coupling_battery(dist, m, coupling_seeds, coupling_deliveries),
        "saturation": saturation_battery(dist, grid, m, cfg),
    }
    report["pass"] = all(b["pass"] for b in report.values())
    return report


__all__ = ["run_all", "oracle_battery", "threshold_battery", "monotonicity_battery",
           "coupling_battery", "saturation_battery", "monotonicity_violations",
           "tiny_instances", "saturating_max_wait"]
