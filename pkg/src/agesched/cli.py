"""Command-line front end: ``agesched {solve,simulate,sweep,verify}``.

Exit codes: 0 ok, 2 config error, 3 missing artifact, 4 solver or
simulation failure, 5 verification failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import policy_io
from .config import ExperimentConfig, parse_roster
from .exceptions import AgeSchedError, ConvergenceError, MissingArtifactError, VerificationError
from .experiment import evaluate, rows_to_csv, sweep
from .solver import bisection_solve
from .verify import run_all


def _load(args) -> ExperimentConfig:
    overrides = list(args.set or [])
    if args.seed is not None:
        overrides.append(f"sim.seed={args.seed}")
    if getattr(args, "workers", None) is not None:
        overrides.append(f"experiment.workers={args.workers}")
    return ExperimentConfig.load(args.config, overrides)


def _emit(text, output):
    if output is None or output == "-":
        sys.stdout.write(text)
    else:
        Path(output).write_text(text)


def cmd_solve(args) -> int:
    cfg = _load(args)
    dist = cfg.distribution()
    grid = cfg.grid(dist)
    table = bisection_solve(dist, grid, cfg.m, cfg.solver())
    out = policy_io.save(table, args.output or "policy.txt")
    rvi_iters = [step.rvi_iterations for step in table.history]
    summary = {
        "policy_file": str(out),
        "beta_star": table.beta_star,
        "cutoff": table.threshold_cutoff,
        "states": len(table.space),
        "max_wait": float(grid.max_wait_time),
        "wait_step": float(grid.step * dist.tick),
        "bisection_steps": len(table.history),
        "rvi_iterations_total": sum(rvi_iters),
        "rvi_iterations_max": max(rvi_iters, default=0),
        "threshold_violations": table.threshold_violations(),
        "threshold_property_verified": table.threshold_violations() == 0,
        "config_hash": cfg.config_hash(),
    }
    for key, value in summary.items():
        print(f"{key}: {json.dumps(value) if isinstance(value, bool) else value}")
    return 0


def cmd_simulate(args) -> int:
    cfg = _load(args)
    roster = parse_roster(",".join(args.policy)) if args.policy else cfg.roster
    table = None
    if any(samp == "Table" for _, samp in roster):
        if args.policy_file is None:
            raise MissingArtifactError("the Table sampler needs a solved policy file (--policy-file)")
        table = policy_io.load(args.policy_file)
    _emit(rows_to_csv(evaluate(cfg, roster, table)), args.output)
    return 0


def cmd_sweep(args) -> int:
    cfg = _load(args)
    rows, failure = sweep(cfg)
    _emit(rows_to_csv(rows, failure), args.output)
    if failure is not None:
        value, exc = failure
        print(f"error: sweep aborted at {value}: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


def cmd_verify(args) -> int:
    cfg = _load(args)
    dist = cfg.distribution()
    report = run_all(
        dist, cfg.grid(dist), cfg.m, cfg.solver(),
        coupling_seeds=cfg._num("verify.coupling_seeds", int),
        coupling_deliveries=cfg._num("verify.coupling_deliveries", int),
        oracle_cap=cfg._num("verify.oracle_cap", int),
    )
    report["config_hash"] = cfg.config_hash()
    _emit(json.dumps(report, indent=2, default=float) + "\n", args.output)
    if not report["pass"]:
        failed = [k for k, v in report.items() if isinstance(v, dict) and not v["pass"]]
        raise VerificationError(f"failed batteries: {', '.join(failed)}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="agesched", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", "-c", help="INI file with [problem], [grid], [solver], ... sections")
    common.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                        help="override one config key (repeatable)")
    common.add_argument("--seed", type=int, help="override sim.seed")
    common.add_argument("--output", "-o", help="output path (default: stdout; policy.txt for solve)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", parents=[common], help="solve for the optimal threshold policy table")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("simulate", parents=[common], help="simulate roster policies at one point")
    p.add_argument("--policy", action="append", metavar="SCHED+SAMPLER",
                   help="policy to simulate, e.g. MAF+Table (repeatable; default: config roster)")
    p.add_argument("--policy-file", help="policy table written by 'solve'")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", parents=[common], help="simulate the roster across the sweep range")
    p.add_argument("--workers", type=int, help="override experiment.workers")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", parents=[common], help="run the self-check batteries")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except AgeSchedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        if isinstance(exc, ConvergenceError):
            print(f"residual: {exc.residual}\niterations: {exc.iterations}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
