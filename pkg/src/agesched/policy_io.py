"""Plain-text serialization of solved policy tables.

Layout (tab separated header keys, then one line per state)::

    # agesched policy-table v1
    m	3
    tick_size	1/4
    beta_star	13.341771125793457
    cutoff	8.841771125793457
    grid	12 1
    distribution	0:0.5,12:0.5
    convention	standard
    states	1250
    48 36 12	0
    ...

Ages and waits are in ticks; floats are written with ``repr`` so that a
save/load cycle is bit-exact.
"""
from __future__ import annotations

from fractions import Fraction
from pathlib import Path

import numpy as np

from .exceptions import ConfigError, MissingArtifactError
from .model import ServiceDistribution, WaitGrid
from .solver import PolicyTable, build_state_space

MAGIC = "# agesched policy-table v1"


def dumps(table: PolicyTable) -> str:
    space = table.space
    lines = [
        MAGIC,
        f"m\t{space.m}",
        f"tick_size\t{space.dist.tick}",
        f"beta_star\t{table.beta_star!r}",
        f"cutoff\t{table.threshold_cutoff!r}",
        f"grid\t{space.grid.max_wait} {space.grid.step}",
        f"distribution\t{space.dist.describe()}",
        f"convention\t{table.convention}",
        f"states\t{len(space)}",
    ]
    for row, w in zip(space.states, table.wait):
        lines.append(" ".join(str(int(a)) for a in row) + f"\t{int(w)}")
    return "\n".join(lines) + "\n"


def loads(text: str) -> PolicyTable:
    lines = text.splitlines()
    if not lines or lines[0].strip() != MAGIC:
        raise ConfigError("not a policy-table v1 file")
    header = {}
    pos = 1
    while pos < len(lines):
        key, _, value = lines[pos].partition("\t")
        header[key] = value
        pos += 1
        if key == "states":
            break
    try:
        m = int(header["m"])
        tick = Fraction(header["tick_size"])
        beta_star = float(header["beta_star"])
        grid_max, grid_step = (int(v) for v in header["grid"].split())
        pairs = [item.split(":") for item in header["distribution"].split(",")]
        n = int(header["states"])
        convention = header.get("convention", "standard")
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"malformed policy-table header: {exc}") from None

    dist = ServiceDistribution(tuple(int(t) for t, _ in pairs), tuple(float(p) for _, p in pairs), tick)
    grid = WaitGrid(grid_max, grid_step, tick)
    space = build_state_space(dist, grid, m)
    body = lines[pos:pos + n]
    if len(body) != n or len(space) != n:
        raise ConfigError(f"policy table lists {len(body)} states, expected {len(space)}")
    wait = np.empty(n, dtype=np.int64)
    for line in body:
        ages, _, w = line.partition("\t")
        state = tuple(int(a) for a in ages.split())
        if state not in space.index:
            raise ConfigError(f"state {state} is not in the recurrent class")
        wait[space.index[state]] = int(w)
    return PolicyTable(space, wait, beta_star, convention=convention)


def save(table: PolicyTable, path) -> Path:
    path = Path(path)
    path.write_text(dumps(table))
    return path


def load(path) -> PolicyTable:
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError(f"policy file {path} not found")
    return loads(path.read_text())
