from fractions import Fraction

import pytest

from agesched import ConfigError, MissingArtifactError
from agesched.config import ExperimentConfig, parse_roster


def test_defaults():
    cfg = ExperimentConfig.load()
    assert cfg.m == 3
    d = cfg.distribution()
    assert d.mean == pytest.approx(1.5)
    assert cfg.grid(d).max_wait_time == 3.0
    assert cfg.sweep_values() == [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]
    assert ("MAF", "Table") in cfg.roster


def test_file_and_overrides(tmp_path):
    path = tmp_path / "exp.ini"
    path.write_text("[problem]\nm = 2\ndistribution = 1:0.25, 2:0.75  ; comment\n[sim]\nseed = 42\n")
    cfg = ExperimentConfig.load(path, ["sim.seed=7", "grid.step=0.5"])
    assert cfg.m == 2
    assert cfg.distribution().mean == pytest.approx(1.75)
    assert cfg.sim().seed == 7
    assert cfg.grid(cfg.distribution()).step * cfg.distribution().tick == 0.5


def test_hash_tracks_results_not_workers():
    base = ExperimentConfig.load()
    assert base.config_hash() == ExperimentConfig.load(overrides=["experiment.workers=4"]).config_hash()
    assert base.config_hash() != ExperimentConfig.load(overrides=["sim.seed=2"]).config_hash()


@pytest.mark.parametrize("override,match", [
    ("problem.distribution=0:0.5,3:0.4", "sum"),
    ("problem.p=1.5", "problem.p"),
    ("problem.m=0", "problem.m"),
    ("solver.eps1=-1", "eps1"),
    ("sim.replications=1", "replications"),
    ("experiment.roster=MAF+Nope", "sampler"),
    ("experiment.roster=FIFO+ZeroWait", "scheduler"),
    ("bogus.key=1", "unknown"),
    ("sim.burn_in=2", "burn_in"),
    ("experiment.sweep_step=0", "sweep"),
    ("noequals", "section.key=value"),
])
def test_invalid(override, match):
    with pytest.raises(ConfigError, match=match):
        ExperimentConfig.load(overrides=[override])


def test_explicit_tick_must_fit_grid():
    with pytest.raises(ConfigError, match="multiple of tick size"):
        ExperimentConfig.load(overrides=["problem.tick_size=0.25", "grid.step=0.3"])
    # with the automatic tick the lattice simply becomes finer
    cfg = ExperimentConfig.load(overrides=["grid.step=0.3", "grid.max_wait=3"])
    assert cfg.distribution().tick == Fraction(3, 10)


def test_unknown_key_in_file(tmp_path):
    path = tmp_path / "bad.ini"
    path.write_text("[solver]\nepsilon = 3\n")
    with pytest.raises(ConfigError, match="solver.epsilon"):
        ExperimentConfig.load(path)


def test_missing_file(tmp_path):
    with pytest.raises(MissingArtifactError):
        ExperimentConfig.load(tmp_path / "none.ini")


def test_parse_roster():
    assert parse_roster(" MAF+Table ,RAND+ZeroWait,") == [("MAF", "Table"), ("RAND", "ZeroWait")]
    with pytest.raises(ConfigError):
        parse_roster(" , ")
