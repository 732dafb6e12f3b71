"""Age-optimal sampling and scheduling for multi-source status updates."""
from .exceptions import (AgeSchedError, ConfigError, ConvergenceError, MissingArtifactError,
                         SimulationError, SolverError, StateSpaceError, VerificationError)
from .model import ServiceDistribution, WaitGrid, evolve_state, lattice_tick, maf_pick, sort_ages
from .oracle import exhaustive_oracle
from .samplers import ConstantWaitSampler, ThresholdSampler, WaterFillSampler, ZeroWaitSampler
from .sim import Scheduler, SimConfig, SimResult, estimate_with_ci, run
from .solver import (PolicyTable, SolverConfig, bisection_solve, build_state_space, rvi_solve,
                     saturating_max_wait, stage_cost, zero_wait_taa, zero_wait_tapa)
from .waterfill import WaterFillPolicy, golden_section_threshold, water_fill_wait

__version__ = "0.1.0"

__all__ = [
    "AgeSchedError", "ConfigError", "ConvergenceError", "MissingArtifactError", "SimulationError",
    "SolverError", "StateSpaceError", "VerificationError",
    "ServiceDistribution", "WaitGrid", "evolve_state", "lattice_tick", "maf_pick", "sort_ages",
    "exhaustive_oracle",
    "ConstantWaitSampler", "ThresholdSampler", "WaterFillSampler", "ZeroWaitSampler",
    "Scheduler", "SimConfig", "SimResult", "estimate_with_ci", "run",
    "PolicyTable", "SolverConfig", "bisection_solve", "build_state_space", "rvi_solve",
    "saturating_max_wait", "stage_cost", "zero_wait_taa", "zero_wait_tapa",
    "WaterFillPolicy", "golden_section_threshold", "water_fill_wait",
]
