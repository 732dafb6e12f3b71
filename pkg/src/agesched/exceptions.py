"""Exception hierarchy.  CLI exit codes hang off these classes."""


class AgeSchedError(Exception):
    exit_code = 1


class ConfigError(AgeSchedError, ValueError):
    """Invalid problem description (distribution, grid, config file)."""

    exit_code = 2


class MissingArtifactError(AgeSchedError, FileNotFoundError):
    exit_code = 3


class SolverError(AgeSchedError, RuntimeError):
    exit_code = 4


class ConvergenceError(SolverError):
    """Relative value iteration did not reach the requested tolerance."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class StateSpaceError(SolverError):
    """State space too large, or not closed under the transition kernel."""


class SimulationError(AgeSchedError, RuntimeError):
    exit_code = 4


class VerificationError(AgeSchedError):
    exit_code = 5
