"""Exception types shared across the package.

Exit-code mapping used by the CLI: ConfigError -> 1, SimulationError
(and subclasses) -> 2, AnalysisError (and subclasses) -> 3.
"""

from __future__ import annotations


class SisycoolError(Exception):
    """Base class for all package errors."""


class ConfigError(SisycoolError):
    """Invalid configuration or parameter set.

    Parameters
    ----------
    diagnostics : list of (key_path, message) pairs, one per problem.
    """

    def __init__(self, diagnostics):
        if isinstance(diagnostics, str):
            diagnostics = [("", diagnostics)]
        self.diagnostics = list(diagnostics)
        lines = [f"{path}: {msg}" if path else msg for path, msg in self.diagnostics]
        super().__init__("invalid configuration:\n  " + "\n  ".join(lines))


class SimulationError(SisycoolError):
    """Failure while integrating trajectories."""


class IntegrationDivergedError(SimulationError):
    """Non-finite state encountered during stepping."""

    def __init__(self, trajectory_index: int, step: int):
        self.trajectory_index = int(trajectory_index)
        self.step = int(step)
        super().__init__(
            f"non-finite state in trajectory {self.trajectory_index} at step {self.step}"
        )


class AnalysisError(SisycoolError):
    """Failure in a fitting or estimation routine."""


class FitFailedError(AnalysisError):
    """Optimizer did not converge; carries the residual-norm trace."""

    def __init__(self, message: str, trace=None):
        self.trace = list(trace) if trace is not None else []
        if self.trace:
            tail = ", ".join(f"{r:.3e}" for r in self.trace[-5:])
            message = f"{message} (last residual norms: {tail})"
        super().__init__(message)


class InsufficientDataError(AnalysisError):
    """Too few points or too small a subpopulation to estimate anything."""


class DriftCalibrationError(AnalysisError):
    """Drift-friction probe forces outside the usable window."""
