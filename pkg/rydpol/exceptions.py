# rydpol/exceptions.py
"""
Error hierarchy for the simulation engine.

Every error carries the process exit code the CLI reports for it: 2 for
configuration errors, 3 for solver and numerical failures, 4 for failed
verification checks and 5 for output I/O.
"""
from typing import Any, Dict, Optional, Tuple

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_VERIFY = 4
EXIT_OUTPUT = 5


class RydpolError(Exception):
    """Base class for all engine errors."""

    exit_code: int = EXIT_SOLVER

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


class DomainError(RydpolError, ValueError):
    """Invalid quantum numbers, polarizations, rates, grids or axes."""

    exit_code = EXIT_CONFIG


class ConfigError(RydpolError, ValueError):
    """Scenario configuration failed validation."""

    exit_code = EXIT_CONFIG

    def __init__(self, detail: str, errors: Optional[list] = None):
        super().__init__(detail)
        self.errors = errors or []


class SolverError(RydpolError):
    """Steady-state solve failed (singular or non-unique Liouvillian)."""

    exit_code = EXIT_SOLVER

    def __init__(
        self,
        detail: str,
        diagnostics: Optional[Dict[str, Any]] = None,
        grid_point: Optional[Tuple[float, float]] = None,
    ):
        if grid_point is not None:
            detail = f"{detail} (theta={grid_point[0]:g} deg, detuning={grid_point[1]:g} rad/s)"
        super().__init__(detail)
        self.diagnostics = diagnostics or {}
        self.grid_point = grid_point

    def at(self, theta_deg: float, detuning: float) -> "SolverError":
        """Return a copy of this error tagged with grid coordinates."""
        return SolverError(self.args[0], self.diagnostics, (theta_deg, detuning))


class NumericalConsistencyError(RydpolError):
    """A computed quantity violates a physical bound (e.g. negative extinction)."""

    exit_code = EXIT_SOLVER


class IntegratorError(RydpolError):
    """Time integration of the master equation failed."""

    exit_code = EXIT_SOLVER


class VerificationError(RydpolError):
    """One or more oracle checks failed."""

    exit_code = EXIT_VERIFY


class OutputError(RydpolError):
    """Artifacts could not be written."""

    exit_code = EXIT_OUTPUT
