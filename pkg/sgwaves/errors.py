"""Exception types raised by the sgwaves solvers and CLI."""

from typing import Optional


class ParameterError(ValueError):
    """A solver precondition was violated by the caller's inputs."""


class UndefinedVelocityError(ParameterError):
    """Velocity is a free parameter: (alpha, mu) = (0, 0)."""


class DegenerateVelocityError(ParameterError):
    """Luminal case |v| = 1, where the reduced equation loses its second derivative."""


class CflError(ParameterError):
    """Time step violates dt <= 0.9 dx."""


class DomainError(ParameterError):
    """Grid or domain cannot host the requested profile."""


class ConfigError(ValueError):
    """Malformed configuration file or unknown key."""


class SolverError(RuntimeError):
    """A numerical procedure failed to produce a result."""


class StiffnessError(SolverError):
    """Adaptive step size underflowed."""


class AmbiguousFateError(SolverError):
    """Shot trajectory reached the horizon without a decisive event."""


class BracketError(SolverError):
    """A root bracket could not be established."""


class FrontNotFoundError(SolverError):
    """No crossing of the tracking level in a field snapshot."""


class BlowUpError(SolverError):
    """PDE field became non-finite."""

    def __init__(self, message: str, t: Optional[float] = None, diagnostics=None):
        super().__init__(message)
        self.t = t
        self.diagnostics = diagnostics
