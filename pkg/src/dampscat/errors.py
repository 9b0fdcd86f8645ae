"""Exception hierarchy.

Argument and precondition problems derive from :class:`ValueError` so that
callers can treat them like ordinary bad input; numerical breakdowns derive
from :class:`NumericalError` and map to exit code 4 in the CLI.
"""


class DampscatError(Exception):
    """Base class for all package errors."""


class DomainError(DampscatError, ValueError):
    """Argument outside the domain of an operation."""


class RegimeError(DomainError):
    """Operation requires a different dissipation regime."""


class ConfigError(DampscatError, ValueError):
    """Malformed or inconsistent experiment configuration."""


class ValidationError(DampscatError):
    """A declared hypothesis is contradicted by sampled values.

    Attributes
    ----------
    witness : float or None
        Time at which the contradiction was observed.
    """

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class CheckFailure(DampscatError):
    """A verification criterion did not hold."""


class NumericalError(DampscatError):
    """Base class for numerical breakdowns."""


class StiffnessError(NumericalError):
    """Step size underflow in the adaptive integrator."""

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class QuadratureError(NumericalError):
    """Adaptive quadrature failed to reach the requested tolerance."""

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class SeriesDivergenceError(NumericalError):
    """Iterated-integral series or Picard iteration did not converge."""


class HorizonError(NumericalError):
    """A limit t -> infinity was not resolved before the horizon cap."""

    def __init__(self, message, achieved=None, horizon=None):
        super().__init__(message)
        self.achieved = achieved
        self.horizon = horizon


class InconsistencyError(NumericalError):
    """Two independent computation paths disagree."""


class ZoneConstantError(NumericalError):
    """The zone constant N is too small: det N_1 is not positive."""


class SingularMatrixError(NumericalError):
    """A matrix that must be invertible is numerically singular."""
