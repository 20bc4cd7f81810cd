"""Exception hierarchy shared by all simulation stages."""


class DecoherenceError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(DecoherenceError, ValueError):
    """Invalid user input detected before any computation starts."""


class DomainError(ValidationError):
    """An argument lies outside the mathematical domain of a function."""


class UnstableModel(ValidationError):
    """The oscillator stiffness matrix is not positive definite."""


class NumericalError(DecoherenceError, ArithmeticError):
    """A numerical stage failed (non-convergence, overflow, instability)."""


class HeisenbergViolation(NumericalError):
    """A covariance undershoots the uncertainty bound beyond tolerance."""


class UnderResolvedPeak(NumericalError):
    """The frequency grid cannot resolve the quasiparticle peak."""


class WindowTooShort(NumericalError):
    """The memory kernel has not decayed at the truncation time."""


class FitFailed(NumericalError):
    """No exponential approach could be fitted to a phase-space-area series."""


class ThermalInstability(NumericalError):
    """The thermal mass shift makes the mode tachyonic; no stationary state exists."""
