"""Exception types shared across the package."""

from __future__ import annotations


class CasimirGasError(Exception):
    """Base class for all errors raised by this package."""


class NonFiniteFieldError(CasimirGasError, ValueError):
    """A field sample is NaN or infinite."""


class PositivityError(CasimirGasError, ValueError):
    """Density dropped to or below its positivity floor."""

    def __init__(self, message: str, stage: int | None = None, time: float | None = None):
        super().__init__(message)
        self.stage = stage
        self.time = time


class DivergenceError(CasimirGasError, RuntimeError):
    """Non-finite values appeared during time integration."""

    def __init__(self, message: str, time: float | None = None):
        super().__init__(message)
        self.time = time


class EvaluationError(CasimirGasError, ValueError):
    """A functional density could not be evaluated on the given state."""


class ManifoldError(CasimirGasError, ValueError):
    """A state violates the constraint-manifold precondition."""


class ParameterError(CasimirGasError, ValueError):
    """A parameter is outside its validity range."""


class NormDegeneracyError(CasimirGasError, ValueError):
    """A quadratic-form weight is not strictly positive, so no norm results."""


class ConfigError(CasimirGasError, ValueError):
    """A run configuration field failed validation."""
