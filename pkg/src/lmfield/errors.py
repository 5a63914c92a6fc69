"""Exception hierarchy shared by every module."""

from __future__ import annotations


class LmFieldError(Exception):
    """Base class for all package errors."""


class ParameterError(LmFieldError, ValueError):
    """A parameter lies outside its admissible range."""


class SingularPointError(LmFieldError, ValueError):
    """The filter is infinite at the requested point."""


class QuadratureBudgetError(LmFieldError, RuntimeError):
    """Quadrature did not reach its tolerance within the panel budget."""

    def __init__(self, message: str, estimate: float) -> None:
        super().__init__(f"{message} (last error estimate {estimate:.3e})")
        self.estimate = estimate


class DivergenceError(LmFieldError, ArithmeticError):
    """An integral that should be finite does not stabilise under refinement."""


class ResourceError(LmFieldError, MemoryError):
    """A request exceeds the configured memory or size budget."""


class SymmetryError(LmFieldError, RuntimeError):
    """Spectral synthesis produced a non-negligible imaginary part."""


class FactorizationError(LmFieldError, ArithmeticError):
    """A covariance matrix is not positive definite even after jitter."""


class ContractError(LmFieldError, ValueError):
    """A statistic was requested on data that cannot support it."""


class AdmissibilityError(LmFieldError, ValueError):
    """An experiment configuration violates the regime it declares."""


class ConfigError(LmFieldError, ValueError):
    """A configuration file is malformed."""
