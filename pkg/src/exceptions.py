"""
Thermal KMS Toolkit Exceptions

Custom exception classes shared by the numerical, combinatorial and
symbolic layers. The CLI maps them onto exit codes.
"""

from typing import Optional


class ThermalFieldError(Exception):
    """Base exception for all toolkit errors."""
    pass


class DomainError(ThermalFieldError):
    """Input outside the admissible domain of an operation."""
    pass


class PreconditionError(DomainError):
    """A stated precondition of an operation does not hold."""
    pass


class NumericalError(ThermalFieldError):
    """A quadrature or extrapolation that could not be certified."""

    def __init__(self, message: str, achieved_tolerance: Optional[float] = None,
                 requested_tolerance: Optional[float] = None):
        super().__init__(message)
        self.achieved_tolerance = achieved_tolerance
        self.requested_tolerance = requested_tolerance


class CapacityError(ThermalFieldError):
    """Combinatorial guard exceeded."""
    pass


class ProofFailure(ThermalFieldError):
    """Proof search exhausted or a trace failed to replay."""

    def __init__(self, message: str, residual: Optional[str] = None):
        super().__init__(message)
        self.residual = residual


class ThermalConfigError(ThermalFieldError):
    """Configuration-related errors."""
    pass
