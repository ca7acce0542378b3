"""
Unit tests for exceptions.py
"""

import pytest
from src.exceptions import (
    ThermalFieldError,
    DomainError,
    PreconditionError,
    NumericalError,
    CapacityError,
    ProofFailure,
    ThermalConfigError,
)


class TestExceptions:
    """Test cases for custom exception classes."""

    def test_base_error(self):
        """Test base ThermalFieldError exception."""
        error = ThermalFieldError("Base error message")
        assert str(error) == "Base error message"
        assert isinstance(error, Exception)

    def test_precondition_is_domain_error(self):
        """PreconditionError is caught wherever DomainError is."""
        error = PreconditionError("t must be non-zero")
        assert isinstance(error, DomainError)
        assert isinstance(error, ThermalFieldError)

    def test_numerical_error_basic(self):
        """Test NumericalError without tolerances."""
        error = NumericalError("did not certify")
        assert str(error) == "did not certify"
        assert error.achieved_tolerance is None
        assert error.requested_tolerance is None

    def test_numerical_error_with_tolerances(self):
        """Test NumericalError carrying achieved and requested tolerances."""
        error = NumericalError("did not certify", achieved_tolerance=1e-6, requested_tolerance=1e-10)
        assert error.achieved_tolerance == 1e-6
        assert error.requested_tolerance == 1e-10

    def test_proof_failure_residual(self):
        """Test ProofFailure keeps the residual word."""
        error = ProofFailure("stuck", residual="S(f)^-1 S(g)")
        assert str(error) == "stuck"
        assert error.residual == "S(f)^-1 S(g)"
        assert ProofFailure("stuck").residual is None

    def test_capacity_and_config_errors(self):
        """Test the remaining subclasses share the base."""
        for cls in (CapacityError, ThermalConfigError):
            error = cls("message")
            assert isinstance(error, ThermalFieldError)
            assert not isinstance(error, DomainError)

    def test_exception_raising(self):
        """Test that exceptions can be raised and caught by the base class."""
        with pytest.raises(ThermalFieldError, match="outside the strip"):
            raise DomainError("u outside the strip")
