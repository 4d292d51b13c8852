"""Exceptions shared across the package."""


class ConfigurationError(ValueError):
    """Invalid user-facing configuration (grid sizes, coefficients, tolerances)."""


class AssemblyError(RuntimeError):
    """Raised when element assembly hits degenerate geometry."""


class SingularOperatorError(RuntimeError):
    """An operator that must be SPD (or full rank) failed a factorization."""


class PcgBreakdownError(RuntimeError):
    """Conjugate-gradient breakdown: indefinite operator or non-finite iterate."""
