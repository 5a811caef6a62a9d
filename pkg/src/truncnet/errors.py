"""Shared exception types."""


class ParameterError(ValueError):
    """A measure or likelihood parameter is outside its valid domain."""


class NonTerminationError(RuntimeError):
    """Rejection sampling exceeded the configured iteration failsafe."""


class InsufficientSupportError(ValueError):
    """Fewer strictly positive rates than the arity requires."""


class QuadratureError(RuntimeError):
    """A quadrature did not converge; carries diagnostics in args."""
