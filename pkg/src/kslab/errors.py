"""Exception types shared by the package."""


class KSLabError(Exception):
    """Base class for all package errors."""


class ConfigurationError(KSLabError, ValueError):
    """Invalid grid, norm or run configuration."""


class ContractError(KSLabError, ValueError):
    """An input violates the documented precondition of an operation."""


class DomainError(KSLabError, ValueError):
    """A parameter lies outside the mathematical domain of the operation."""


class SolverError(KSLabError, RuntimeError):
    """An iterative solver failed to converge."""

    def __init__(self, message, residual=None):
        super().__init__(message if residual is None else f"{message} (residual {residual:.3e})")
        self.residual = residual


class PropertyViolation(KSLabError, AssertionError):
    """A checked mathematical property failed; the message names the property."""
