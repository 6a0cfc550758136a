"""Exception types shared across the package."""


class HvarError(Exception):
    """Base class for all library errors."""


class UsageError(HvarError, ValueError):
    """Bad arguments: dimension mismatch, out-of-range parameters, invalid data."""


class SingularityError(HvarError, ValueError):
    """A kernel was evaluated at the identity, or a retained pair has zero distance."""


class ResourceError(HvarError, MemoryError):
    """A discretization would exceed the configured node cap."""


class SolverError(HvarError, RuntimeError):
    """An iterative solver failed to converge.

    ``details`` carries diagnostic data (residuals, worst node, ...) that the
    CLI copies into its JSON report.
    """

    def __init__(self, message, details=None):
        super().__init__(message)
        self.details = dict(details or {})
