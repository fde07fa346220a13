"""Exception types shared across the package."""


class LpmechError(Exception):
    """Base class for all package-specific errors."""


class DimensionMismatch(LpmechError):
    """An input vector or matrix has the wrong size for the map it feeds."""


class ChartExit(LpmechError):
    """A state left the chart through a non-periodic coordinate."""

    def __init__(self, message, q=None, t=None):
        super().__init__(message)
        self.q = q
        self.t = t


class SingularHessian(LpmechError):
    """The velocity-block Hessian is numerically singular (condition > 1e12)."""


class NoConvergence(LpmechError):
    """An iterative solve did not reach the requested tolerance."""


class AxiomViolation(LpmechError):
    """A bundle that must satisfy the closure conditions failed the checker."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class InvarianceViolation(LpmechError):
    """A Lagrangian declared invariant changes under the group action."""

    def __init__(self, message, worst_sample=None, residual=None):
        super().__init__(message)
        self.worst_sample = worst_sample
        self.residual = residual


class NotNormal(LpmechError):
    """The selected subspace is not an ideal of the ambient Lie algebra."""


class NotSupported(LpmechError):
    """The requested construction is outside the implemented scope."""


class ConfigError(LpmechError):
    """A run configuration failed validation; the message names the key."""
