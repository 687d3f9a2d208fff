"""Exception hierarchy shared by every module."""


class TopoIndexError(Exception):
    """Base class for all errors raised by the package."""


class DomainError(TopoIndexError, ValueError):
    """Arguments outside the domain an operation is defined on."""


class SymmetryError(TopoIndexError):
    """A construction would break the declared symmetry."""


class ResourceError(TopoIndexError):
    """Requested problem exceeds a configured size cap."""


class NumericalError(TopoIndexError):
    """An iterative or ill-conditioned computation failed.

    ``residual`` carries the last measured residual (or condition
    estimate) when one is available.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class RefinementError(NumericalError):
    """A path evaluation needs a finer grid than it was given."""


class ConfigError(TopoIndexError):
    """Malformed run configuration."""
