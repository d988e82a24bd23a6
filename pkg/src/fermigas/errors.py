"""Exception types shared across the package."""


class FermigasError(Exception):
    """Base class for all package errors."""


class GeometryError(FermigasError):
    """Incompatible geometry, e.g. potential support does not fit the box."""


class AdmissibilityError(FermigasError):
    """Requested particle number is not a closed-shell size."""


class ResourceLimitError(FermigasError):
    """Enumeration or basis size exceeds the configured cap."""


class AccuracyError(FermigasError):
    """A quadrature or solver could not reach the requested accuracy."""


class ConvergenceError(FermigasError):
    """An iterative solver failed to converge."""


class ParameterError(FermigasError):
    """Parameters outside the admissible regime (window overlap, signs, ...)."""
