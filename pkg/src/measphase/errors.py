"""Exception types raised across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain an operation is defined on."""


class AnnihilationError(ArithmeticError):
    """A Kraus operator mapped the state to (numerically) zero."""


class GeodesicError(ValueError):
    """Consecutive states are antipodal, so the connecting geodesic is undefined."""


class AmbiguityError(ValueError):
    """Neighbouring phase samples differ by exactly pi; refine the grid."""


class NoTransitionError(RuntimeError):
    """The topological index is the same at both ends of a bracket."""


class TermLimitError(MemoryError):
    """A beam field grew past the configured term cap."""


class NonQuantizedWarning(UserWarning):
    """The phase winding is far from a multiple of 2*pi."""
