"""Exception hierarchy shared by all cylfmm modules."""


class CylFMMError(Exception):
    """Base class for errors raised by cylfmm."""


class DomainError(CylFMMError, ValueError):
    """An argument lies outside the domain of the function."""


class SingularityError(DomainError):
    """Source and field rings coincide (or nearly so); the kernel is singular."""

    def __init__(self, message, pair=None):
        super().__init__(message)
        self.pair = pair


class PrecisionLossError(CylFMMError, ArithmeticError):
    """A computed quantity underflowed or lost all significant digits."""


class ConfigurationError(CylFMMError, ValueError):
    """Unsupported tree depth, expansion order or option combination."""


class ConvergenceError(CylFMMError, RuntimeError):
    """An iterative or adaptive procedure failed to reach its tolerance."""
