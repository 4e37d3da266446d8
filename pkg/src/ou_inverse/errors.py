"""Exception and warning types shared across the package."""


class OUError(Exception):
    """Base class for all package errors."""


class HurwitzViolation(OUError):
    """The drift matrix has an eigenvalue with nonnegative real part."""


class DomainTooSmall(OUError):
    """The periodic box is too small for the data to decay at its boundary."""


class DomainError(OUError, ValueError):
    """An argument lies outside the domain of a formula."""


class QuadratureError(OUError):
    """Adaptive quadrature failed to meet its tolerance."""


class FractionalUnsupported(OUError):
    """The requested formula only exists for s = 1."""


class DegenerateNorm(OUError):
    """A norm underflowed so far that ratios involving it are meaningless."""


class ResolutionTooCoarse(OUError):
    """The grid cannot resolve the requested geometric scale."""


class GridMismatch(OUError, ValueError):
    """Two objects live on different grids."""


class MissingDerivative(OUError):
    """An H1-in-time norm was requested but no derivative channel exists."""


class RegimeRefused(OUError):
    """The requested sweep lies outside the observability regime s > 1/2."""


class ConfigError(OUError):
    """Malformed or incomplete experiment configuration."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


class DomainTooSmallWarning(UserWarning):
    pass


class FrequencyBoxExceeded(UserWarning):
    pass


class NonConvergence(UserWarning):
    pass
