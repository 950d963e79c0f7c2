"""Exception and warning classes raised across the package."""


class ThermalWickError(Exception):
    """Base class for all package errors."""


class NonHermitianInput(ThermalWickError, ValueError):
    pass


class OrderViolation(ThermalWickError, ValueError):
    """A word is not cyclically ordered in imaginary time."""


class StarClosureError(ThermalWickError, ValueError):
    """A generator set is not closed under the star operation."""


class ReflectionRangeError(ThermalWickError, ValueError):
    """A half-word has an angle outside the open interval (0, beta/2)."""


class TubeViolation(ThermalWickError, ValueError):
    """A complex time sample lies outside the closed tube."""


class SizeLimit(ThermalWickError, ValueError):
    """A word basis exceeds the configured cap."""


class OraclePSDViolation(ThermalWickError, ValueError):
    """A Gram matrix has a significantly negative eigenvalue."""


class RankZero(ThermalWickError, ValueError):
    pass


class EmptyDomain(ThermalWickError, ValueError):
    pass


class NonPositiveSemigroup(ThermalWickError, ValueError):
    """The compressed shift operator is not strictly positive.

    Attributes
    ----------
    eigenvalue : float
        The offending generalized eigenvalue.
    eigenvector : ndarray
        Its eigenvector in whitened coordinates.
    """

    def __init__(self, message, eigenvalue=None, eigenvector=None):
        super().__init__(message)
        self.eigenvalue = eigenvalue
        self.eigenvector = eigenvector


class ClosureError(ThermalWickError, ValueError):
    """A reflected word is missing from the basis."""


class NormViolation(ThermalWickError, ValueError):
    pass


class SeparatingFailure(ThermalWickError, ValueError):
    pass


class ConfigError(ThermalWickError, ValueError):
    pass


class TruncationWarning(UserWarning):
    pass


class QuadratureWarning(UserWarning):
    pass
