"""Exception types raised across the package."""


class ArtifactError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(ArtifactError, ValueError):
    """Input outside the admissible range (dimension, exponent, mode index, t)."""


class CertificateError(ArtifactError):
    """A numerical certificate (sign or identity check) failed."""


class MissingDerivative(ArtifactError):
    """An operation needing derivative samples got a field without them."""


class QuadratureError(ArtifactError):
    """Quadrature could not reach the requested tolerance."""


class ConvergenceError(ArtifactError):
    """An extrapolation or iterative estimate failed to converge."""


class SingularMatrix(ArtifactError):
    """A discrete linear system was numerically singular."""


class GridMismatch(ArtifactError):
    """Fields that must share a grid do not."""


class SearchExhausted(ArtifactError):
    """No parameter triple in the search box passed both certificates."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class MaxIterations(ArtifactError):
    """Picard iteration hit its iteration budget without converging."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class BallEscape(ArtifactError):
    """A Picard iterate left the ball of radius R."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class PositivityViolation(ArtifactError):
    """u or v is non-positive at some node."""

    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


class BoundViolation(ArtifactError):
    """An explicit lower bound was violated at some node."""

    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


class ConfigError(ArtifactError, ValueError):
    """Invalid run configuration; ``path`` names the offending field."""

    def __init__(self, path, reason):
        super().__init__(f"{path}: {reason}")
        self.path = path
        self.reason = reason
