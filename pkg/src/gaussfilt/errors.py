"""Exception types shared across the package."""


class GaussFiltError(Exception):
    """Base class for all package errors."""


class NotPositiveDefinite(GaussFiltError):
    """Factorization failed even after maximal jitter."""


class SingularInnovationCov(GaussFiltError):
    """Innovation covariance is numerically singular."""


class SingularMatrix(GaussFiltError):
    """Matrix required to be invertible is numerically singular."""


class SingularHessian(GaussFiltError):
    """Misfit Hessian at the minimizer could not be inverted."""


class DivergedEvaluation(GaussFiltError):
    """A pushed point left the model's finite domain (e.g. stiff dynamics)."""


class DimensionMismatch(GaussFiltError):
    """Operands have incompatible dimensions."""


class InvalidDimension(GaussFiltError):
    """Requested dimension is out of range."""


class Unsupported(GaussFiltError):
    """Request exceeds a built-in guard (e.g. moment degree/dimension)."""


class OptimizerDidNotConverge(GaussFiltError):
    """Gradient norm still above tolerance after the iteration budget."""


class LineSearchFailed(GaussFiltError):
    """Backtracking line search could not find an acceptable step."""


class LengthMismatch(GaussFiltError):
    """Sequences expected to have equal length do not."""


class ConfigError(GaussFiltError):
    """Experiment configuration is invalid."""
