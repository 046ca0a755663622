"""Exception types shared across the package."""


class ContactOptError(Exception):
    """Base class for all package-specific errors."""


class DomainError(ContactOptError, ValueError):
    """An input lies outside the documented domain of an operation."""


class MeshQualityError(ContactOptError):
    """A generated mesh is tangled or violates a geometric limit."""


class TopologyError(ContactOptError):
    """Mesh topology changed where it is required to stay fixed."""


class AssemblyError(ContactOptError):
    """Finite element assembly received inconsistent inputs."""


class FactorizationError(ContactOptError):
    """A matrix expected to be positive definite failed to factor.

    Attributes:
        pivot: 1-based index of the first non-positive pivot, if known.
    """

    def __init__(self, message, pivot=None):
        super().__init__(message)
        self.pivot = pivot


class RankError(ContactOptError):
    """A constraint block is rank deficient (e.g. duplicated rows)."""


class ForwardSolveError(ContactOptError):
    """The contact QP solver failed to converge.

    Attributes:
        residuals: KKT residual record at the final iterate, if available.
    """

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals


class DegeneracyError(ContactOptError):
    """Strict complementarity failed at the converged contact state.

    The design derivative of the contact solution is not defined when a
    constraint has both a (near-)zero gap and a (near-)zero multiplier.

    Attributes:
        indices: constraint rows that are degenerate.
    """

    def __init__(self, message, indices=()):
        super().__init__(message)
        self.indices = tuple(int(i) for i in indices)


class GpFitError(ContactOptError):
    """Gaussian process training failed (e.g. irreparably singular kernel)."""


class InfeasibleExit(ContactOptError):
    """The NLP solver could not restore feasibility.

    Attributes:
        best: best iterate found (rho, objective, violation) or None.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class ConfigError(ContactOptError, ValueError):
    """A run configuration file is malformed or contains unknown keys."""
