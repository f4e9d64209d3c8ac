"""
Error hierarchy for qtraj.
Every numerical service raises a subclass of QTrajError so the CLI can map
failures to an exit status without catching unrelated exceptions.
"""


class QTrajError(Exception):
    """Base class for all toolkit errors."""


class EvaluationError(QTrajError):
    """An integrand or callable produced non-finite values."""


class BracketError(QTrajError):
    """Root bracket does not contain a sign change."""


class SingularSystemError(QTrajError):
    """Linear system is singular (reports the near-null direction count)."""

    def __init__(self, message: str, near_null: int):
        super().__init__(message)
        self.near_null = near_null


class SymmetryError(QTrajError):
    """Input violates a required (Hermitian / symmetric) symmetry."""


class ModeSolveError(QTrajError):
    """Eigenmode equation could not be solved inside its bracket."""


class DomainError(QTrajError):
    """Argument outside the domain of the operation."""


class ResolutionError(QTrajError):
    """Grid too coarse to resolve the requested quantity."""


class UnsupportedPotentialError(QTrajError):
    """Potential kind not supported by this operation."""


class DerivativeError(QTrajError):
    """Potential derivative data unavailable."""


class UnsupportedOrderError(QTrajError):
    """Derivative order outside the supported range."""


class IntegrationError(QTrajError):
    """Quadrature failed to converge."""


class UndefinedStatsError(QTrajError):
    """Statistics requested for an identically zero density."""


class SeparabilityError(QTrajError):
    """Two-particle field is not (weakly) separable."""


class ShapeError(QTrajError):
    """Sampled arrays have incompatible shapes or grids."""


class ConfigError(QTrajError):
    """Invalid run configuration."""


class ArtifactError(QTrajError):
    """Artifact missing or unreadable."""
