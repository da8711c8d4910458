"""Semantic exception hierarchy.

Every failure mode that callers are expected to handle gets its own class;
plain ValueError/TypeError are reserved for programming errors.
"""


class FracfieldError(Exception):
    """Base class for all package errors."""


class ConfigError(FracfieldError):
    """Invalid or missing configuration (CLI exit code 1)."""


class DegenerateInput(FracfieldError):
    """Geometrically degenerate input: zero norms, coincident points,
    fewer than 3 or collinear points for a triangulation."""


class FactorizationFailure(FracfieldError):
    """The regularized covariance matrix is numerically indefinite
    (signals duplicate or near-duplicate points)."""


class EmptyWindow(FracfieldError):
    """A point-process draw produced zero points."""


class EmptySelection(FracfieldError):
    """No edges/triangles available for a statistic."""


class DegenerateTriangle(FracfieldError):
    """Triangle with |correlation| >= 1 - 1e-10 (collinear within tolerance)."""


class NumericalGuard(FracfieldError):
    """A numerical precondition (e.g. |r| < 1) was violated."""


class MissingGrid(FracfieldError):
    """The sampled scene carries no grid-tagged points."""


class OutOfRange(FracfieldError):
    """Argument outside the mathematical domain of a density/table."""


class QuadratureFailure(FracfieldError):
    """Adaptive quadrature exceeded its refinement budget (CLI exit code 2)."""


class IdentityViolation(FracfieldError):
    """A decomposition identity failed its relative-residual check.
    Raised before any record is persisted; indicates an implementation bug."""


class InsufficientData(FracfieldError):
    """Not enough intensities/replicates to aggregate."""
