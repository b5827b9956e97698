"""Exception hierarchy for kronls."""


class KronLSError(Exception):
    """Base class for all kronls errors."""


class DimensionMismatch(KronLSError, ValueError):
    pass


class RankDeficient(KronLSError):
    """A factor violated the full-rank assumption."""


class SingularTriangular(KronLSError):
    pass


class OverflowGuard(KronLSError):
    """Dense materialization would exceed the configured entry cap."""


class NotPositiveDefinite(KronLSError):
    """CG met a non-positive curvature direction p'Gp <= 0."""


class MaxItersExceeded(KronLSError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class QuadratureFailure(KronLSError):
    pass
