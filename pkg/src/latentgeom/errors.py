"""Exception types raised by the library."""


class GeometryError(Exception):
    """Base class for numerical failures in this package."""


class EvaluationError(GeometryError):
    """A metric or model produced non-finite values."""

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class DegenerateInputError(GeometryError, ValueError):
    pass


class SingularMetricError(GeometryError):
    def __init__(self, message, min_eigenvalue=None):
        super().__init__(message)
        self.min_eigenvalue = min_eigenvalue


class MetricValidationError(GeometryError):
    """Metric is asymmetric or indefinite beyond tolerance."""


class ConditioningError(GeometryError):
    def __init__(self, message, jitter_ladder=()):
        super().__init__(message)
        self.jitter_ladder = tuple(jitter_ladder)


class DivergenceError(GeometryError):
    pass


class PreconditionError(GeometryError, ValueError):
    pass
