"""Exception types raised by slopelab operations."""

from __future__ import annotations


class SlopeLabError(Exception):
    """Base class for all library errors."""


class MetricViolation(SlopeLabError):
    """A distance matrix fails one of the metric axioms.

    ``kind`` is one of ``"asymmetry"``, ``"zero_off_diagonal"``, ``"triangle"``,
    ``"negative"``, ``"diagonal"`` or ``"shape"``; ``where`` holds the offending
    index tuple (``(i, j)`` or ``(i, k, j)`` for a triangle failure, meaning
    ``d(i, k) > d(i, j) + d(j, k)``).
    """

    def __init__(self, kind: str, where: tuple = (), message: str = ""):
        self.kind = kind
        self.where = tuple(where)
        super().__init__(message or f"{kind} at {self.where}")


class ZeroDistanceCollision(SlopeLabError):
    def __init__(self, i: int, j: int):
        self.where = (i, j)
        super().__init__(f"closure collapses distinct points {i} and {j}")


class EmptyTruncation(SlopeLabError):
    pass


class ImproperFunction(SlopeLabError):
    """The function is +inf everywhere (or carries NaN / -inf)."""


class SpaceMismatch(SlopeLabError):
    pass


class DomainError(SlopeLabError):
    pass


class ScheduleError(SlopeLabError):
    pass


class EmptyBall(SlopeLabError):
    def __init__(self, x: int, eps: float):
        self.x = x
        self.eps = eps
        super().__init__(f"ball B({x}, {eps!r}) has zero measure")


class PreconditionError(SlopeLabError):
    pass


class NoWitness(SlopeLabError):
    pass


class CriticalPoint(SlopeLabError):
    def __init__(self, x: int):
        self.x = x
        super().__init__(f"point {x} is critical for g")


class InfiniteModulus(SlopeLabError):
    pass


class CriticalMember(SlopeLabError):
    def __init__(self, index: int):
        self.index = index
        super().__init__(f"sequence member {index} is critical")


class BudgetExceeded(SlopeLabError):
    pass


class DegenerateCurve(SlopeLabError):
    pass


class StepTooLarge(SlopeLabError):
    def __init__(self, t: float, increase: float):
        self.t = t
        self.increase = increase
        super().__init__(f"g increased by {increase:.3e} at t={t:.6g}; reduce dt")


class HypothesisFailure(SlopeLabError):
    def __init__(self, t: float, point=None):
        self.t = t
        self.point = point
        super().__init__(f"|grad f| > |grad g| first observed at t={t:.6g}")
