"""Metric spaces, extended-real functions, measures and point sets.

Points of a discrete space (``FiniteSpace`` or ``Grid1D``) are addressed by
integer index.  Extended values use ``math.inf`` as the ``+inf`` sentinel;
NaN and ``-inf`` are rejected at construction so that every ``inf`` met later
is an intentional "outside the domain" marker.
"""

from __future__ import annotations

import math
from functools import cached_property
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import (
    EmptyTruncation,
    ImproperFunction,
    MetricViolation,
    SpaceMismatch,
    ZeroDistanceCollision,
)

INF = math.inf


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


class MetricSpace:
    """Common surface of the three space flavours."""

    kind: str = "abstract"

    @property
    def size(self) -> int:
        raise NotImplementedError

    def dist(self, i, j) -> float:
        raise NotImplementedError

    def row(self, i: int) -> np.ndarray:
        """Distances from point ``i`` to every point, in index order."""
        raise NotImplementedError

    def distance_matrix(self) -> np.ndarray:
        return np.vstack([self.row(i) for i in range(self.size)])

    def points(self) -> range:
        return range(self.size)

    def label(self, i: int):
        return i


@dataclass(frozen=True, eq=False)
class FiniteSpace(MetricSpace):
    """``n`` points with an explicit, validated distance matrix."""

    distances: np.ndarray
    labels: tuple | None = None
    kind: str = field(default="finite", init=False)

    def __post_init__(self):
        object.__setattr__(self, "distances", _frozen(self.distances))
        if self.labels is not None and len(self.labels) != self.size:
            raise ValueError("labels must match the number of points")

    @property
    def size(self) -> int:
        return self.distances.shape[0]

    def dist(self, i, j) -> float:
        return float(self.distances[i, j])

    def row(self, i: int) -> np.ndarray:
        return self.distances[i]

    def distance_matrix(self) -> np.ndarray:
        return self.distances

    def label(self, i: int):
        return i if self.labels is None else self.labels[i]

    def min_separation(self) -> float:
        n = self.size
        if n < 2:
            return INF
        off = self.distances[~np.eye(n, dtype=bool)]
        return float(off.min())


@dataclass(frozen=True, eq=False)
class Grid1D(MetricSpace):
    """Uniform grid on ``[a, b]`` with ``n_points`` nodes and metric ``|x - y|``.

    ``open_right`` marks ``b`` as a truncation horizon of an unbounded
    interval rather than a genuine boundary point.
    """

    a: float
    b: float
    n_points: int
    open_right: bool = False
    kind: str = field(default="grid1d", init=False)

    def __post_init__(self):
        if self.n_points < 2 or not self.b > self.a:
            raise ValueError("need b > a and at least two nodes")

    @classmethod
    def with_step(cls, a: float, b: float, step: float, open_right: bool = False) -> "Grid1D":
        n = int(round((b - a) / step))
        return cls(a, b, n + 1, open_right)

    @property
    def size(self) -> int:
        return self.n_points

    @property
    def step(self) -> float:
        return (self.b - self.a) / (self.n_points - 1)

    @cached_property
    def nodes(self) -> np.ndarray:
        arr = self.a + self.step * np.arange(self.n_points)
        arr[-1] = self.b
        arr.setflags(write=False)
        return arr

    def dist(self, i, j) -> float:
        x = self.nodes
        return abs(float(x[i]) - float(x[j]))

    def row(self, i: int) -> np.ndarray:
        x = self.nodes
        return np.abs(x - x[i])

    def label(self, i: int):
        return float(self.nodes[i])

    def index_of(self, x: float) -> int:
        return int(np.argmin(np.abs(self.nodes - x)))


@dataclass(frozen=True, eq=False)
class Analytic2D(MetricSpace):
    """Open rectangle ``(x0, x1) x (y0, y1)`` with the Euclidean metric.

    Bounds may be infinite.  Points are coordinate pairs, not indices.
    """

    x0: float = -INF
    x1: float = INF
    y0: float = -INF
    y1: float = INF
    kind: str = field(default="analytic2d", init=False)

    @property
    def size(self) -> int:
        raise TypeError("an analytic space has no finite point list")

    def dist(self, p, q) -> float:
        return math.hypot(p[0] - q[0], p[1] - q[1])

    def contains(self, p) -> bool:
        return self.x0 < p[0] < self.x1 and self.y0 < p[1] < self.y1


# --- validation and construction -------------------------------------------


def validate_metric(d: np.ndarray, atol: float = 0.0) -> None:
    """Raise ``MetricViolation`` for the first failing axiom.

    The triangle check is exhaustive over ordered triples; the reported
    ``where = (i, k, j)`` satisfies ``d[i, k] > d[i, j] + d[j, k]`` and is the
    first such triple in lexicographic order.
    """
    if d.ndim != 2 or d.shape[0] != d.shape[1] or d.shape[0] == 0:
        raise MetricViolation("shape", (), f"expected a non-empty square matrix, got {d.shape}")
    if not np.all(np.isfinite(d)):
        bad = tuple(int(v) for v in np.argwhere(~np.isfinite(d))[0])
        raise MetricViolation("negative", bad, f"non-finite distance at {bad}")
    if np.any(d < 0):
        bad = tuple(int(v) for v in np.argwhere(d < 0)[0])
        raise MetricViolation("negative", bad)
    n = d.shape[0]
    diag = np.diag(d)
    if np.any(diag != 0):
        i = int(np.argwhere(diag != 0)[0][0])
        raise MetricViolation("diagonal", (i, i))
    asym = d != d.T
    if np.any(asym):
        i, j = (int(v) for v in np.argwhere(asym)[0])
        raise MetricViolation("asymmetry", (i, j))
    zero = (d == 0) & ~np.eye(n, dtype=bool)
    if np.any(zero):
        i, j = (int(v) for v in np.argwhere(zero)[0])
        raise MetricViolation("zero_off_diagonal", (i, j))
    # viol[i, k, j]: d(i,k) > d(i,j) + d(j,k)
    through = d[:, None, :] + d.T[None, :, :]
    viol = d[:, :, None] > through + atol
    if np.any(viol):
        i, k, j = (int(v) for v in np.argwhere(viol)[0])
        raise MetricViolation(
            "triangle", (i, k, j), f"d({i},{k})={d[i, k]!r} > d({i},{j}) + d({j},{k})"
        )


def build_finite_space(distance_matrix, labels: Sequence | None = None, atol: float = 0.0) -> FiniteSpace:
    d = np.array(distance_matrix, dtype=float)
    validate_metric(d, atol=atol)
    return FiniteSpace(d, None if labels is None else tuple(labels))


def metric_repair(weight_matrix) -> FiniteSpace:
    """Shortest-path (min-plus) closure of a symmetric nonnegative weight matrix.

    Floyd-Warshall passes are repeated until a full pass changes nothing, so
    the stored floats satisfy the triangle inequality exactly, not just up to
    rounding of the first pass.
    """
    w = np.array(weight_matrix, dtype=float)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise MetricViolation("shape", (), f"expected a square matrix, got {w.shape}")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise MetricViolation("negative", tuple(int(v) for v in np.argwhere(~(w >= 0))[0]))
    if np.any(np.diag(w) != 0):
        i = int(np.argwhere(np.diag(w) != 0)[0][0])
        raise MetricViolation("diagonal", (i, i))
    if np.any(w != w.T):
        i, j = (int(v) for v in np.argwhere(w != w.T)[0])
        raise MetricViolation("asymmetry", (i, j))
    d = w.copy()
    n = d.shape[0]
    while True:
        before = d.copy()
        for k in range(n):
            np.minimum(d, d[:, k, None] + d[None, k, :], out=d)
        if np.array_equal(before, d):
            break
    zero = (d == 0) & ~np.eye(n, dtype=bool)
    if np.any(zero):
        i, j = (int(v) for v in np.argwhere(zero)[0])
        raise ZeroDistanceCollision(i, j)
    validate_metric(d)
    return FiniteSpace(d)


def random_finite_space(rng: np.random.Generator, n: int) -> FiniteSpace:
    """Symmetric weights uniform on (0, 1], closed under shortest paths."""
    u = 1.0 - rng.random((n, n))  # (0, 1]
    w = np.triu(u, 1)
    w = w + w.T
    return metric_repair(w)


# --- functions ---------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ExtendedFunction:
    """Values in R u {+inf} at every point of a discrete space."""

    space: MetricSpace
    values: np.ndarray

    def __post_init__(self):
        v = _frozen(self.values)
        if v.shape != (self.space.size,):
            raise ValueError(f"expected {self.space.size} values, got shape {v.shape}")
        if np.any(np.isnan(v)) or np.any(v == -INF):
            raise ImproperFunction("values must be finite or +inf")
        if not np.any(np.isfinite(v)):
            raise ImproperFunction("function is +inf everywhere")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_callable(cls, space: Grid1D, fn) -> "ExtendedFunction":
        return cls(space, np.array([fn(float(x)) for x in space.nodes]))

    def __call__(self, i: int) -> float:
        return float(self.values[i])

    @property
    def domain_mask(self) -> np.ndarray:
        return np.isfinite(self.values)

    def domain(self) -> "PointSet":
        return PointSet(self.space, frozenset(np.flatnonzero(self.domain_mask).tolist()))

    def inf(self) -> float:
        return float(self.values[self.domain_mask].min())

    def argmin(self) -> "PointSet":
        m = self.inf()
        return PointSet(self.space, frozenset(np.flatnonzero(self.values == m).tolist()))

    def shift(self, c: float) -> "ExtendedFunction":
        return ExtendedFunction(self.space, self.values + c)

    def scale(self, r: float) -> "ExtendedFunction":
        if r < 0:
            raise ValueError("scale factor must be nonnegative")
        v = np.where(self.domain_mask, self.values * r, INF) if r > 0 else np.where(self.domain_mask, 0.0, INF)
        return ExtendedFunction(self.space, v)

    def on(self, space: MetricSpace) -> "ExtendedFunction":
        """Same values on another space with the same point set."""
        return ExtendedFunction(space, self.values)

    def __eq__(self, other):
        if not isinstance(other, ExtendedFunction):
            return NotImplemented
        return self.space is other.space and np.array_equal(self.values, other.values)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class Measure:
    """Nonnegative weights (finite space) or density samples (grid).

    On a grid the quadrature rule is the composite trapezoid rule.
    """

    space: MetricSpace
    weights: np.ndarray
    rule: str = "trapezoid"

    def __post_init__(self):
        w = _frozen(self.weights)
        if w.shape != (self.space.size,):
            raise ValueError("one weight per point required")
        if np.any(~np.isfinite(w)) or np.any(w < 0):
            raise ValueError("weights must be finite and nonnegative")
        object.__setattr__(self, "weights", w)
        if not self.total_mass() > 0:
            raise ValueError("measure has zero total mass")

    @classmethod
    def lebesgue(cls, grid: Grid1D) -> "Measure":
        return cls(grid, np.ones(grid.size))

    @classmethod
    def uniform(cls, space: FiniteSpace) -> "Measure":
        return cls(space, np.full(space.size, 1.0 / space.size))

    def node_weights(self) -> np.ndarray:
        if isinstance(self.space, Grid1D):
            q = np.full(self.space.size, self.space.step)
            q[0] = q[-1] = self.space.step / 2
            return q * self.weights
        return np.asarray(self.weights)

    def total_mass(self) -> float:
        return float(np.sum(self.node_weights()))


# --- point sets ---------------------------------------------------------------


@dataclass(frozen=True)
class PointSet:
    space: MetricSpace = field(compare=False, hash=False)
    members: frozenset

    def __post_init__(self):
        bad = [m for m in self.members if not 0 <= m < self.space.size]
        if bad:
            raise ValueError(f"points {bad} are not in the space")

    def __contains__(self, i) -> bool:
        return i in self.members

    def __iter__(self) -> Iterator[int]:
        return iter(sorted(self.members))

    def __len__(self) -> int:
        return len(self.members)

    def __le__(self, other: "PointSet") -> bool:
        return self.members <= other.members

    def mask(self) -> np.ndarray:
        m = np.zeros(self.space.size, dtype=bool)
        m[list(self.members)] = True
        return m

    @classmethod
    def of(cls, space: MetricSpace, members: Iterable[int]) -> "PointSet":
        return cls(space, frozenset(int(m) for m in members))


def sublevel_set(f: ExtendedFunction, r: float) -> PointSet:
    return PointSet(f.space, frozenset(np.flatnonzero(f.values <= r).tolist()))


def truncate(f: ExtendedFunction, K: PointSet) -> ExtendedFunction:
    """``f + i_K``: keep ``f`` on ``K`` and send everything else to ``+inf``."""
    if K.space is not f.space:
        raise SpaceMismatch("point set and function live on different spaces")
    keep = K.mask() & f.domain_mask
    if not keep.any():
        raise EmptyTruncation("K does not meet dom f")
    return ExtendedFunction(f.space, np.where(keep, f.values, INF))
