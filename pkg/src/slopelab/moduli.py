"""Difference quotients and the four descent moduli.

Every modulus maps an :class:`ExtendedFunction` to a :class:`ModulusProfile`
with ``+inf`` exactly off ``dom f``.  Limsup-type moduli (local slope,
diffusion) are evaluated on a decreasing schedule of radii; the profile keeps
the value at the smallest radius and, in ``oscillation``, the spread of the
values over the last three radii.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, EmptyBall, ScheduleError, SpaceMismatch
from .metric import INF, ExtendedFunction, FiniteSpace, Grid1D, Measure, MetricSpace, PointSet

# radii and ball memberships on float grids are compared with this slack
_RADIUS_RTOL = 1e-12


_TINY = math.ulp(0.0)


# --- increasing gauges ----------------------------------------------------------


@dataclass(frozen=True)
class ThetaFunction:
    """Strictly increasing continuous map of [0, inf) onto itself.

    Closed forms evaluate exactly on ``fractions.Fraction`` inputs as well as
    floats, which the descent engine relies on.
    """

    name: str
    fn: Callable = field(compare=False)
    inv: Callable | None = field(default=None, compare=False)

    def __call__(self, t):
        if t == INF:
            return INF
        v = self.fn(t)
        if v == 0 and t > 0:
            # keep the zero set exact when the gauge underflows
            return _TINY
        return v

    def inverse(self, s):
        if s == INF:
            return INF
        if self.inv is not None:
            return self.inv(s)
        s = float(s)
        if s == 0:
            return 0.0
        hi = 1.0
        while self.fn(hi) < s:
            hi *= 2.0
        return brentq(lambda t: self.fn(t) - s, 0.0, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps)

    def is_admissible(self, ladder: Sequence[float] = (0.0, 1e-6, 1e-3, 0.1, 0.5, 1, 2, 10, 1e3, 1e6)) -> bool:
        vals = [float(self(t)) for t in ladder]
        if vals[0] != 0.0:
            return False
        if any(b <= a for a, b in zip(vals, vals[1:])):
            return False
        return vals[-1] > 1e3 * max(vals[1], 1e-300)

    def compose(self, inner: "ThetaFunction") -> "ThetaFunction":
        """``self o inner``."""
        outer = self
        return ThetaFunction(
            f"{outer.name}o{inner.name}",
            lambda t: outer(inner(t)),
            lambda s: inner.inverse(outer.inverse(s)),
        )


def identity() -> ThetaFunction:
    return ThetaFunction("identity", lambda t: t, lambda s: s)


def linear(slope) -> ThetaFunction:
    if not slope > 0:
        raise ValueError("slope must be positive")
    return ThetaFunction(f"linear({slope})", lambda t: slope * t, lambda s: s / slope)


def ratio(rho) -> ThetaFunction:
    """``t -> rho t / (1 + rho)``, the gauge that works for average-type moduli."""
    if not rho > 0:
        raise ValueError("rho must be positive")
    return ThetaFunction(f"ratio({rho})", lambda t: rho * t / (1 + rho), lambda s: s * (1 + rho) / rho)


def power(p) -> ThetaFunction:
    if not p > 0:
        raise ValueError("exponent must be positive")
    if p == int(p):
        k = int(p)
        return ThetaFunction(f"power({k})", lambda t: t**k, lambda s: float(s) ** (1.0 / k))
    return ThetaFunction(f"power({p})", lambda t: float(t) ** p, lambda s: float(s) ** (1.0 / p))


def sqrt_times_one_plus() -> ThetaFunction:
    """``t -> sqrt(t) (1 + t)``; inverse found numerically."""
    return ThetaFunction("sqrt*(1+t)", lambda t: math.sqrt(t) * (1 + t))


# --- profiles --------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ModulusProfile:
    space: MetricSpace
    values: np.ndarray
    tag: str
    oscillation: np.ndarray | None = None

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.space.size,):
            raise ValueError("one value per point required")
        if np.any(np.isnan(v)) or np.any(v < 0):
            raise ValueError("modulus values must lie in [0, +inf]")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __call__(self, i: int) -> float:
        return float(self.values[i])

    def __len__(self) -> int:
        return len(self.values)

    def identical(self, other: "ModulusProfile") -> bool:
        return np.array_equal(self.values, other.values)


# --- the quotient ------------------------------------------------------------------


def delta_plus(f: ExtendedFunction, x: int, y: int) -> float:
    """``{f(x) - f(y)}^+ / d(x, y)``, with 0 on the diagonal."""
    fx = f(x)
    if fx == INF:
        raise DomainError(f"f({x}) = +inf")
    if x == y:
        return 0.0
    fy = f(y)
    num = fx - fy  # -inf when f(y) = +inf
    if num <= 0:
        return 0.0
    return num / f.space.dist(x, y)


def quotient_row(f: ExtendedFunction, x: int) -> np.ndarray:
    """``Delta^+ f(x, .)`` over every point, in index order."""
    fx = f.values[x]
    if fx == INF:
        raise DomainError(f"f({x}) = +inf")
    d = f.space.row(x)
    num = np.maximum(fx - f.values, 0.0)
    out = np.zeros_like(num)
    np.divide(num, d, out=out, where=d > 0)
    return out


def _check_schedule(schedule: Sequence[float]) -> tuple[float, ...]:
    s = tuple(float(r) for r in schedule)
    if not s:
        raise ScheduleError("schedule is empty")
    if any(r <= 0 or not math.isfinite(r) for r in s):
        raise ScheduleError("radii must be positive and finite")
    if any(b >= a for a, b in zip(s, s[1:])):
        raise ScheduleError("schedule must be strictly decreasing")
    return s


def _oscillation(vals: list[float]) -> float:
    tail = vals[-3:]
    return max(tail) - min(tail)


# --- pointwise kernels -------------------------------------------------------------


def _global_at(f: ExtendedFunction, x: int) -> float:
    return float(quotient_row(f, x).max())


def _local_at(f: ExtendedFunction, x: int, schedule) -> tuple[float, float]:
    q = quotient_row(f, x)
    d = f.space.row(x)
    vals = []
    for r in schedule:
        near = (d > 0) & (d <= r * (1 + _RADIUS_RTOL))
        vals.append(float(q[near].max()) if near.any() else 0.0)
    return vals[-1], _oscillation(vals)


def _one_sided_limits(q: np.ndarray, x: int, lo: int, hi: int) -> tuple[float, float]:
    """Linear extrapolation of the quotient to ``y -> x`` from either side.

    Only nodes in ``[lo, hi]`` are used; a side with one node falls back to
    that node's value.
    """

    def side(i1, i2, ok1, ok2):
        if not ok1:
            return 0.0
        if not ok2:
            return float(q[i1])
        return max(2.0 * q[i1] - q[i2], 0.0)

    left = side(x - 1, x - 2, x - 1 >= lo, x - 2 >= lo)
    right = side(x + 1, x + 2, x + 1 <= hi, x + 2 <= hi)
    return left, right


def _grid_integral(q: np.ndarray, density: np.ndarray, h: float, x: int, lo: int, hi: int) -> tuple[float, float]:
    """Trapezoid integral of ``q * density`` and of ``density`` over nodes ``lo..hi``.

    The node ``x`` itself carries ``q = 0`` by the 0/0 convention; each cell
    touching ``x`` uses the one-sided limit from its own side instead, so a
    piecewise-linear integrand with kinks on nodes is integrated exactly.
    """
    if hi <= lo:
        return 0.0, 0.0
    w = np.full(hi - lo + 1, h)
    w[0] = w[-1] = h / 2
    rho = density[lo : hi + 1]
    integral = float(np.sum(w * rho * q[lo : hi + 1]))
    mass = float(np.sum(w * rho))
    left, right = _one_sided_limits(q, x, lo, hi)
    correction = 0.0
    if x > lo:
        correction += 0.5 * h * density[x] * left
    if x < hi:
        correction += 0.5 * h * density[x] * right
    return integral + correction, mass


def _average_at(f: ExtendedFunction, mu: Measure, x: int) -> float:
    q = quotient_row(f, x)
    if isinstance(f.space, Grid1D):
        val, _ = _grid_integral(q, mu.weights, f.space.step, x, 0, f.space.size - 1)
        return val
    return float(np.sum(mu.weights * q))


def _diffusion_at(f: ExtendedFunction, mu: Measure, x: int, schedule) -> tuple[float, float]:
    q = quotient_row(f, x)
    vals = []
    if isinstance(f.space, Grid1D):
        h = f.space.step
        n = f.space.size
        for eps in schedule:
            k = int(math.floor(eps / h * (1 + _RADIUS_RTOL)))
            lo, hi = max(x - k, 0), min(x + k, n - 1)
            integral, mass = _grid_integral(q, mu.weights, h, x, lo, hi)
            if not mass > 0:
                raise EmptyBall(x, eps)
            vals.append(integral / mass)
    else:
        d = f.space.row(x)
        for eps in schedule:
            ball = d <= eps
            mass = float(np.sum(mu.weights[ball]))
            if not mass > 0:
                raise EmptyBall(x, eps)
            vals.append(float(np.sum(mu.weights[ball] * q[ball])) / mass)
    return vals[-1], _oscillation(vals)


# --- the modulus object --------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Modulus:
    """A descent modulus ``T``: ``T(f)`` is the profile, ``T.at(f, x)`` one value.

    Build instances with :meth:`global_`, :meth:`local`, :meth:`average`,
    :meth:`diffusion` or :meth:`composed`.
    """

    kind: str
    measure: Measure | None = None
    schedule: tuple | None = None
    phi: ThetaFunction | None = None
    base: "Modulus | None" = None

    @classmethod
    def global_(cls) -> "Modulus":
        return cls("global")

    @classmethod
    def local(cls, schedule: Sequence[float]) -> "Modulus":
        return cls("local", schedule=_check_schedule(schedule))

    @classmethod
    def average(cls, mu: Measure) -> "Modulus":
        return cls("average", measure=mu)

    @classmethod
    def diffusion(cls, mu: Measure, schedule: Sequence[float]) -> "Modulus":
        return cls("diffusion", measure=mu, schedule=_check_schedule(schedule))

    @classmethod
    def composed(cls, phi: ThetaFunction, base: "Modulus") -> "Modulus":
        return cls("composed", phi=phi, base=base)

    @property
    def name(self) -> str:
        if self.kind == "composed":
            return f"{self.phi.name}o{self.base.name}"
        return self.kind

    def _check(self, f: ExtendedFunction) -> None:
        if self.measure is not None and self.measure.space is not f.space:
            raise SpaceMismatch("measure and function live on different spaces")

    def at(self, f: ExtendedFunction, x: int) -> float:
        return self._at(f, x)[0]

    def _at(self, f: ExtendedFunction, x: int) -> tuple[float, float]:
        if f.values[x] == INF:
            return INF, 0.0
        if self.kind == "global":
            return _global_at(f, x), 0.0
        if self.kind == "local":
            return _local_at(f, x, self.schedule)
        if self.kind == "average":
            return _average_at(f, self.measure, x), 0.0
        if self.kind == "diffusion":
            return _diffusion_at(f, self.measure, x, self.schedule)
        if self.kind == "composed":
            v, osc = self.base._at(f, x)
            return self.phi(v), osc
        raise ValueError(f"unknown modulus kind {self.kind!r}")

    def __call__(self, f: ExtendedFunction) -> ModulusProfile:
        self._check(f)
        if self.base is not None:
            self.base._check(f)
        vals = np.empty(f.space.size)
        osc = np.zeros(f.space.size)
        for x in range(f.space.size):
            vals[x], osc[x] = self._at(f, x)
        has_osc = self.kind in ("local", "diffusion") or (
            self.kind == "composed" and self.base.kind in ("local", "diffusion")
        )
        return ModulusProfile(f.space, vals, self.name, osc if has_osc else None)

    def compat_theta(self, rho: float) -> ThetaFunction:
        """A gauge for which condition (C) holds at tolerance ``rho``.

        Sup-type moduli admit the identity; integral-type moduli need
        ``rho t / (1 + rho)``; composition with ``phi`` transports the gauge
        through ``phi^{-1}``.
        """
        if self.kind in ("global", "local"):
            return identity()
        if self.kind in ("average", "diffusion"):
            return ratio(rho)
        if self.kind == "composed":
            return self.base.compat_theta(rho).compose(
                ThetaFunction(f"inv({self.phi.name})", self.phi.inverse, self.phi)
            )
        raise ValueError(self.kind)


# --- operations -----------------------------------------------------------------------


def global_slope(f: ExtendedFunction) -> ModulusProfile:
    return Modulus.global_()(f)


def local_slope(f: ExtendedFunction, radius_schedule: Sequence[float]) -> ModulusProfile:
    return Modulus.local(radius_schedule)(f)


def average_descent(f: ExtendedFunction, mu: Measure) -> ModulusProfile:
    return Modulus.average(mu)(f)


def diffusion_descent(f: ExtendedFunction, mu: Measure, eps_schedule: Sequence[float]) -> ModulusProfile:
    return Modulus.diffusion(mu, eps_schedule)(f)


def default_tol(space: MetricSpace) -> float:
    return 0.0 if isinstance(space, FiniteSpace) else 1e-9


def critical_set(profile: ModulusProfile, tol: float | None = None) -> PointSet:
    t = default_tol(profile.space) if tol is None else tol
    return PointSet(profile.space, frozenset(np.flatnonzero(profile.values <= t).tolist()))


def compose_modulus(phi: ThetaFunction, profile: ModulusProfile) -> ModulusProfile:
    vals = np.array([phi(float(v)) for v in profile.values], dtype=float)
    return ModulusProfile(profile.space, vals, f"{phi.name}o{profile.tag}", profile.oscillation)


def modulus_domain(profile: ModulusProfile, f: ExtendedFunction) -> bool:
    """True iff the profile is finite at every point where ``f`` is finite."""
    return bool(np.all(np.isfinite(profile.values[f.domain_mask])))
