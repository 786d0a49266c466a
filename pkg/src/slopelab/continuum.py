"""Smooth case: gradient flows in the plane and the two worked examples.

Curves are integrated with fixed-step RK4.  A guard raises
:class:`StepTooLarge` whenever ``g`` increases between consecutive nodes,
since descent is the only property of the flow the comparison argument uses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from .errors import DegenerateCurve, DomainError, HypothesisFailure, PreconditionError, StepTooLarge
from .metric import Analytic2D, ExtendedFunction, Grid1D, build_finite_space
from .moduli import ModulusProfile


class DomainExit(DomainError):
    def __init__(self, t: float, point):
        self.t = t
        self.point = tuple(point)
        super().__init__(f"curve left the domain at t={t:.6g}, point={self.point}")


@dataclass(frozen=True)
class SmoothFunction2D:
    value: Callable
    grad: Callable
    domain: Analytic2D = field(default_factory=Analytic2D)
    tag: str = "custom"
    inf_value: float | None = None

    def __call__(self, p) -> float:
        return float(self.value(p[0], p[1]))

    def gradient(self, p) -> np.ndarray:
        return np.asarray(self.grad(p[0], p[1]), dtype=float)

    def grad_norm(self, p) -> float:
        gx, gy = self.grad(p[0], p[1])
        return math.hypot(gx, gy)

    def scaled(self, r: float) -> "SmoothFunction2D":
        v, gr = self.value, self.grad
        inf = None if self.inf_value is None else r * self.inf_value
        return SmoothFunction2D(lambda x, y: r * v(x, y), lambda x, y: tuple(r * c for c in gr(x, y)),
                                self.domain, self.tag, inf)

    def check_gradient(self, points, rtol: float = 1e-5, h: float = 1e-6) -> float:
        """Largest relative mismatch against central differences; raises above ``rtol``."""
        worst = 0.0
        for p in points:
            x, y = float(p[0]), float(p[1])
            hx, hy = h * max(1.0, abs(x)), h * max(1.0, abs(y))
            fd = np.array([(self.value(x + hx, y) - self.value(x - hx, y)) / (2 * hx),
                           (self.value(x, y + hy) - self.value(x, y - hy)) / (2 * hy)])
            an = self.gradient((x, y))
            err = float(np.linalg.norm(fd - an) / max(np.linalg.norm(an), 1e-12))
            worst = max(worst, err)
        if worst > rtol:
            raise PreconditionError(f"gradient disagrees with finite differences (rel {worst:.2e})")
        return worst


def quadratic() -> SmoothFunction2D:
    return SmoothFunction2D(lambda x, y: 0.5 * (x * x + y * y), lambda x, y: (x, y), Analytic2D(), "quadratic", 0.0)


def xsq_over_y() -> SmoothFunction2D:
    """``x^2 / y`` on the open upper half plane (convex, image ``[0, inf)``)."""
    return SmoothFunction2D(lambda x, y: x * x / y, lambda x, y: (2 * x / y, -(x * x) / (y * y)),
                            Analytic2D(y0=0.0), "xsq_over_y", 0.0)


# --- curves -------------------------------------------------------------------------------


@dataclass
class FlowCurve:
    t: np.ndarray
    points: np.ndarray
    speeds: np.ndarray
    g_values: np.ndarray
    grad_norms: np.ndarray
    sigma: np.ndarray
    slope_integral: np.ndarray
    status: str = "ok"
    exit: dict | None = None
    arc_length: bool = False
    func: SmoothFunction2D | None = field(default=None, repr=False)
    source_t: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.t)

    @property
    def length(self) -> float:
        return float(self.sigma[-1])

    def rows(self) -> list[dict]:
        return [
            {"t": float(t), "x": float(p[0]), "y": float(p[1]), "g": float(gv), "grad_norm": float(gn),
             "sigma": float(s), "slope_integral": float(si)}
            for t, p, gv, gn, s, si in zip(self.t, self.points, self.g_values, self.grad_norms, self.sigma,
                                            self.slope_integral)
        ]

    @classmethod
    def from_parametric(cls, g: SmoothFunction2D, gamma: Callable, dgamma: Callable, t_grid) -> "FlowCurve":
        t = np.asarray(t_grid, dtype=float)
        pts = np.array([gamma(s) for s in t], dtype=float)
        speeds = np.array([math.hypot(*dgamma(s)) for s in t])
        return _assemble(g, t, pts, speeds)


def _cumtrapz(y: np.ndarray, x: np.ndarray) -> np.ndarray:
    out = np.zeros_like(y, dtype=float)
    if len(y) > 1:
        out[1:] = np.cumsum(0.5 * (y[1:] + y[:-1]) * np.diff(x))
    return out


def _assemble(g, t, pts, speeds, **kw) -> FlowCurve:
    gv = np.array([g(p) for p in pts])
    gn = np.array([g.grad_norm(p) for p in pts])
    return FlowCurve(t, pts, speeds, gv, gn, _cumtrapz(speeds, t), _cumtrapz(gn * speeds, t), func=g, **kw)


def gradient_flow(g: SmoothFunction2D, x0, dt: float, t_max: float, *, on_exit: str = "stop",
                  guard_rtol: float = 1e-13) -> FlowCurve:
    """Integrate ``gamma' = -grad g(gamma)`` from ``x0`` with fixed-step RK4."""
    if not dt > 0:
        raise PreconditionError("dt must be positive")
    p = np.asarray(x0, dtype=float)
    if not g.domain.contains(p):
        raise PreconditionError("x0 must lie in the domain")
    n = int(round(t_max / dt))
    ts, pts = [0.0], [p]
    status, exit_info = "ok", None

    def field_(q):
        if not g.domain.contains(q):
            raise DomainExit(ts[-1], q)
        return -g.gradient(q)

    gp = g(p)
    for k in range(1, n + 1):
        try:
            k1 = field_(p)
            k2 = field_(p + 0.5 * dt * k1)
            k3 = field_(p + 0.5 * dt * k2)
            k4 = field_(p + dt * k3)
            q = p + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            if not g.domain.contains(q):
                raise DomainExit(k * dt, q)
        except DomainExit as exc:
            if on_exit == "raise":
                raise
            status, exit_info = "domain_exit", {"t": exc.t, "point": list(exc.point)}
            break
        gq = g(q)
        if gq > gp + guard_rtol * max(1.0, abs(gp)):
            raise StepTooLarge(k * dt, gq - gp)
        ts.append(k * dt)
        pts.append(q)
        p, gp = q, gq
    t = np.array(ts)
    P = np.array(pts)
    speeds = np.array([g.grad_norm(q) for q in P])
    return _assemble(g, t, P, speeds, status=status, exit=exit_info)


def arc_length_reparam(curve: FlowCurve, ds: float, g: SmoothFunction2D | None = None) -> FlowCurve:
    """Resample at uniform arc-length spacing ``ds`` by interpolating in sigma."""
    g = curve.func if g is None else g
    if g is None:
        raise PreconditionError("a function is needed to re-evaluate gradients")
    L = curve.length
    if not L >= ds:
        raise DegenerateCurve(f"total length {L:.3e} is shorter than ds={ds}")
    s = np.arange(int(math.floor(L / ds)) + 1) * ds
    xs = np.interp(s, curve.sigma, curve.points[:, 0])
    ys = np.interp(s, curve.sigma, curve.points[:, 1])
    P = np.column_stack([xs, ys])
    chord = np.hypot(np.diff(xs), np.diff(ys)) / ds
    speeds = np.empty(len(s))
    speeds[0], speeds[-1] = chord[0], chord[-1]
    speeds[1:-1] = 0.5 * (chord[1:] + chord[:-1])
    gv = np.array([g(p) for p in P])
    gn = np.array([g.grad_norm(p) for p in P])
    src = np.interp(s, curve.sigma, curve.t)
    return FlowCurve(s, P, speeds, gv, gn, s.copy(), _cumtrapz(gn, s), curve.status, curve.exit, True, g, src)


def integrability_report(curve: FlowCurve, g: SmoothFunction2D | None = None, tol: float = 1e-4,
                         grad_tol: float = 0.05) -> dict:
    """Evidence for or against ``int_0^inf |grad g(gamma~(s))| ds < inf``.

    The prefix integral converges when its last-quarter increment is below
    ``tol`` and diverges when that increment exceeds ``10 tol``; anything in
    between is undecided.  The last quarter is taken in the original time
    parameter when the curve records it.  Measured in arc length, a curve
    of finite length always spends its last quarter away from its limit.
    ``tol`` must dominate what resampling at spacing ``ds`` cuts off.
    The slope is taken to vanish when its final value is at most
    ``grad_tol`` times its initial value.
    """
    if not curve.arc_length:
        raise PreconditionError("integrability_report needs an arc-length parametrized curve")
    g = curve.func if g is None else g
    n = len(curve)
    if curve.source_t is not None and n > 1:
        t0, t1 = curve.source_t[0], curve.source_t[-1]
        start = int(np.searchsorted(curve.source_t, t0 + 0.75 * (t1 - t0)))
        start = min(max(start, 1), n - 1) - 1
    else:
        start = max(0, n - 1 - max(1, n // 4))
    I = curve.slope_integral
    inc = float(I[-1] - I[start])
    span = float(curve.t[-1] - curve.t[start])
    verdict = "converging" if inc < tol else ("diverging" if inc > 10 * tol else "undecided")
    P = curve.points
    dz = np.hypot(np.diff(P[:, 0]), np.diff(P[:, 1]))
    sums = np.cumsum(curve.grad_norms[:-1] * dz)
    ds = float(curve.t[1] - curve.t[0]) if n > 1 else 0.0
    tail = P[start:]
    g0 = float(curve.grad_norms[0])
    grad_ratio = float(curve.grad_norms[-1] / g0) if g0 > 0 else 0.0
    radius = float(np.max(np.hypot(tail[:, 0] - P[-1, 0], tail[:, 1] - P[-1, 1])))
    out = {
        "partial_integrals": I.tolist(),
        "total": float(I[-1]),
        "last_quarter_increment": inc,
        "growth_rate": inc / span if span > 0 else 0.0,
        "verdict": verdict,
        "converging": verdict == "converging",
        "grad_tail_max": float(np.max(curve.grad_norms[start:])),
        "grad_ratio": grad_ratio,
        "slope_to_zero": bool(grad_ratio <= grad_tol),
        "summability_sums": sums.tolist(),
        "omega_limit": "has_omega_limit" if radius <= 10 * ds else "escaping",
        "tail_radius": radius,
    }
    if g is not None and g.inf_value is not None:
        out["bound"] = float(curve.g_values[0] - g.inf_value)
        out["bound_ok"] = bool(I[-1] <= out["bound"] + tol)
    return out


def comparison_along_flow(f: SmoothFunction2D, g: SmoothFunction2D, x0, dt: float, t_max: float,
                          tol: float = 1e-9) -> dict:
    """Replay the steepest-descent inequality chain along the flow of ``g``.

    ``slack = (g - f)(x0) - (g - f)(gamma(t_N))`` must dominate
    ``integral = int (|grad g| - |grad f|) |gamma'| dt``, which in turn is
    nonnegative when ``|grad f| <= |grad g|`` along the curve.
    """
    curve = gradient_flow(g, x0, dt, t_max)
    fn = np.array([f.grad_norm(p) for p in curve.points])
    over = np.flatnonzero(fn > curve.grad_norms * (1 + 1e-12) + 1e-300)
    if over.size:
        i = int(over[0])
        raise HypothesisFailure(float(curve.t[i]), tuple(curve.points[i]))
    fv = np.array([f(p) for p in curve.points])
    slack = float((curve.g_values[0] - fv[0]) - (curve.g_values[-1] - fv[-1]))
    integral = float(_cumtrapz((curve.grad_norms - fn) * curve.speeds, curve.t)[-1])
    return {
        "slack": slack,
        "integral_term": integral,
        "integral_slack": slack - integral,
        "slack_ok": slack >= -tol,
        "integral_ok": integral >= -tol,
        "chain_ok": slack - integral >= -max(tol, 1e-6 * abs(slack)),
        "t_end": float(curve.t[-1]),
        "end_point": curve.points[-1].tolist(),
        "status": curve.status,
    }


# --- the x^2 / y remark -----------------------------------------------------------------------


def xsq_integral_closed_form(c: float, T: float) -> float:
    """``int_1^T |grad g(gamma)| |gamma'| dt = 4 sqrt(c) (T-1) + c^{3/2} (1 - 1/T)``."""
    return 4 * math.sqrt(c) * (T - 1) + c**1.5 * (1 - 1 / T)


def example_xsq_over_y(c: float, T: float, n_samples: int = 4001, ds: float | None = None) -> dict:
    """The level curve ``gamma(t) = (sqrt(c) t, t^2)`` of ``x^2 / y``.

    The gradient vanishes along it while the slope-length integral grows
    linearly, so it is not asymptotically critical.
    """
    if not (c > 0 and T > 1):
        raise PreconditionError("need c > 0 and T > 1")
    g = xsq_over_y()
    rc = math.sqrt(c)
    gamma = lambda t: (rc * t, t * t)
    dgamma = lambda t: (rc, 2 * t)
    ts = np.linspace(1.0, T, n_samples)
    curve = FlowCurve.from_parametric(g, gamma, dgamma, ts)
    level_dev = float(np.max(np.abs(curve.g_values - c)))
    half = T / 2
    ts_half = np.linspace(1.0, half, (n_samples + 1) // 2)
    I_half = float(FlowCurve.from_parametric(g, gamma, dgamma, ts_half).slope_integral[-1])
    I_full = float(curve.slope_integral[-1])
    t10 = 10.0 if T >= 10 else T
    grad10 = g.gradient(gamma(t10)).tolist()
    rep = integrability_report(arc_length_reparam(curve, ds or max(curve.length / 4000, 1e-3)), g)
    return {
        "c": c,
        "T": T,
        "level_max_dev": level_dev,
        "t_probe": t10,
        "grad_at_probe": grad10,
        "grad_expected_abs": [2 * rc / t10, c / t10**2],
        "grad_norm_end": float(curve.grad_norms[-1]),
        "integral_T": I_full,
        "integral_T_half": I_half,
        "integral_T_closed": xsq_integral_closed_form(c, T),
        "integral_T_half_closed": xsq_integral_closed_form(c, half),
        "ratio": I_full / I_half,
        "integrability": {k: v for k, v in rep.items() if k not in ("partial_integrals", "summability_sums")},
        "asymptotically_critical": rep["converging"],
    }


# --- the block function ------------------------------------------------------------------------


def _block(x) -> int:
    return int(math.floor(x))


def block_value(x):
    """``1/(n+1) + (x - (n+1))^{n(n+1)} / (n(n+1))`` on ``[n, n+1)``; exact on ``Fraction``."""
    n = _block(x)
    if n < 1:
        raise PreconditionError("the block function lives on [1, inf)")
    k = n * (n + 1)
    if isinstance(x, Fraction):
        return Fraction(1, n + 1) + (x - (n + 1)) ** k / k
    return 1.0 / (n + 1) + (x - (n + 1)) ** k / k


def block_slope(x):
    """``(n + 1 - x)^{n(n+1) - 1}``, the local slope of :func:`block_value`."""
    n = _block(x)
    if n < 1:
        raise PreconditionError("the block function lives on [1, inf)")
    return (n + 1 - x) ** (n * (n + 1) - 1)


def block_sequence(n_max: int) -> list[Fraction]:
    """``z_n = n + 1 - 1/n`` for ``n = 1..n_max``, exactly."""
    return [Fraction(n + 1) - Fraction(1, n) for n in range(1, n_max + 1)]


@dataclass
class BlockExample:
    grid: Grid1D
    g: ExtendedFunction
    slope: ModulusProfile
    checks: dict


def example_block_function(x_max: float, n_points: int) -> BlockExample:
    """Tabulate the block function and its closed-form slope on ``[1, x_max]``.

    Positivity of the slope is decided structurally (``n + 1 - x > 0`` at
    every node), not from the float values, which underflow for large
    blocks.
    """
    if not x_max >= 2:
        raise PreconditionError("x_max must be at least 2")
    grid = Grid1D(1.0, float(x_max), n_points)
    x = grid.nodes
    gv = np.array([block_value(float(v)) for v in x])
    sv = np.array([block_slope(float(v)) for v in x])
    exact = [block_value(Fraction(float(v))) for v in x]
    rel = max(abs(float((Fraction(a) - e) / e)) for a, e in zip(gv, exact))
    structural = all(_block(v) + 1 - Fraction(float(v)) > 0 for v in x)
    left_limits = {n: [float(block_slope(n - 10.0**-k)) for k in (1, 2, 3, 4)]
                   for n in range(2, int(math.floor(x_max)) + 1)}
    checks = {
        "inf_g": 0.0,
        "grid_min": float(gv.min()),
        "g_rel_error": rel,
        "zero_set_empty": structural,
        "float_underflow_nodes": int(np.sum(sv == 0.0)),
        "left_limits": left_limits,
    }
    g = ExtendedFunction(grid, gv)
    return BlockExample(grid, g, ModulusProfile(grid, sv, "closed_form_slope"), checks)


def fd_slope(g: ExtendedFunction) -> tuple[np.ndarray, np.ndarray]:
    """Second-order forward-difference slope ``(3g(x) - 4g(x+h) + g(x+2h)) / (2h)``.

    Returns the values and a mask of nodes whose stencil stays inside one
    block (segment interiors).
    """
    grid = g.space
    x, v, h = grid.nodes, g.values, grid.step
    out = np.full(len(x), np.nan)
    out[:-2] = (3 * v[:-2] - 4 * v[1:-1] + v[2:]) / (2 * h)
    blocks = np.floor(x)
    mask = np.zeros(len(x), dtype=bool)
    mask[:-2] = (blocks[:-2] == blocks[2:]) & (x[:-2] > blocks[:-2])
    return out, mask


def block_point_cloud(n_max: int, step: float = 0.5):
    """A finite subset of ``[1, n_max + 1]``: a grid plus the points ``z_n``.

    Returns the block function on it and the indices of ``z_1..z_{n_max}``.
    """
    zs = [float(z) for z in block_sequence(n_max)]
    grid = list(np.arange(1.0, n_max + 1 + step / 2, step))
    pts = np.array(sorted(set(grid) | set(zs)))
    d = np.abs(pts[:, None] - pts[None, :])
    space = build_finite_space(d, atol=1e-12)
    f = ExtendedFunction(space, np.array([block_value(float(p)) for p in pts]))
    idx = [int(np.searchsorted(pts, z)) for z in zs]
    return f, idx
