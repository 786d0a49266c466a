"""Descent iteration, asymptotically critical sequences and finite oracles.

The iteration follows the comparison argument: at a non-critical ``x`` with
``T[f](x) < T[g](x)`` take ``delta = (T[f](x) + T[g](x)) / 2`` and jump to a
condition-(C) witness.  Arithmetic on stored values is done with
``fractions.Fraction`` so the trace invariants are checked without rounding.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .errors import (
    BudgetExceeded,
    CriticalMember,
    CriticalPoint,
    InfiniteModulus,
    NoWitness,
    PreconditionError,
)
from .metric import INF, ExtendedFunction, FiniteSpace, Grid1D, PointSet
from .moduli import Modulus, ModulusProfile, critical_set, default_tol

DEFAULT_TAIL_TOL = 1e-6


def delta_mix(Tf: ModulusProfile, Tg: ModulusProfile, x: int) -> float:
    a, b = Tf(x), Tg(x)
    if a == INF or b == INF:
        raise InfiniteModulus(f"modulus is +inf at {x}")
    return 0.5 * a + 0.5 * b


# --- basic iteration scheme -------------------------------------------------------------


def _engine_modulus(modulus: Modulus, rho: float) -> Modulus:
    """A modulus that satisfies (C) with the identity gauge.

    If ``T`` needs the gauge ``theta`` then ``theta o T`` needs the identity,
    so integral-type moduli are wrapped before descending.
    """
    theta = modulus.compat_theta(rho)
    if theta.name == "identity":
        return modulus
    return Modulus.composed(theta, modulus)


def _fr(v: float) -> Fraction:
    return Fraction(v)


def _step(f, g, T, x, rho: Fraction):
    tf, tg = T.at(f, x), T.at(g, x)
    if tg == INF or tf == INF:
        raise InfiniteModulus(f"modulus is +inf at {x}")
    if tg <= default_tol(g.space):
        raise CriticalPoint(x)
    if not tf < tg:
        raise PreconditionError(f"T[f]({x}) = {tf} is not below T[g]({x}) = {tg}")
    delta = _fr(tf) / 2 + _fr(tg) / 2
    gx, fx = _fr(g(x)), _fr(f(x))
    best = None
    for z in np.flatnonzero(g.domain_mask):
        z = int(z)
        if z == x:
            continue
        gg = gx - _fr(g(z))
        ff = fx - _fr(f(z)) if f(z) != INF else Fraction(0)
        if max(ff, Fraction(0)) < (1 + rho) * max(gg, Fraction(0)) and delta * _fr(g.space.dist(x, z)) < gg:
            if best is None or gg > best[1]:
                best = (z, gg)
    if best is None:
        raise NoWitness(f"no (C) witness at {x} with delta={float(delta)}")
    return best[0], tf, tg, delta


def descent_step(f: ExtendedFunction, g: ExtendedFunction, modulus: Modulus, x: int, rho: float) -> int:
    """One condition-(C) jump from ``x``; see :func:`descent_run`."""
    if g(x) == INF:
        raise PreconditionError("x must lie in dom g")
    return _step(f, g, _engine_modulus(modulus, rho), x, _fr(rho))[0]


@dataclass
class TraceEntry:
    x: int
    g: float
    f: float
    delta: float
    Tg: float
    step: float
    running_sum: float


@dataclass
class DescentTrace:
    entries: list
    final: int
    status: str  # reached_critical | monotonicity_broken | budget_exhausted
    rho: float
    shift: float
    g0: float
    inf_g: float
    detail: str = ""
    invariants: dict = field(default_factory=dict)

    @property
    def points(self) -> list[int]:
        return [e.x for e in self.entries] + [self.final]

    def to_dict(self) -> dict:
        return asdict(self)

    def rows(self) -> list[dict]:
        return [asdict(e) for e in self.entries]


def check_trace(trace: DescentTrace, f: ExtendedFunction, g: ExtendedFunction) -> dict:
    """Recompute the three trace invariants exactly from ``f`` and ``g``."""
    rho = _fr(trace.rho)
    pts = trace.points
    gv = [_fr(g(p)) for p in pts]
    hv = [_fr(f(p)) - (1 + rho) * _fr(g(p)) for p in pts]
    s = Fraction(0)
    for e in trace.entries:
        s += _fr(e.Tg) * _fr(e.step)
    return {
        "g_strictly_decreasing": all(a > b for a, b in zip(gv, gv[1:])),
        "h_nondecreasing": all(a <= b for a, b in zip(hv, hv[1:])),
        "telescoping_bound": s <= 2 * (_fr(trace.g0) - _fr(trace.inf_g)),
    }


def descent_run(f: ExtendedFunction, g: ExtendedFunction, modulus: Modulus, x0: int, rho: float,
                budget: int | None = None) -> DescentTrace:
    """Iterate :func:`descent_step` from ``x0``.

    Both functions are shifted by ``1 - inf g`` first, as in the proof; the
    invariants only involve differences so the shift is recorded but never
    changes a decision.  Failures become terminal statuses.
    """
    if g(x0) == INF:
        raise PreconditionError("x0 must lie in dom g")
    inf_g = g.inf()
    if not math.isfinite(inf_g):
        raise PreconditionError("g must be bounded below")
    if budget is None:
        budget = 10 * g.space.size if isinstance(g.space, FiniteSpace) else 10_000
    if budget < 1:
        raise PreconditionError("budget must be at least 1")
    T = _engine_modulus(modulus, rho)
    rho_f = _fr(rho)
    entries, x, status, detail = [], x0, "budget_exhausted", ""
    total = Fraction(0)
    for _ in range(budget):
        try:
            z, tf, tg, delta = _step(f, g, T, x, rho_f)
        except CriticalPoint:
            status = "reached_critical"
            break
        except (NoWitness, PreconditionError, InfiniteModulus) as exc:
            status, detail = "monotonicity_broken", f"{type(exc).__name__}: {exc}"
            break
        d = g.space.dist(x, z)
        total += _fr(tg) * _fr(d)
        entries.append(TraceEntry(x, g(x), f(x), float(delta), tg, d, float(total)))
        x = z
    else:
        if T.at(g, x) <= default_tol(g.space):
            status = "reached_critical"
    trace = DescentTrace(entries, x, status, rho, 1.0 - inf_g, g(x0), inf_g, detail)
    trace.invariants = check_trace(trace, f, g)
    return trace


# --- sequences ----------------------------------------------------------------------------


def monotone_subsequence(values: Sequence) -> list[int]:
    """``k_0 = 0`` and ``k_{n+1}`` the first later index with a smaller value."""
    if len(values) == 0:
        raise PreconditionError("values must be non-empty")
    out = [0]
    for m in range(1, len(values)):
        if values[m] < values[out[-1]]:
            out.append(m)
    return out


def _exact(v) -> Fraction:
    return v if isinstance(v, Fraction) else Fraction(v)


def _resolve(seq, g, modulus, slope, dist):
    if slope is None:
        if g is None or modulus is None:
            raise PreconditionError("need either slope values or (g, modulus)")
        slopes = [modulus.at(g, int(z)) for z in seq]
    elif callable(slope):
        slopes = [slope(z) for z in seq]
    else:
        slopes = list(slope)
    if dist is None:
        dist = g.space.dist if g is not None else (lambda a, b: abs(a - b))
    if any(s == INF for s in slopes):
        raise PreconditionError("slope is +inf on the sequence")
    return slopes, dist


@dataclass
class SequenceReport:
    slopes: list
    gaps: list
    partial_sums: list
    tail_increment: float
    min_tail_gap: float
    gap_threshold: float
    liminf_estimate: float
    tol: float
    summability_ok: bool
    divergence_ok: bool
    liminf_zero: bool
    pairwise_tail_gaps: list = field(default_factory=list, repr=False)

    @property
    def asymptotically_critical(self) -> bool:
        return self.summability_ok and self.divergence_ok and self.liminf_zero

    def recompute_flags(self) -> tuple[bool, bool, bool]:
        m = len(self.slopes)
        h = m // 2
        inc = sum(s * d for s, d in zip(self.slopes[h:], self.gaps[h:]))
        return (inc < self.tol, min(self.pairwise_tail_gaps, default=INF) > self.gap_threshold,
                min(self.slopes) < self.tol)

    def to_dict(self) -> dict:
        return asdict(self)


def asymptotic_criticality_report(seq: Sequence, g: ExtendedFunction | None = None, modulus: Modulus | None = None,
                                  gap_threshold: float | None = None, *, slope=None, dist: Callable | None = None,
                                  tol: float = DEFAULT_TAIL_TOL) -> SequenceReport:
    """Finite-prefix evidence for asymptotic criticality.

    ``slope`` may be a callable or a list replacing ``modulus.at(g, z)``;
    exact ``Fraction`` values are accepted so superexponentially small slopes
    do not underflow.  "No converging subsequence" is proxied by the minimum
    pairwise distance among the last half of the prefix.
    """
    if len(seq) < 2:
        raise PreconditionError("need at least two sequence members")
    slopes, dist = _resolve(seq, g, modulus, slope, dist)
    for i, s in enumerate(slopes):
        if s <= 0:
            raise CriticalMember(i)
    m = len(seq)
    gaps = [dist(seq[i], seq[i + 1]) for i in range(m - 1)]
    incs = [_exact(s) * _exact(d) for s, d in zip(slopes, gaps)]
    partial, acc = [], Fraction(0)
    for v in incs:
        acc += v
        partial.append(float(acc))
    h = m // 2
    tail_inc = sum(incs[h:], Fraction(0))
    tail = list(seq[h:])
    pair = [float(dist(a, b)) for a, b in itertools.combinations(tail, 2)]
    min_gap = min(pair, default=INF)
    if gap_threshold is None:
        q = max(1, (m - 1) // 4)
        gap_threshold = 0.5 * float(min(gaps[:q]))
    lim = min(_exact(s) for s in slopes[h:])
    running_min = min(_exact(s) for s in slopes)
    fs = [float(s) for s in slopes]
    fg = [float(d) for d in gaps]
    return SequenceReport(
        slopes=fs, gaps=fg, partial_sums=partial, tail_increment=float(tail_inc), min_tail_gap=min_gap,
        gap_threshold=float(gap_threshold), liminf_estimate=float(lim), tol=tol,
        summability_ok=bool(tail_inc < _exact(tol)), divergence_ok=bool(min_gap > gap_threshold),
        liminf_zero=bool(running_min < _exact(tol)), pairwise_tail_gaps=pair,
    )


@dataclass
class Verdict:
    verdict: str
    detail: dict = field(default_factory=dict)

    @property
    def holds(self) -> bool:
        return self.verdict == "holds"

    def to_dict(self) -> dict:
        return asdict(self)


def cauchy_check(seq: Sequence, g: ExtendedFunction | None, modulus: Modulus | None, delta: float, *, slope=None,
                 dist: Callable | None = None, tol: float = DEFAULT_TAIL_TOL, rtol: float = 1e-12) -> Verdict:
    """Check ``d(z_n, z_m) <= (1/delta) sum_{n<=i<m} T[g](z_i) d(z_i, z_{i+1})`` on the tail.

    The tail is the last half of the prefix; the slope must stay above
    ``delta`` there and the weighted gap series must have settled.
    """
    if not delta > 0:
        raise PreconditionError("delta must be positive")
    slopes, dist = _resolve(seq, g, modulus, slope, dist)
    m = len(seq)
    h = m // 2
    if min(slopes[h:]) < delta:
        raise PreconditionError(f"liminf estimate {float(min(slopes[h:]))} is below delta={delta}")
    incs = [_exact(slopes[i]) * _exact(dist(seq[i], seq[i + 1])) for i in range(m - 1)]
    if sum(incs[h:], Fraction(0)) >= _exact(tol):
        raise PreconditionError("weighted gap series has not settled; summability fails on this prefix")
    worst = 0.0
    cum = [Fraction(0)]
    for v in incs:
        cum.append(cum[-1] + v)
    for n in range(h, m):
        for k in range(n + 1, m):
            lhs = _exact(dist(seq[n], seq[k]))
            rhs = (cum[k] - cum[n]) / _exact(delta)
            if lhs > rhs:
                worst = max(worst, float(lhs - rhs))
    bound = float((cum[-1] - cum[h]) / _exact(delta))
    ok = worst <= rtol * max(1.0, bound)
    return Verdict("holds" if ok else "fails", {"tail_bound": bound, "worst_excess": worst, "tail_start": h})


def infimizing_check(seq: Sequence[int], f: ExtendedFunction, *, inf_f: float | None = None, tol: float = 0.05,
                     n_samples: int = 10, seed: int = 0, rtol: float = 1e-12) -> Verdict:
    """Estimate ``liminf f(z_n) - inf f`` and replay the lemma's internal bound.

    The bound ``f(z_k) <= f(u) + G[f](z_k) d(z_k, u)`` is checked along the
    monotone subsequence of global slopes, for ``n_samples`` seeded points
    ``u`` plus every minimizer of ``f``.  ``rtol`` absorbs the rounding of
    the stored slope.
    """
    vals = [f(int(z)) for z in seq]
    lo = f.inf() if inf_f is None else inf_f
    h = len(vals) // 2
    est = min(vals[h:])
    gap = est - lo
    G = Modulus.global_()
    slopes = [G.at(f, int(z)) for z in seq]
    ks = monotone_subsequence(slopes)
    rng = np.random.default_rng(seed)
    dom = np.flatnonzero(f.domain_mask)
    us = sorted(set(rng.choice(dom, size=min(n_samples, dom.size), replace=False).tolist()) | set(f.argmin()))
    worst, checked = 0.0, 0
    for k in ks:
        z = int(seq[k])
        for u in us:
            excess = f(z) - (f(u) + slopes[k] * f.space.dist(z, u))
            scale = max(abs(f(z)), abs(f(u)), 1.0)
            worst = max(worst, excess / scale)
            checked += 1
    bound_ok = worst <= rtol
    return Verdict("holds" if (gap <= tol and bound_ok) else "fails", {
        "liminf_estimate": est, "inf_f": lo, "gap": gap, "tol": tol, "subsequence": ks,
        "sampled_u": us, "bound_checks": checked, "bound_worst_rel_excess": worst, "bound_ok": bound_ok,
    })


# --- determination oracle -----------------------------------------------------------------


def _profiles(values: np.ndarray, d: np.ndarray) -> np.ndarray:
    """Global-slope profiles of a batch of finite functions (rows)."""
    n = d.shape[0]
    off = ~np.eye(n, dtype=bool)
    diff = values[:, :, None] - values[:, None, :]
    q = np.zeros_like(diff)
    dd = np.where(off, d, 1.0)
    np.divide(np.maximum(diff, 0.0), dd[None, :, :], out=q, where=off[None, :, :])
    return q.max(axis=2)


@dataclass
class OracleReport:
    verdict: str
    n_points: int
    n_functions: int
    n_classes: int
    collision: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def determination_oracle(space: FiniteSpace, value_grid: Sequence[float], *, budget: int = 10**7,
                         threads: int = 1, chunk: int = 4096) -> OracleReport:
    """Enumerate every function with values in ``value_grid``.

    Functions are grouped by the bit pattern of their global-slope profile
    together with their minimum; the verdict holds iff all groups are
    singletons.
    """
    n = space.size
    grid = np.array(sorted(set(float(v) for v in value_grid)), dtype=float)
    total = len(grid) ** n
    if n > 6 or total > budget:
        raise BudgetExceeded(f"{len(grid)}^{n} = {total} functions exceeds the budget")
    d = space.distances
    codes = np.array(list(itertools.product(range(len(grid)), repeat=n)), dtype=np.int64).reshape(total, n)
    vals = grid[codes]
    starts = list(range(0, total, chunk))

    def work(s):
        v = vals[s:s + chunk]
        return _profiles(v, d), v.min(axis=1)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            parts = list(ex.map(work, starts))
    else:
        parts = [work(s) for s in starts]
    seen: dict = {}
    collision = []
    i = 0
    for prof, mins in parts:
        for p, mn in zip(prof, mins):
            key = (p.tobytes(), float(mn))
            if key in seen and not collision:
                collision = [vals[seen[key]].tolist(), vals[i].tolist()]
            seen.setdefault(key, i)
            i += 1
    return OracleReport("fails" if collision else "holds", n, total, len(seen), collision)


# --- comparison and existence ---------------------------------------------------------------


def comparison_check(f: ExtendedFunction, g: ExtendedFunction, modulus: Modulus, rho: float = 0.1,
                     tol: float | None = None) -> Verdict:
    """Check the comparison principle on a finite instance.

    Hypotheses: (i) ``T[f] < T[g]`` on ``dom g`` off ``Z_T(g)`` and
    (ii) ``f <= g`` on ``Z_T(g)``.  The conclusion ``f <= g`` on ``dom g`` is
    always observed, but only asserted when both hypotheses hold.  In that
    case every start point also gets a descent certificate
    ``f(x0) <= (1+rho) g(x0) - rho g(x_end)``.
    """
    if not isinstance(g.space, FiniteSpace):
        raise PreconditionError("comparison_check needs a finite space")
    if not (math.isfinite(f.inf()) and math.isfinite(g.inf())):
        raise PreconditionError("f and g must be bounded below")
    t = default_tol(g.space) if tol is None else tol
    Tf, Tg = modulus(f), modulus(g)
    Z = critical_set(Tg, t)
    dom = [int(x) for x in np.flatnonzero(g.domain_mask)]
    viol_i = [x for x in dom if x not in Z and not Tf(x) < Tg(x)]
    viol_ii = [x for x in Z if g(x) != INF and not f(x) <= g(x)]
    bad = [x for x in dom if not f(x) <= g(x)]
    asserted = not viol_i and not viol_ii
    detail = {
        "hypothesis_i": not viol_i, "hypothesis_i_violations": viol_i,
        "hypothesis_ii": not viol_ii, "hypothesis_ii_violations": viol_ii,
        "conclusion_observed": not bad, "conclusion_violations": bad, "conclusion_asserted": asserted,
    }
    if asserted:
        certs = []
        r = _fr(rho)
        for x0 in dom:
            tr = descent_run(f, g, modulus, x0, rho)
            ok = tr.status == "reached_critical" and all(tr.invariants.values())
            ok = ok and _fr(f(x0)) <= (1 + r) * _fr(g(x0)) - r * _fr(g(tr.final))
            certs.append(ok)
        detail["descent_certificates"] = all(certs)
        good = not bad and all(certs)
    else:
        good = True
    return Verdict("holds" if good else "fails", detail)


def critical_existence(f: ExtendedFunction, modulus: Modulus | None = None, seq_prefix_budget: int = 64, *,
                       tol: float | None = None, profile: ModulusProfile | Sequence[float] | None = None,
                       tail_tol: float = DEFAULT_TAIL_TOL) -> Verdict:
    """Look for a critical point or an asymptotically critical sequence.

    On a finite space the critical set of the global slope is the argmin and
    never empty.  On a grid, tol-critical nodes are reported first; failing
    that, the minimiser of the profile in each of ``seq_prefix_budget``
    equal windows forms a candidate sequence.  ``profile`` replaces the
    computed modulus profile, e.g. with a closed-form slope.
    """
    if not math.isfinite(f.inf()):
        raise PreconditionError("f must be bounded below")
    if isinstance(f.space, FiniteSpace):
        Z = critical_set((modulus or Modulus.global_())(f), 0.0 if tol is None else tol)
        return Verdict("found_critical", {"points": sorted(Z)})
    if not isinstance(f.space, Grid1D):
        raise PreconditionError("unsupported space")
    grid = f.space
    vals = np.asarray(profile.values if isinstance(profile, ModulusProfile) else
                      (profile if profile is not None else modulus(f).values), dtype=float)
    t = default_tol(grid) if tol is None else tol
    usable = f.domain_mask.copy()
    if grid.open_right:
        usable[-1] = False
    crit = np.flatnonzero(usable & (vals <= t))
    if crit.size:
        return Verdict("found_critical", {"points": crit.tolist(), "x": grid.nodes[crit].tolist()})
    edges = np.linspace(grid.a, grid.b, seq_prefix_budget + 1)
    seq = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        idx = np.flatnonzero(usable & (grid.nodes >= lo) & (grid.nodes < hi))
        if idx.size:
            seq.append(int(idx[np.argmin(vals[idx])]))
    if len(seq) < 4:
        return Verdict("inconclusive", {"reason": "too few windows"})
    rep = asymptotic_criticality_report(seq, slope=[vals[i] for i in seq], dist=grid.dist, tol=tail_tol)
    info = {"sequence": seq, "x": grid.nodes[seq].tolist(), "summability_ok": rep.summability_ok,
            "divergence_ok": rep.divergence_ok, "liminf_zero": rep.liminf_zero}
    return Verdict("found_asymptotic" if rep.asymptotically_critical else "inconclusive", info)
