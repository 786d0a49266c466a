"""Checkers for the descent-modulus axioms and metric compatibility.

Each checker returns an :class:`AxiomReport`.  A ``fails`` verdict always
carries a witness that :func:`recheck` can replay against the same inputs.
The two refutation routines rebuild the counterexamples showing that the
average modulus is not strongly compatible and that the sup-of-jumps operator
on the integers is not compatible at all.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .errors import NoWitness, PreconditionError
from .metric import INF, ExtendedFunction, FiniteSpace, Grid1D, Measure, build_finite_space, random_finite_space
from .moduli import Modulus, ThetaFunction, critical_set, default_tol, identity, power, linear


@dataclass
class AxiomReport:
    axiom: str
    verdict: str  # "holds" | "fails"
    witness: dict = field(default_factory=dict)
    trials: int = 1
    note: str = ""

    @property
    def holds(self) -> bool:
        return self.verdict == "holds"

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class CompatWitness:
    z: int
    g_gap: float
    f_gap: float
    ratio: float


def _holds(axiom, note="", trials=1):
    return AxiomReport(axiom, "holds", {}, trials, note)


def _fails(axiom, witness, note=""):
    return AxiomReport(axiom, "fails", witness, 1, note)


# --- single-instance checkers -----------------------------------------------------


def check_D0(modulus, f: ExtendedFunction) -> AxiomReport:
    """``dom T[f]`` must sit inside ``dom f``; our moduli put ``+inf`` exactly off it."""
    prof = modulus(f)
    bad = np.flatnonzero(np.isfinite(prof.values) & ~f.domain_mask)
    if bad.size:
        x = int(bad[0])
        return _fails("D0", {"x": x, "f(x)": f(x), "T[f](x)": prof(x)})
    return _holds("D0")


def check_D1(modulus, f: ExtendedFunction, tol: float | None = None) -> AxiomReport:
    t = default_tol(f.space) if tol is None else tol
    for x in f.argmin():
        v = modulus.at(f, x)
        if v > t:
            return _fails("D1", {"x": x, "f(x)": f(x), "T[f](x)": v})
    return _holds("D1")


def _pos(a: float) -> float:
    return a if a > 0 else 0.0


def check_D2(modulus, f: ExtendedFunction, g: ExtendedFunction, x: int) -> AxiomReport:
    """Monotonicity in its restated form.

    If ``{g(x)-g(z)}^+ <= {f(x)-f(z)}^+`` for every ``z`` in ``dom g`` then
    ``T[g](x) <= T[f](x)`` is required.  A failed premise makes the check
    vacuous; the verdict is then ``holds`` with a note.
    """
    if g(x) == INF:
        raise PreconditionError("x must lie in dom g")
    if f(x) == INF:
        return _holds("D2tilde", "T[f](x) = +inf")
    for z in np.flatnonzero(g.domain_mask):
        z = int(z)
        gg = _pos(g(x) - g(z))
        ff = _pos(f(x) - f(z)) if f(z) != INF else 0.0
        if gg > ff:
            return _holds("D2tilde", f"vacuous premise at z={z}")
    tg, tf = modulus.at(g, x), modulus.at(f, x)
    if tg > tf:
        return _fails("D2tilde", {"x": x, "T[g](x)": tg, "T[f](x)": tf})
    return _holds("D2tilde")


def check_D3(modulus, f: ExtendedFunction, x: int, r: float) -> AxiomReport:
    if not r > 1:
        raise PreconditionError("r must exceed 1")
    t = modulus.at(f, x)
    if not 0 < t < INF:
        return _holds("D3", "vacuous: T[f](x) is 0 or +inf")
    tr = modulus.at(f.scale(r), x)
    if not tr > t:
        return _fails("D3", {"x": x, "r": r, "T[f](x)": t, "T[rf](x)": tr})
    return _holds("D3")


def check_translation(modulus, f: ExtendedFunction, c: float) -> AxiomReport:
    if not math.isfinite(c):
        raise PreconditionError("c must be finite")
    p, q = modulus(f), modulus(f.shift(c))
    if not p.identical(q):
        x = int(np.flatnonzero(p.values != q.values)[0])
        return _fails("translation", {"x": x, "c": c, "T[f](x)": p(x), "T[f+c](x)": q(x)})
    return _holds("translation")


# --- compatibility ------------------------------------------------------------------


def _sandwich(modulus, f, g, x, delta) -> tuple[float, float]:
    tf, tg = modulus.at(f, x), modulus.at(g, x)
    if not tf < delta < tg:
        raise PreconditionError(f"need T[f](x) < delta < T[g](x); got {tf} < {delta} < {tg}")
    return tf, tg


def _witness(f, g, x, z) -> CompatWitness:
    d = f.space.dist(x, z)
    gg = g(x) - g(z)
    ff = _pos(f(x) - f(z)) if f(z) != INF else 0.0
    return CompatWitness(int(z), _pos(gg), ff, gg / d)


def compat_witnesses(f, g, x: int, delta: float, rho: float, theta_rho: ThetaFunction) -> list[int]:
    """Every ``z`` in ``dom g`` satisfying both clauses of condition (C)."""
    th = theta_rho(delta)
    out = []
    for z in np.flatnonzero(g.domain_mask):
        z = int(z)
        if z == x:
            continue
        gg = g(x) - g(z)
        ff = _pos(f(x) - f(z)) if f(z) != INF else 0.0
        if ff < (1 + rho) * _pos(gg) and th * f.space.dist(x, z) < gg:
            out.append(z)
    return out


def _best(g, x, candidates) -> int:
    # largest g-descent, then smallest index
    return min(candidates, key=lambda z: (-(g(x) - g(z)), z))


def find_compat_witness(modulus, rho: float, theta_rho: ThetaFunction, f, g, x: int, delta: float) -> CompatWitness:
    if not rho > 0:
        raise PreconditionError("rho must be positive")
    _sandwich(modulus, f, g, x, delta)
    cands = compat_witnesses(f, g, x, delta, rho, theta_rho)
    if not cands:
        raise NoWitness(f"no z satisfies (C) at x={x}, delta={delta}, theta={theta_rho.name}")
    return _witness(f, g, x, _best(g, x, cands))


def strong_witnesses(f, g, x: int, delta: float, theta: ThetaFunction) -> list[int]:
    th = theta(delta)
    out = []
    for z in np.flatnonzero(g.domain_mask):
        z = int(z)
        if z == x:
            continue
        d = f.space.dist(x, z)
        ff = (_pos(f(x) - f(z)) if f(z) != INF else 0.0) / d
        gg = _pos(g(x) - g(z)) / d
        if ff < th < gg:
            out.append(z)
    return out


def check_strong_compat(modulus, theta: ThetaFunction, f, g, x: int, delta: float) -> tuple[AxiomReport, CompatWitness | None]:
    tf, tg = _sandwich(modulus, f, g, x, delta)
    cands = strong_witnesses(f, g, x, delta, theta)
    if not cands:
        rep = _fails("D2hat", {"x": x, "delta": delta, "theta(delta)": theta(delta), "T[f](x)": tf, "T[g](x)": tg})
        return rep, None
    w = _witness(f, g, x, _best(g, x, cands))
    return _holds("D2hat"), w


def check_composition(modulus, phi: ThetaFunction, f, g, x: int, delta: float, rho: float) -> AxiomReport:
    """Critical sets and (C)-witnesses survive ``T -> phi o T``.

    A point ``z`` witnesses (C) for ``(T, theta, delta)`` iff it witnesses it
    for ``(phi o T, theta o phi^-1, phi(delta))``.
    """
    comp = Modulus.composed(phi, modulus) if isinstance(modulus, Modulus) else None
    for h in (f, g):
        p = modulus(h)
        q = comp(h)
        if critical_set(p, 0.0) != critical_set(q, 0.0):
            return _fails("composition", {"stage": "critical_set", "T": sorted(critical_set(p, 0.0)), "phiT": sorted(critical_set(q, 0.0))})
    theta = modulus.compat_theta(rho)
    theta_c = comp.compat_theta(rho)
    _sandwich(modulus, f, g, x, delta)
    _sandwich(comp, f, g, x, phi(delta))
    w1 = compat_witnesses(f, g, x, delta, rho, theta)
    w2 = compat_witnesses(f, g, x, phi(delta), rho, theta_c)
    if w1 != w2:
        return _fails("composition", {"stage": "witness", "x": x, "delta": delta, "T": w1, "phiT": w2})
    return _holds("composition", f"{len(w1)} witnesses transfer")


# --- counterexamples ------------------------------------------------------------------


@dataclass
class AverageCounterexample:
    delta: float
    theta: ThetaFunction
    t0: float
    grid: Grid1D
    f: ExtendedFunction
    g: ExtendedFunction
    psi: np.ndarray
    phi: np.ndarray
    M_f: float
    M_g: float


def average_counterexample(delta: float, theta: ThetaFunction, grid_step: float | None = None) -> AverageCounterexample:
    """Two functions on ``[0, 4 t0]`` whose average descents sandwich ``delta``.

    ``psi`` and ``phi`` are the quotients ``Delta^+ g(0, .)`` and
    ``Delta^+ f(0, .)``; both equal ``theta(delta)`` on ``[0, t0)`` and then
    decrease linearly to 0 at ``3 t0`` and ``2 t0``.  The linear branches are
    written relative to ``t0`` so that neither exceeds ``theta(delta)`` after
    rounding.
    """
    if not delta > 0:
        raise PreconditionError("delta must be positive")
    th = float(theta(delta))
    t0 = 3 * delta / (5 * th)
    step = t0 / 200 if grid_step is None else grid_step
    grid = Grid1D.with_step(0.0, 4 * t0, step, open_right=True)
    t = grid.nodes
    psi = np.where(t < t0, th, np.where(t <= 3 * t0, th - (5 * th**2 / (6 * delta)) * (t - t0), 0.0))
    phi = np.where(t < t0, th, np.where(t <= 2 * t0, th - (5 * th**2 / (3 * delta)) * (t - t0), 0.0))
    psi = np.maximum(psi, 0.0)
    phi = np.maximum(phi, 0.0)
    g = ExtendedFunction(grid, -t * psi)
    f = ExtendedFunction(grid, -t * phi)
    avg = Modulus.average(Measure.lebesgue(grid))
    return AverageCounterexample(delta, theta, t0, grid, f, g, psi, phi, avg.at(f, 0), avg.at(g, 0))


def refute_strong_compat_average(delta: float, theta: ThetaFunction | None = None, grid_step: float | None = None,
                                 rtol: float = 1e-6) -> AxiomReport:
    theta = identity() if theta is None else theta
    ce = average_counterexample(delta, theta, grid_step)
    th = float(theta(delta))
    # the stored functions must reproduce psi, phi as quotients at 0
    t = ce.grid.nodes[1:]
    qg = (ce.g(0) - ce.g.values[1:]) / t
    qf = (ce.f(0) - ce.f.values[1:]) / t
    quotient_err = float(max(np.max(np.abs(qg - ce.psi[1:])), np.max(np.abs(qf - ce.phi[1:]))))
    sandwich_nodes = np.flatnonzero((ce.phi < th) & (th < ce.psi))
    worse_nodes = np.flatnonzero((ce.phi < ce.psi) & (th <= ce.psi))
    integrals_ok = (abs(ce.M_g - 1.2 * delta) <= rtol * 1.2 * delta and abs(ce.M_f - 0.9 * delta) <= rtol * 0.9 * delta)
    witness = {
        "delta": delta,
        "theta": theta.name,
        "theta(delta)": th,
        "t0": ce.t0,
        "grid_step": ce.grid.step,
        "M[g](0)": ce.M_g,
        "M[f](0)": ce.M_f,
        "sandwich_nodes": sandwich_nodes.tolist(),
        "more_descent_and_enough_nodes": worse_nodes.tolist(),
        "quotient_error": quotient_err,
    }
    refuted = (integrals_ok and ce.M_f < delta < ce.M_g and sandwich_nodes.size == 0
               and worse_nodes.size == 0 and quotient_err <= 1e-12 * max(th, 1.0))
    if refuted:
        return _fails("D2hat", witness, "strong compatibility refuted for the average modulus")
    return AxiomReport("D2hat", "holds", witness, 1, "construction did not refute")


def nat_space(n_max: int, discrete: bool = False) -> FiniteSpace:
    """Points ``1..n_max`` with ``|m - n|`` or the 0/1 metric."""
    idx = np.arange(1, n_max + 1, dtype=float)
    d = np.abs(idx[:, None] - idx[None, :])
    if discrete:
        d = (d > 0).astype(float)
    return build_finite_space(d, labels=range(1, n_max + 1))


def nat_indicator(space: FiniteSpace, n: int) -> ExtendedFunction:
    """``f_n``: 0 at the point labelled ``n``, 1 elsewhere."""
    v = np.ones(space.size)
    v[n - 1] = 0.0
    return ExtendedFunction(space, v)


class OnSpace:
    """Evaluate ``modulus`` after moving ``f`` onto ``space`` (same point set).

    Lets an operator built from one metric be tested for compatibility with
    another.
    """

    def __init__(self, modulus: Modulus, space):
        self.modulus = modulus
        self.space = space

    def at(self, f, x):
        return self.modulus.at(f.on(self.space), x)

    def __call__(self, f):
        return self.modulus(f.on(self.space))


def default_theta_ladder() -> list[ThetaFunction]:
    return [identity(), linear(0.5), power(2)]


def refute_compat_nat(n_max: int, rho: float = 1.0, theta_grid: Sequence[ThetaFunction] | None = None,
                      delta: float = 0.5) -> AxiomReport:
    """The operator ``T[f](k) = sup_m {f(k) - f(m)}^+`` fails (C) under ``|m - n|``.

    ``T`` is the global slope for the 0/1 metric; witnesses are searched with
    the metric ``|m - n|``.  For every gauge in ``theta_grid`` some ``n`` makes
    the only admissible ``z`` (namely ``n``) too far away.
    """
    if n_max < 3:
        raise PreconditionError("n_max must be at least 3")
    if not 0 < delta < 1:
        raise PreconditionError("delta must lie in (0, 1)")
    theta_grid = default_theta_ladder() if theta_grid is None else list(theta_grid)
    X = nat_space(n_max)
    X0 = nat_space(n_max, discrete=True)
    T = OnSpace(Modulus.global_(), X0)
    f1 = nat_indicator(X, 1)
    T_f1 = T.at(f1, 0)
    T_fn = [T.at(nat_indicator(X, n), 0) for n in range(2, n_max + 1)]
    quotients = [(nat_indicator(X, n)(0) - nat_indicator(X, n)(n - 1)) / X.dist(0, n - 1) for n in range(2, n_max + 1)]
    exact = all(q == 1.0 / (n - 1) for q, n in zip(quotients, range(2, n_max + 1)))
    refuted_by = {}
    for theta in theta_grid:
        hit = None
        for n in range(2, n_max + 1):
            try:
                find_compat_witness(T, rho, theta, f1, nat_indicator(X, n), 0, delta)
            except NoWitness:
                hit = n
                break
        refuted_by[theta.name] = hit
    witness = {
        "n_max": n_max,
        "rho": rho,
        "delta": delta,
        "T[f1](1)": T_f1,
        "T[fn](1)": sorted(set(T_fn)),
        "quotients_exact": exact,
        "refuted_by": refuted_by,
        "required_threshold": [1.0 / (n - 1) for n in range(2, n_max + 1)],
    }
    all_refuted = all(v is not None for v in refuted_by.values())
    if T_f1 == 0.0 and all(v == 1.0 for v in T_fn) and exact and all_refuted:
        return _fails("C", witness, "not metrically compatible for every tested gauge")
    return AxiomReport("C", "holds", witness, 1, "some gauge was not refuted")


# --- randomized suites ------------------------------------------------------------------

DYADIC = 64.0


def random_dyadic_function(rng: np.random.Generator, space, p_inf: float = 0.2) -> ExtendedFunction:
    """Values ``k / 64`` with ``|k| <= 256``, some set to ``+inf``.

    Dyadic values keep every difference exact, so translation invariance can
    be asserted bit for bit.
    """
    v = rng.integers(-256, 257, size=space.size) / DYADIC
    holes = rng.random(space.size) < p_inf
    holes[rng.integers(space.size)] = False
    return ExtendedFunction(space, np.where(holes, INF, v))


def dominated_function(rng: np.random.Generator, f: ExtendedFunction, x: int) -> ExtendedFunction:
    """A ``g`` with ``{g(x)-g(z)}^+ <= {f(x)-f(z)}^+`` for all ``z`` (exactly)."""
    fx = f(x)
    out = np.empty(f.space.size)
    for z in range(f.space.size):
        if z == x:
            out[z] = fx
        elif f(z) < fx:
            a = rng.integers(0, 5) / 4.0
            out[z] = fx - a * (fx - f(z))
        elif rng.random() < 0.2:
            out[z] = INF
        else:
            out[z] = fx + rng.integers(0, 65) / DYADIC
    c = rng.integers(-64, 65) / DYADIC
    return ExtendedFunction(f.space, out).shift(c)


def schedule_for(space: FiniteSpace) -> tuple[float, float, float]:
    """Three decreasing radii between the largest and the median distance."""
    n = space.size
    off = space.distances[~np.eye(n, dtype=bool)]
    hi, lo = float(off.max()), float(np.median(off))
    if hi <= lo:
        return (2 * lo, 1.5 * lo, lo)
    mid = math.sqrt(hi * lo)
    if not hi > mid > lo:
        return (2 * lo, 1.5 * lo, lo)
    return (hi, mid, lo)


MODULUS_KINDS = ("global", "local", "average", "diffusion")


def modulus_for(kind: str, space: FiniteSpace, rng: np.random.Generator) -> Modulus:
    if kind == "global":
        return Modulus.global_()
    if kind == "local":
        return Modulus.local(schedule_for(space))
    w = 0.05 + rng.random(space.size)
    mu = Measure(space, w / w.sum())
    if kind == "average":
        return Modulus.average(mu)
    if kind == "diffusion":
        return Modulus.diffusion(mu, schedule_for(space))
    raise ValueError(f"unknown modulus kind {kind!r}")


@dataclass
class SuiteResult:
    modulus: str
    trials: int
    seed: int
    failures: dict
    first_witness: dict
    vacuous_D2: int = 0

    @property
    def passed(self) -> bool:
        return not any(self.failures.values())

    def to_dict(self) -> dict:
        return asdict(self)


SUITE_AXIOMS = ("D0", "D1", "D2tilde", "D3", "translation")


def run_trial(kind: str, rng: np.random.Generator, modulus_factory=modulus_for) -> list[AxiomReport]:
    n = int(rng.integers(2, 8))
    space = random_finite_space(rng, n)
    T = modulus_factory(kind, space, rng)
    f = random_dyadic_function(rng, space)
    dom = np.flatnonzero(f.domain_mask)
    x = int(dom[rng.integers(dom.size)])
    if rng.random() < 0.5:
        g = dominated_function(rng, f, x)
    else:
        g = random_dyadic_function(rng, space, p_inf=0.0)
        g = ExtendedFunction(space, np.where(np.arange(n) == x, g(x), g.values))
    r = 1.0 + 2.0 * (1.0 - rng.random())
    c = float(rng.integers(-512, 513)) / DYADIC
    return [
        check_D0(T, f),
        check_D1(T, f),
        check_D2(T, f, g, x),
        check_D3(T, f, x, r),
        check_translation(T, f, c),
    ]


def run_axiom_suite(kind: str, trials: int = 1000, seed: int = 0, modulus_factory=modulus_for) -> SuiteResult:
    """Seeded property suite; trial ``i`` uses its own child generator."""
    children = np.random.SeedSequence(seed).spawn(trials)
    failures = {a: 0 for a in SUITE_AXIOMS}
    first = {}
    vacuous = 0
    for i, ss in enumerate(children):
        reps = run_trial(kind, np.random.default_rng(ss), modulus_factory)
        for rep in reps:
            if rep.axiom == "D2tilde" and rep.note.startswith("vacuous"):
                vacuous += 1
            if not rep.holds:
                failures[rep.axiom] += 1
                first.setdefault(rep.axiom, {"trial": i, **rep.witness})
    return SuiteResult(kind, trials, seed, failures, first, vacuous)
