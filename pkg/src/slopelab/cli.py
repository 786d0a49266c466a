"""Command-line entry point: ``slopelab <command> [options]``.

Exit status is 0 when every asserted property holds, 1 when one fails (the
report then carries the witness) and 2 on usage errors.  A run is fully
described by its :class:`RunConfig`; reports embed it together with a hash of
the inputs and never a timestamp, so equal configs give byte-identical
output.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import axioms as ax
from . import continuum as cl
from . import descent as de
from .errors import SlopeLabError
from .io import csv_text, dumps, function_from_dict, measure_from_dict, profile_to_dict, space_from_dict, write_text
from .metric import ExtendedFunction, FiniteSpace, Grid1D, Measure, random_finite_space
from .moduli import Modulus, ModulusProfile, critical_set, identity, linear, power, sqrt_times_one_plus

SCHEMA = "slopelab/1"
COMMANDS = ("modulus", "axioms", "descend", "sequence", "oracle", "flow", "example", "determine")
EXAMPLES = ("xsq-over-y", "block", "average-fail", "nat")


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    seed: int = 0
    tolerances: dict = field(default_factory=lambda: {"criticality": 1e-9, "quadrature": 1e-6, "tail": 1e-6})
    budgets: dict = field(default_factory=lambda: {"enumeration": 10**7, "iteration": 0, "prefix": 30})
    params: dict = field(default_factory=dict)
    output: str | None = None
    format: str = "json"

    def validate(self) -> None:
        if self.command not in COMMANDS:
            raise UsageError(f"unknown command {self.command!r}")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise UsageError("seed must be a nonnegative integer")
        for k, v in self.tolerances.items():
            if not isinstance(v, (int, float)) or not v > 0:
                raise UsageError(f"tolerance {k!r} must be positive")
        for k, v in self.budgets.items():
            if not isinstance(v, int) or (v < 1 and not (k == "iteration" and v == 0)):
                raise UsageError(f"budget {k!r} must be an integer >= 1")
        if self.format not in ("json", "csv"):
            raise UsageError("format must be json or csv")
        allowed = PARAMS[self.command]
        unknown = sorted(set(self.params) - set(allowed))
        if unknown:
            raise UsageError(f"unknown parameter(s) for {self.command}: {', '.join(unknown)}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("output")
        return d


PARAMS = {
    "modulus": {"input": None, "kind": "global", "schedule": None},
    "axioms": {"modulus": "global", "trials": 1000},
    "descend": {"input": None, "random_points": 6, "x0": 0, "rho": 0.1, "modulus": "global"},
    "sequence": {"name": "block", "n_max": 30, "gap_threshold": None},
    "oracle": {"n_points": [3, 4], "spaces": 20, "grid": [0.0, 1.0, 2.0, 3.0]},
    "flow": {"function": "quadratic", "x0": [1.0, 0.0], "dt": 1e-3, "t_max": 10.0, "ds": 1e-3},
    "example": {"name": None, "delta": 1.0, "c": 1.0, "T": 100.0, "n_max": 50, "x_max": 31.0, "n_points": 61,
                "rho": 1.0},
    "determine": {"input": None, "random_points": 4, "modulus": "global", "rho": 0.1},
}


# --- modulus helpers ------------------------------------------------------------------------


class OffsetModulus:
    """Global slope plus one: violates the minimum axiom, used to exercise exit 1."""

    name = "offset"

    def __init__(self):
        self._base = Modulus.global_()

    def at(self, f, x):
        return self._base.at(f, x) + 1.0

    def __call__(self, f):
        p = self._base(f)
        return ModulusProfile(p.space, p.values + 1.0, "offset")


def _modulus_factory(kind):
    if kind == "offset":
        return lambda _kind, space, rng: OffsetModulus()
    return ax.modulus_for


def _build_modulus(kind: str, space, schedule=None, measure=None) -> Modulus:
    if kind == "global":
        return Modulus.global_()
    if kind == "local":
        return Modulus.local(schedule or _default_schedule(space))
    mu = measure or (Measure.lebesgue(space) if isinstance(space, Grid1D) else Measure.uniform(space))
    if kind == "average":
        return Modulus.average(mu)
    if kind == "diffusion":
        return Modulus.diffusion(mu, schedule or _default_schedule(space))
    raise UsageError(f"unknown modulus {kind!r}")


def _default_schedule(space):
    if isinstance(space, Grid1D):
        h = space.step
        return (4 * h, 2 * h, h)
    return ax.schedule_for(space)


def _load_input(path: str | None) -> tuple[dict, str]:
    if path is None:
        return {}, ""
    try:
        text = Path(path).read_text()
        return json.loads(text), text
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read input {path}: {exc}") from exc


def _finite_instance(cfg: RunConfig, doc: dict, rng):
    if doc:
        space = space_from_dict(doc["space"])
        f = function_from_dict({"space": doc["space"], "values": doc["f"]}, space)
        g = function_from_dict({"space": doc["space"], "values": doc["g"]}, space)
        return space, f, g
    n = int(cfg.params["random_points"])
    space = random_finite_space(rng, n)
    g = ExtendedFunction(space, rng.integers(-256, 257, n) / 64.0)
    f = ExtendedFunction(space, np.zeros(n))
    return space, f, g


# --- commands -----------------------------------------------------------------------------


def cmd_modulus(cfg, doc, threads):
    if not doc:
        raise UsageError("modulus needs --input with a space and a function")
    space = space_from_dict(doc["space"])
    f = function_from_dict({"space": doc["space"], "values": doc["values"]}, space)
    mu = measure_from_dict({"space": doc["space"], "weights": doc["measure"]}, space) if "measure" in doc else None
    T = _build_modulus(cfg.params["kind"], space, cfg.params["schedule"], mu)
    prof = T(f)
    tol = 0.0 if isinstance(space, FiniteSpace) else cfg.tolerances["criticality"]
    return True, {"modulus": T.name, "profile": profile_to_dict(prof), "critical_set": sorted(critical_set(prof, tol))}, None


def cmd_axioms(cfg, doc, threads):
    kind = cfg.params["modulus"]
    kinds = list(ax.MODULUS_KINDS) if kind == "all" else [kind]
    if any(k not in ax.MODULUS_KINDS + ("offset",) for k in kinds):
        raise UsageError(f"unknown modulus {kind!r}")
    trials = int(cfg.params["trials"])
    if trials < 1:
        raise UsageError("trials must be >= 1")

    def one(k):
        return ax.run_axiom_suite("global" if k == "offset" else k, trials, cfg.seed, _modulus_factory(k))

    if threads > 1 and len(kinds) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(one, kinds))
    else:
        results = [one(k) for k in kinds]
    out = {}
    for k, r in zip(kinds, results):
        d = r.to_dict()
        d["modulus"] = k
        out[k] = d
    return all(r.passed for r in results), {"suites": out}, None


def cmd_descend(cfg, doc, threads):
    rng = np.random.default_rng(cfg.seed)
    space, f, g = _finite_instance(cfg, doc, rng)
    T = _build_modulus(cfg.params["modulus"], space)
    budget = cfg.budgets["iteration"] or None
    tr = de.descent_run(f, g, T, int(cfg.params["x0"]), float(cfg.params["rho"]), budget)
    ok = all(tr.invariants.values())
    return ok, {"trace": tr.to_dict(), "points": tr.points}, tr.rows()


def _sequence_instance(name, n_max):
    if name == "block":
        return cl.block_sequence(n_max), cl.block_slope, None
    if name == "integers":
        return [float(n) for n in range(1, n_max + 1)], cl.block_slope, None
    if name == "constant":
        return [1.5] * n_max, cl.block_slope, None
    raise UsageError(f"unknown sequence {name!r}")


def cmd_sequence(cfg, doc, threads):
    n_max = int(cfg.params["n_max"] or cfg.budgets["prefix"])
    seq, slope, dist = _sequence_instance(cfg.params["name"], n_max)
    rep = de.asymptotic_criticality_report(seq, slope=slope, dist=dist, gap_threshold=cfg.params["gap_threshold"],
                                           tol=cfg.tolerances["tail"])
    rows = [{"n": i + 1, "z": float(z), "slope": s, "gap": (rep.gaps[i] if i < len(rep.gaps) else 0.0),
             "partial_sum": (rep.partial_sums[i] if i < len(rep.partial_sums) else rep.partial_sums[-1])}
            for i, (z, s) in enumerate(zip(seq, rep.slopes))]
    d = rep.to_dict()
    d.pop("pairwise_tail_gaps")
    d["asymptotically_critical"] = rep.asymptotically_critical
    # the report is evidence, not an assertion: only recomputability is asserted
    ok = rep.recompute_flags() == (rep.summability_ok, rep.divergence_ok, rep.liminf_zero)
    return ok, {"sequence": cfg.params["name"], "report": d}, rows


def oracle_sweep(seed: int, n_points, n_spaces: int, grid, budget: int, threads: int = 1) -> dict:
    """Oracle verdicts over seeded metric-repaired spaces of each size."""
    ss = np.random.SeedSequence(seed)
    jobs = []
    for n in n_points:
        for child in ss.spawn(n_spaces):
            jobs.append((n, child))

    def run(job):
        n, child = job
        space = random_finite_space(np.random.default_rng(child), n)
        return n, de.determination_oracle(space, grid, budget=budget)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(run, jobs))
    else:
        results = [run(j) for j in jobs]
    runs = [{"n_points": n, **r.to_dict()} for n, r in results]
    return {"spaces": len(runs), "all_singletons": all(r["verdict"] == "holds" for r in runs), "runs": runs}


def cmd_oracle(cfg, doc, threads):
    n_points = cfg.params["n_points"]
    n_points = [n_points] if isinstance(n_points, int) else list(n_points)
    out = oracle_sweep(cfg.seed, n_points, int(cfg.params["spaces"]), [float(v) for v in cfg.params["grid"]],
                       cfg.budgets["enumeration"], threads)
    return out["all_singletons"], out, None


def _smooth(name):
    if name == "quadratic":
        return cl.quadratic()
    if name == "xsq-over-y":
        return cl.xsq_over_y()
    raise UsageError(f"unknown function {name!r}")


def cmd_flow(cfg, doc, threads):
    p = cfg.params
    g = _smooth(p["function"])
    curve = cl.gradient_flow(g, tuple(p["x0"]), float(p["dt"]), float(p["t_max"]))
    rep = cl.integrability_report(cl.arc_length_reparam(curve, float(p["ds"])), g)
    summary = {k: v for k, v in rep.items() if k not in ("partial_integrals", "summability_sums")}
    nonincreasing = bool(np.all(np.diff(curve.g_values) <= 0))
    bound_ok = bool(curve.slope_integral[-1] <= curve.g_values[0] - (g.inf_value or 0.0) + 1e-6)
    res = {"status": curve.status, "exit": curve.exit, "nodes": len(curve), "end_point": curve.points[-1],
           "g_end": float(curve.g_values[-1]), "length": curve.length, "slope_integral": float(curve.slope_integral[-1]),
           "g_nonincreasing": nonincreasing, "bound_ok": bound_ok, "integrability": summary}
    return nonincreasing and bound_ok, res, curve.rows()


THETAS = {"identity": identity, "2t": lambda: linear(2.0), "sqrt*(1+t)": sqrt_times_one_plus}


def cmd_example(cfg, doc, threads):
    p = cfg.params
    name = p["name"]
    if name == "average-fail":
        rep = ax.refute_strong_compat_average(float(p["delta"]), identity())
        return rep.verdict == "fails", {"example": name, "report": rep.to_dict()}, None
    if name == "nat":
        rep = ax.refute_compat_nat(int(p["n_max"]), float(p["rho"]))
        return rep.verdict == "fails", {"example": name, "report": rep.to_dict()}, None
    if name == "xsq-over-y":
        rep = cl.example_xsq_over_y(float(p["c"]), float(p["T"]))
        ok = rep["level_max_dev"] <= 1e-12 and not rep["asymptotically_critical"]
        return ok, {"example": name, "report": rep}, None
    if name == "block":
        b = cl.example_block_function(float(p["x_max"]), int(p["n_points"]))
        n_max = int(cfg.budgets["prefix"])
        seq = cl.block_sequence(n_max)
        rep = de.asymptotic_criticality_report(seq, slope=cl.block_slope, tol=cfg.tolerances["tail"])
        f, idx = cl.block_point_cloud(n_max)
        inf_rep = de.infimizing_check(idx, f, inf_f=0.0, seed=cfg.seed)
        d = rep.to_dict()
        d.pop("pairwise_tail_gaps")
        res = {"example": name, "checks": b.checks, "g(1.5)": cl.block_value(1.5), "s(1.5)": cl.block_slope(1.5),
               "s(2-1e-3)": cl.block_slope(2 - 1e-3), "sequence": d, "infimizing": inf_rep.to_dict()}
        ok = (b.checks["zero_set_empty"] and b.checks["g_rel_error"] <= 1e-12 and rep.asymptotically_critical
              and inf_rep.holds)
        rows = [{"x": float(x), "g": float(gv), "slope": float(s)} for x, gv, s in
                zip(b.grid.nodes, b.g.values, b.slope.values)]
        return ok, res, rows
    raise UsageError(f"example name must be one of {', '.join(EXAMPLES)}")


def cmd_determine(cfg, doc, threads):
    rng = np.random.default_rng(cfg.seed)
    space, f, g = _finite_instance(cfg, doc, rng)
    if not doc:
        f = ExtendedFunction(space, rng.integers(-256, 257, space.size) / 64.0)
    T = _build_modulus(cfg.params["modulus"], space)
    G = Modulus.global_()
    same_profile = G(f).identical(G(g))
    same_inf = f.inf() == g.inf()
    equal = bool(np.array_equal(f.values, g.values))
    determination_ok = equal or not (same_profile and same_inf)
    fg = de.comparison_check(f, g, T, float(cfg.params["rho"]))
    gf = de.comparison_check(g, f, T, float(cfg.params["rho"]))
    res = {"same_global_slope": same_profile, "same_inf": same_inf, "functions_equal": equal,
           "determination_ok": determination_ok, "compare_f_le_g": fg.to_dict(), "compare_g_le_f": gf.to_dict()}
    return determination_ok and fg.holds and gf.holds, res, None


HANDLERS = {"modulus": cmd_modulus, "axioms": cmd_axioms, "descend": cmd_descend, "sequence": cmd_sequence,
            "oracle": cmd_oracle, "flow": cmd_flow, "example": cmd_example, "determine": cmd_determine}


# --- dispatch -----------------------------------------------------------------------------


def run(cfg: RunConfig, threads: int = 1) -> tuple[int, str]:
    """Execute ``cfg`` and return ``(exit_status, report_text)``."""
    cfg.validate()
    doc, raw = _load_input(cfg.params.get("input"))
    try:
        ok, result, rows = HANDLERS[cfg.command](cfg, doc, threads)
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"malformed input: {exc}") from exc
    if cfg.format == "csv":
        if rows is None:
            raise UsageError(f"{cfg.command} has no tabular output; use --format json")
        return (0 if ok else 1), csv_text(rows)
    cfg_d = cfg.to_dict()
    digest = hashlib.sha256((json.dumps(cfg_d, sort_keys=True) + raw).encode()).hexdigest()
    report = {"schema": SCHEMA, "command": cfg.command, "config": cfg_d, "input_sha256": digest, "ok": ok,
              "result": result}
    return (0 if ok else 1), dumps(report)


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON RunConfig; flags override its values")
    common.add_argument("--seed", type=int)
    common.add_argument("--output", "-o")
    common.add_argument("--format", choices=("json", "csv"))
    common.add_argument("--threads", type=int, help="worker threads (default: $SLOPELAB_THREADS or 1)")
    common.add_argument("--tol-critical", type=float, dest="tol_criticality")
    common.add_argument("--tol-quadrature", type=float, dest="tol_quadrature")
    common.add_argument("--tol-tail", type=float, dest="tol_tail")
    common.add_argument("--budget-enum", type=int, dest="budget_enumeration")
    common.add_argument("--budget-iter", type=int, dest="budget_iteration")
    common.add_argument("--budget-prefix", type=int, dest="budget_prefix")

    p = argparse.ArgumentParser(prog="slopelab", description="Descent moduli laboratory")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("modulus", parents=[common], help="evaluate a descent modulus")
    s.add_argument("--input")
    s.add_argument("--kind", choices=("global", "local", "average", "diffusion"))
    s.add_argument("--schedule", type=float, nargs="+")

    s = sub.add_parser("axioms", parents=[common], help="seeded axiom property suites")
    s.add_argument("--modulus", choices=ax.MODULUS_KINDS + ("all", "offset"))
    s.add_argument("--trials", type=int)

    s = sub.add_parser("descend", parents=[common], help="basic iteration scheme on a finite instance")
    s.add_argument("--input")
    s.add_argument("--random-points", type=int)
    s.add_argument("--x0", type=int)
    s.add_argument("--rho", type=float)
    s.add_argument("--modulus", choices=ax.MODULUS_KINDS)

    s = sub.add_parser("sequence", parents=[common], help="asymptotic criticality report")
    s.add_argument("--name", choices=("block", "integers", "constant"))
    s.add_argument("--n-max", type=int)
    s.add_argument("--gap-threshold", type=float)

    s = sub.add_parser("oracle", parents=[common], help="exhaustive global-slope determination oracle")
    s.add_argument("--n-points", type=int, nargs="+")
    s.add_argument("--spaces", type=int)
    s.add_argument("--grid", type=float, nargs="+")

    s = sub.add_parser("flow", parents=[common], help="RK4 steepest-descent curve")
    s.add_argument("--function", choices=("quadratic", "xsq-over-y"))
    s.add_argument("--x0", type=float, nargs=2)
    s.add_argument("--dt", type=float)
    s.add_argument("--t-max", type=float)
    s.add_argument("--ds", type=float)

    s = sub.add_parser("example", parents=[common], help="reproduce a worked example")
    s.add_argument("name", nargs="?", choices=EXAMPLES)
    s.add_argument("--delta", type=float)
    s.add_argument("--c", type=float)
    s.add_argument("--T", type=float, dest="T")
    s.add_argument("--n-max", type=int)
    s.add_argument("--x-max", type=float)
    s.add_argument("--n-points", type=int)
    s.add_argument("--rho", type=float)

    s = sub.add_parser("determine", parents=[common], help="determination and comparison on a finite instance")
    s.add_argument("--input")
    s.add_argument("--random-points", type=int)
    s.add_argument("--modulus", choices=ax.MODULUS_KINDS)
    s.add_argument("--rho", type=float)
    return p


_COMMON = {"config", "seed", "output", "format", "threads", "command"}


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    base: dict = {}
    if ns.config:
        try:
            base = json.loads(Path(ns.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config: {exc}") from exc
        if not isinstance(base, dict):
            raise UsageError("config must be a JSON object")
        extra = set(base) - {"command", "seed", "tolerances", "budgets", "params", "format"}
        if extra:
            raise UsageError(f"unknown config keys: {', '.join(sorted(extra))}")
        if base.get("command", ns.command) != ns.command:
            raise UsageError("config command does not match the subcommand")
    cfg = RunConfig(ns.command)
    cfg.seed = base.get("seed", cfg.seed)
    if not isinstance(base.get("tolerances", {}), dict) or not isinstance(base.get("budgets", {}), dict):
        raise UsageError("tolerances and budgets must be objects")
    cfg.tolerances.update(base.get("tolerances", {}))
    cfg.budgets.update(base.get("budgets", {}))
    cfg.format = base.get("format", cfg.format)
    params = dict(PARAMS[ns.command])
    given = base.get("params", {})
    if not isinstance(given, dict):
        raise UsageError("params must be an object")
    params.update(given)
    for key, val in vars(ns).items():
        if val is None or key in _COMMON:
            continue
        if key.startswith("tol_"):
            cfg.tolerances[key[4:]] = val
        elif key.startswith("budget_"):
            cfg.budgets[key[7:]] = val
        else:
            params[key] = val
    if ns.seed is not None:
        cfg.seed = ns.seed
    if ns.format is not None:
        cfg.format = ns.format
    cfg.output = ns.output
    cfg.params = params
    if ns.command == "example" and params.get("name") is None:
        raise UsageError("example needs a name")
    return cfg


def _threads(ns) -> int:
    if ns.threads is not None:
        return max(1, ns.threads)
    env = os.environ.get("SLOPELAB_THREADS")
    try:
        return max(1, int(env)) if env else 1
    except ValueError:
        return 1


def main(argv=None) -> int:
    parser = _parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = config_from_args(ns)
        status, text = run(cfg, _threads(ns))
    except UsageError as exc:
        print(f"slopelab: error: {exc}", file=sys.stderr)
        return 2
    except SlopeLabError as exc:
        print(f"slopelab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    write_text(text, cfg.output)
    return status


if __name__ == "__main__":
    sys.exit(main())
