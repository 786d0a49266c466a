"""JSON and CSV serialization.

``+inf`` is written as the string ``"inf"`` so documents stay strict JSON.
Floats go through ``repr`` which round-trips exactly.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
from fractions import Fraction
from pathlib import Path

import numpy as np

from .metric import INF, ExtendedFunction, FiniteSpace, Grid1D, Measure, MetricSpace
from .moduli import ModulusProfile

INF_TOKEN = "inf"


def _num(v):
    if v == INF:
        return INF_TOKEN
    if isinstance(v, float) and math.isnan(v):
        raise ValueError("NaN is not serializable")
    return v


def _unnum(v) -> float:
    return INF if v == INF_TOKEN else float(v)


def to_jsonable(obj):
    """Recursively convert results into plain JSON values."""
    if isinstance(obj, (bool, type(None), str)):
        return obj
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _num(float(obj))
    if isinstance(obj, Fraction):
        return _num(float(obj))
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, set, frozenset)):
        items = sorted(obj) if isinstance(obj, (set, frozenset)) else obj
        return [to_jsonable(v) for v in items]
    if isinstance(obj, MetricSpace):
        return space_to_dict(obj)
    if dataclasses.is_dataclass(obj):
        return {f.name: to_jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)
                if f.repr and not callable(getattr(obj, f.name))}
    if hasattr(obj, "members"):
        return sorted(obj.members)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj) -> str:
    """Deterministic JSON text (sorted keys, fixed indentation, trailing newline)."""
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


# --- typed round trips ----------------------------------------------------------------


def space_to_dict(space: MetricSpace) -> dict:
    if isinstance(space, FiniteSpace):
        out = {"kind": "finite", "distances": space.distances.tolist()}
        if space.labels is not None:
            out["labels"] = list(space.labels)
        return out
    if isinstance(space, Grid1D):
        return {"kind": "grid1d", "a": space.a, "b": space.b, "n_points": space.n_points,
                "open_right": space.open_right}
    raise TypeError(f"cannot serialize space {type(space).__name__}")


def space_from_dict(d: dict) -> MetricSpace:
    from .metric import build_finite_space

    kind = d.get("kind")
    if kind == "finite":
        return build_finite_space(d["distances"], d.get("labels"))
    if kind == "grid1d":
        return Grid1D(float(d["a"]), float(d["b"]), int(d["n_points"]), bool(d.get("open_right", False)))
    raise ValueError(f"unknown space kind {kind!r}")


def function_to_dict(f: ExtendedFunction) -> dict:
    return {"space": space_to_dict(f.space), "values": [_num(float(v)) for v in f.values]}


def function_from_dict(d: dict, space: MetricSpace | None = None) -> ExtendedFunction:
    sp = space_from_dict(d["space"]) if space is None else space
    return ExtendedFunction(sp, np.array([_unnum(v) for v in d["values"]]))


def measure_to_dict(mu: Measure) -> dict:
    return {"space": space_to_dict(mu.space), "weights": mu.weights.tolist(), "rule": mu.rule}


def measure_from_dict(d: dict, space: MetricSpace | None = None) -> Measure:
    sp = space_from_dict(d["space"]) if space is None else space
    return Measure(sp, np.array(d["weights"], dtype=float), d.get("rule", "trapezoid"))


def profile_to_dict(p: ModulusProfile) -> dict:
    out = {"space": space_to_dict(p.space), "tag": p.tag, "values": [_num(float(v)) for v in p.values]}
    if p.oscillation is not None:
        out["oscillation"] = [_num(float(v)) for v in p.oscillation]
    return out


def profile_from_dict(d: dict, space: MetricSpace | None = None) -> ModulusProfile:
    sp = space_from_dict(d["space"]) if space is None else space
    osc = d.get("oscillation")
    return ModulusProfile(sp, np.array([_unnum(v) for v in d["values"]]), d["tag"],
                          None if osc is None else np.array([_unnum(v) for v in osc]))


# --- CSV -----------------------------------------------------------------------------------


def csv_text(rows: list[dict]) -> str:
    if not rows:
        return ""
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0].keys()), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (repr(float(v)) if isinstance(v, (float, np.floating)) else v) for k, v in r.items()})
    return buf.getvalue()


def write_text(text: str, path: str | Path | None) -> None:
    if path is None or str(path) == "-":
        import sys

        sys.stdout.write(text)
    else:
        Path(path).write_text(text)
