import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from slopelab import io
from slopelab.metric import INF, ExtendedFunction, Grid1D, Measure, random_finite_space
from slopelab.moduli import Modulus, ModulusProfile

finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2**32 - 1), st.data())
def test_function_round_trip_is_exact(seed, data):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 8))
    X = random_finite_space(rng, n)
    vals = data.draw(st.lists(st.one_of(finite, st.just(INF)), min_size=n, max_size=n).filter(
        lambda v: any(x != INF for x in v)))
    f = ExtendedFunction(X, vals)
    d = json.loads(io.dumps(io.function_to_dict(f)))
    h = io.function_from_dict(d)
    assert np.array_equal(h.values, f.values)
    assert np.array_equal(h.space.distances, X.distances)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_profile_and_measure_round_trip(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 7))
    X = random_finite_space(rng, n)
    f = ExtendedFunction(X, rng.normal(size=n))
    p = Modulus.local((2.0, 1.0))(f)
    q = io.profile_from_dict(json.loads(io.dumps(io.profile_to_dict(p))))
    assert q.identical(p)
    mu = Measure.uniform(X)
    nu = io.measure_from_dict(json.loads(io.dumps(io.measure_to_dict(mu))))
    assert np.array_equal(nu.weights, mu.weights)


def test_grid_round_trip_and_inf_token():
    G = Grid1D(1.0, 3.0, 51, open_right=True)
    H = io.space_from_dict(io.space_to_dict(G))
    assert io.space_to_dict(H) == io.space_to_dict(G) and np.array_equal(H.nodes, G.nodes)
    p = ModulusProfile(G, [INF] + [0.5] * 50, "local")
    d = io.profile_to_dict(p)
    assert d["values"][0] == "inf"
    assert io.profile_from_dict(d).values[0] == INF


def test_dumps_is_deterministic_and_strict():
    obj = {"b": np.float64(0.1), "a": [np.int64(3), INF], "c": {2, 1}}
    text = io.dumps(obj)
    assert text == io.dumps(obj)
    assert json.loads(text) == {"a": [3, "inf"], "b": 0.1, "c": [1, 2]}
    with pytest.raises(ValueError):
        io.dumps(float("nan"))


def test_csv_text():
    rows = [{"t": 0.1, "x": 1}, {"t": 1 / 3, "x": 2}]
    text = io.csv_text(rows)
    lines = text.splitlines()
    assert lines[0] == "t,x" and float(lines[2].split(",")[0]) == 1 / 3
    assert io.csv_text([]) == ""
