import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from slopelab.errors import EmptyTruncation, ImproperFunction, MetricViolation, SpaceMismatch, ZeroDistanceCollision
from slopelab.metric import (
    INF,
    ExtendedFunction,
    Grid1D,
    Measure,
    PointSet,
    build_finite_space,
    metric_repair,
    random_finite_space,
    sublevel_set,
    truncate,
    validate_metric,
)


def chain(n):
    i = np.arange(n, dtype=float)
    return build_finite_space(np.abs(i[:, None] - i[None, :]))


def test_two_point_space():
    X = build_finite_space([[0, 1], [1, 0]])
    assert X.size == 2 and X.dist(0, 1) == 1.0


@pytest.mark.parametrize(
    "matrix, kind, where",
    [
        ([[0, 1], [2, 0]], "asymmetry", (0, 1)),
        ([[0, 1, 3], [1, 0, 1], [3, 1, 0]], "triangle", (0, 2, 1)),
        ([[0, 0], [0, 0]], "zero_off_diagonal", (0, 1)),
        ([[1, 1], [1, 0]], "diagonal", (0, 0)),
        ([[0, -1], [-1, 0]], "negative", (0, 1)),
        ([[0, 1, 2]], "shape", ()),
    ],
)
def test_build_rejects(matrix, kind, where):
    with pytest.raises(MetricViolation) as e:
        build_finite_space(matrix)
    assert e.value.kind == kind
    assert e.value.where == where


def test_repair_examples():
    assert metric_repair([[0, 1, 3], [1, 0, 1], [3, 1, 0]]).dist(0, 2) == 2.0
    assert metric_repair([[0, 5, 1], [5, 0, 1], [1, 1, 0]]).dist(0, 1) == 2.0


def test_repair_collision():
    with pytest.raises(ZeroDistanceCollision):
        metric_repair([[0, 0, 1], [0, 0, 1], [1, 1, 0]])


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 9))
def test_random_spaces_are_metrics_and_repair_is_idempotent(seed, n):
    X = random_finite_space(np.random.default_rng(seed), n)
    validate_metric(X.distances)
    Y = metric_repair(X.distances)
    assert np.array_equal(X.distances, Y.distances)


def test_grid_nodes_and_metric():
    G = Grid1D(0.0, 1.0, 11)
    assert G.nodes[-1] == 1.0 and G.step == pytest.approx(0.1)
    assert G.dist(0, 10) == 1.0
    assert G.index_of(0.3) == 3
    with pytest.raises(ValueError):
        G.nodes[0] = 5.0


def test_extended_function_properness():
    X = chain(2)
    with pytest.raises(ImproperFunction):
        ExtendedFunction(X, [INF, INF])
    with pytest.raises(ImproperFunction):
        ExtendedFunction(X, [0.0, np.nan])
    with pytest.raises(ImproperFunction):
        ExtendedFunction(X, [0.0, -INF])
    f = ExtendedFunction(X, [0.0, INF])
    assert f.inf() == 0.0 and list(f.domain()) == [0]


def test_sublevel_examples():
    X = chain(3)
    f = ExtendedFunction(X, [0, 1, 2])
    assert list(sublevel_set(f, 1)) == [0, 1]
    assert len(sublevel_set(f, -1)) == 0
    h = ExtendedFunction(chain(2), [0, INF])
    assert list(sublevel_set(h, 10)) == [0]


def test_truncate_examples():
    X = chain(3)
    f = ExtendedFunction(X, [1, 2, 3])
    t = truncate(f, PointSet.of(X, [0, 1]))
    assert t.values.tolist() == [1, 2, INF]
    assert truncate(f, PointSet.of(X, [0, 1, 2])) == f
    Y = chain(2)
    with pytest.raises(EmptyTruncation):
        truncate(ExtendedFunction(Y, [INF, 2]), PointSet.of(Y, [0]))
    with pytest.raises(SpaceMismatch):
        truncate(f, PointSet.of(chain(3), [0]))


values = st.lists(st.one_of(st.integers(-20, 20).map(float), st.just(INF)), min_size=1, max_size=7).filter(
    lambda v: any(x != INF for x in v)
)


@settings(max_examples=80, deadline=None)
@given(values, st.data())
def test_truncation_and_sublevel_properties(vals, data):
    X = chain(len(vals))
    f = ExtendedFunction(X, vals)
    members = data.draw(st.sets(st.integers(0, len(vals) - 1), min_size=1))
    K = PointSet.of(X, members)
    if not (K.mask() & f.domain_mask).any():
        with pytest.raises(EmptyTruncation):
            truncate(f, K)
    else:
        t = truncate(f, K)
        assert truncate(t, K) == t
        assert set(t.domain()) == set(K) & set(f.domain())
    r1, r2 = sorted(data.draw(st.lists(st.integers(-25, 25), min_size=2, max_size=2)))
    assert sublevel_set(f, r1) <= sublevel_set(f, r2)


def test_measure_weights():
    G = Grid1D(0.0, 1.0, 5)
    mu = Measure.lebesgue(G)
    assert mu.total_mass() == pytest.approx(1.0)
    with pytest.raises(ValueError):
        Measure(G, np.zeros(5))
    with pytest.raises(ValueError):
        Measure(G, -np.ones(5))
