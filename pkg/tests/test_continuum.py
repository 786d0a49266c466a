import math
from fractions import Fraction

import numpy as np
import pytest

from slopelab import continuum as cl
from slopelab.errors import DegenerateCurve, HypothesisFailure, PreconditionError


def test_quadratic_flow_matches_exponential():
    c = cl.gradient_flow(cl.quadratic(), (1.0, 0.5), 1e-3, 5.0)
    assert c.status == "ok"
    expect = np.exp(-c.t)[:, None] * np.array([1.0, 0.5])
    assert np.max(np.abs(c.points - expect)) < 1e-10
    assert np.all(np.diff(c.g_values) <= 0)


def test_stationary_curve_is_degenerate():
    c = cl.gradient_flow(cl.quadratic(), (0.0, 0.0), 1e-2, 1.0)
    assert c.length == 0.0 and np.all(c.g_values == 0)
    with pytest.raises(DegenerateCurve):
        cl.arc_length_reparam(c, 1e-3)


def test_flow_rejects_bad_input():
    with pytest.raises(PreconditionError):
        cl.gradient_flow(cl.quadratic(), (1.0, 0.0), 0.0, 1.0)
    with pytest.raises(PreconditionError):
        cl.gradient_flow(cl.xsq_over_y(), (1.0, -1.0), 1e-3, 1.0)


def test_xsq_flow_decreases_g():
    c = cl.gradient_flow(cl.xsq_over_y(), (1.0, 1.0), 1e-3, 3.0)
    assert np.all(np.diff(c.g_values) <= 1e-13)
    assert c.g_values[-1] < c.g_values[0]


def test_reparam_unit_speed_and_integral():
    c = cl.gradient_flow(cl.quadratic(), (1.0, 1.0), 1e-3, 12.0)
    r = cl.arc_length_reparam(c, 1e-3)
    assert np.max(np.abs(r.speeds - 1.0)) < 1e-3
    assert r.slope_integral[-1] == pytest.approx(c.slope_integral[-1], abs=2e-3)
    rep = cl.integrability_report(r)
    assert rep["converging"] and rep["slope_to_zero"] and rep["bound_ok"]
    assert rep["omega_limit"] == "has_omega_limit"
    with pytest.raises(PreconditionError):
        cl.integrability_report(c)


def test_comparison_along_flow():
    g = cl.quadratic()
    rep = cl.comparison_along_flow(g.scaled(0.5), g, (1.0, 1.0), 1e-3, 5.0)
    assert rep["slack"] > 0 and rep["integral_ok"] and rep["chain_ok"]
    rep = cl.comparison_along_flow(g, g, (1.0, 1.0), 1e-3, 5.0)
    assert abs(rep["slack"]) <= 1e-5 and rep["chain_ok"]
    with pytest.raises(HypothesisFailure):
        cl.comparison_along_flow(g.scaled(2.0), g, (1.0, 1.0), 1e-3, 1.0)


def test_check_gradient():
    pts = [(0.3, 1.0), (-2.0, 0.5), (1.0, 4.0)]
    assert cl.xsq_over_y().check_gradient(pts) < 1e-6
    bad = cl.SmoothFunction2D(lambda x, y: x * x / y, lambda x, y: (2 * x / y, (x * x) / (y * y)))
    with pytest.raises(PreconditionError):
        bad.check_gradient(pts)


def test_xsq_level_curve_example():
    r = cl.example_xsq_over_y(1.0, 100.0)
    assert r["level_max_dev"] < 1e-12
    assert r["grad_at_probe"] == pytest.approx([0.2, -0.01], abs=1e-12)
    assert r["integral_T"] == pytest.approx(r["integral_T_closed"], rel=1e-6)
    assert r["ratio"] == pytest.approx(2.0154, abs=1e-3)
    assert not r["asymptotically_critical"]
    assert cl.example_xsq_over_y(4.0, 100.0)["ratio"] == pytest.approx(2.0006, abs=1e-3)
    with pytest.raises(PreconditionError):
        cl.example_xsq_over_y(1.0, 0.5)


def test_block_values():
    assert cl.block_value(1.5) == pytest.approx(0.625, abs=1e-15)
    assert cl.block_slope(1.5) == 0.5
    assert cl.block_slope(2 - 1e-3) == pytest.approx(1e-3, abs=1e-9)
    assert cl.block_value(Fraction(3, 2)) == Fraction(5, 8)
    assert cl.block_sequence(3) == [Fraction(1), Fraction(5, 2), Fraction(11, 3)]
    with pytest.raises(PreconditionError):
        cl.block_value(0.5)


def test_block_example_checks():
    b = cl.example_block_function(6.0, 5001)
    assert b.checks["g_rel_error"] < 1e-12
    assert b.checks["zero_set_empty"]
    assert b.checks["grid_min"] > 0
    assert b.checks["left_limits"][2][-1] == pytest.approx(1e-4)
    fd, mask = cl.fd_slope(b.g)
    h = b.grid.step
    err = np.abs(fd[mask] - np.asarray(b.slope.values)[mask])
    assert np.max(err) <= 2 * h


def test_block_point_cloud():
    f, idx = cl.block_point_cloud(10)
    z = [float(v) for v in cl.block_sequence(10)]
    assert [f(i) for i in idx] == pytest.approx([cl.block_value(v) for v in z])
    assert math.isclose(f.inf(), cl.block_value(11.0))
