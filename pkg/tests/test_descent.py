from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from slopelab import descent as de
from slopelab.continuum import block_point_cloud, block_sequence, block_slope, example_block_function
from slopelab.errors import BudgetExceeded, CriticalMember, CriticalPoint, InfiniteModulus, PreconditionError
from slopelab.metric import INF, ExtendedFunction, Grid1D, Measure, build_finite_space, random_finite_space
from slopelab.moduli import Modulus, ModulusProfile


def chain(n):
    i = np.arange(n, dtype=float)
    return build_finite_space(np.abs(i[:, None] - i[None, :]))


def test_delta_mix_examples():
    X = build_finite_space([[0, 1], [1, 0]])
    P = lambda v: ModulusProfile(X, v, "global")
    assert de.delta_mix(P([0.5, 0]), P([2.0, 0]), 0) == 1.25
    assert de.delta_mix(P([3.0, 0]), P([3.0, 0]), 0) == 3.0
    with pytest.raises(InfiniteModulus):
        de.delta_mix(P([INF, 0]), P([1.0, 0]), 0)
    # block function at 1.5 with f = 0
    assert de.delta_mix(P([0.0, 0]), P([block_slope(1.5), 0]), 0) == 0.25


def test_descent_step_examples():
    X = chain(3)
    g, f = ExtendedFunction(X, [2, 1, 0]), ExtendedFunction(X, [0, 0, 0])
    assert de.descent_step(f, g, Modulus.global_(), 0, 0.1) == 2
    with pytest.raises(CriticalPoint):
        de.descent_step(f, g, Modulus.global_(), 2, 0.1)
    Y = build_finite_space([[0, 1], [1, 0]])
    assert de.descent_step(ExtendedFunction(Y, [0, 0]), ExtendedFunction(Y, [1, 0]), Modulus.global_(), 0, 0.1) == 1


def test_descent_run_examples():
    X = chain(3)
    g, f = ExtendedFunction(X, [2, 1, 0]), ExtendedFunction(X, [0, 0, 0])
    tr = de.descent_run(f, g, Modulus.global_(), 0, 0.1)
    assert tr.points == [0, 2] and tr.status == "reached_critical"
    assert tr.entries[-1].running_sum == 2.0 <= 2 * (g(0) - g.inf())
    assert all(tr.invariants.values())
    tr = de.descent_run(f, g, Modulus.global_(), 2, 0.1)
    assert tr.entries == [] and tr.status == "reached_critical"


def test_descent_run_reports_broken_hypothesis():
    X = chain(3)
    g = ExtendedFunction(X, [2, 1, 0])
    tr = de.descent_run(g.scale(2.0), g, Modulus.global_(), 0, 0.1)
    assert tr.status == "monotonicity_broken" and "PreconditionError" in tr.detail


def test_descent_run_budget():
    X = chain(6)
    # far points descend too little per unit distance, so the first jump lands on 2
    g, f = ExtendedFunction(X, [10, 9, 8.9, 8.8, 8.7, 8.6]), ExtendedFunction(X, np.zeros(6))
    tr = de.descent_run(f, g, Modulus.global_(), 0, 0.1, budget=1)
    assert tr.status == "budget_exhausted" and tr.points == [0, 2]
    tr = de.descent_run(f, g, Modulus.global_(), 0, 0.1)
    assert tr.status == "reached_critical" and tr.final == 5


@settings(max_examples=120, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(["global", "local", "average", "diffusion"]),
       st.sampled_from([0.05, 0.5, 2.0]))
def test_trace_invariants_on_random_instances(seed, kind, rho):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 9))
    X = random_finite_space(rng, n)
    g = ExtendedFunction(X, rng.integers(-256, 257, n) / 64)
    f = ExtendedFunction(X, np.minimum(g.values, 0) - 1.0) if rng.random() < 0.3 else ExtendedFunction(X, np.zeros(n))
    mu = Measure.uniform(X)
    T = {"global": Modulus.global_(), "local": Modulus.local([1.0, 0.5]), "average": Modulus.average(mu),
         "diffusion": Modulus.diffusion(mu, [1.0, 0.5])}[kind]
    tr = de.descent_run(f, g, T, int(rng.integers(n)), rho)
    assert all(tr.invariants.values())
    assert de.check_trace(tr, f, g) == tr.invariants
    assert len(tr.entries) <= n
    if kind == "global" and not f.values.any():
        assert tr.status == "reached_critical" and g(tr.final) == g.inf()


def test_monotone_subsequence_examples():
    assert de.monotone_subsequence([3, 5, 2, 4, 1]) == [0, 2, 4]
    assert de.monotone_subsequence([1, 2, 3]) == [0]
    vals = [block_slope(z) for z in block_sequence(12)]
    ks = de.monotone_subsequence(vals)
    assert all(vals[a] > vals[b] for a, b in zip(ks, ks[1:]))


@given(st.lists(st.floats(0.001, 100), min_size=1, max_size=40))
def test_monotone_subsequence_properties(vals):
    ks = de.monotone_subsequence(vals)
    assert ks[0] == 0 and ks == sorted(ks)
    assert all(vals[a] > vals[b] for a, b in zip(ks, ks[1:]))
    # nothing later undercuts the last extracted value
    assert all(v >= vals[ks[-1]] for v in vals[ks[-1]:])


def test_subsequence_sums_bounded_by_full_sums():
    seq = block_sequence(20)
    s = [block_slope(z) for z in seq]
    d = [abs(a - b) for a, b in zip(seq, seq[1:])]
    full = sum(si * di for si, di in zip(s, d))
    ks = de.monotone_subsequence(s)
    sub = sum(s[a] * abs(seq[b] - seq[a]) for a, b in zip(ks, ks[1:]))
    assert sub <= full


def test_sequence_report_examples():
    rep = de.asymptotic_criticality_report(block_sequence(30), slope=block_slope)
    assert rep.summability_ok and rep.divergence_ok and rep.liminf_zero
    assert rep.recompute_flags() == (True, True, True)
    rep = de.asymptotic_criticality_report([Fraction(n) for n in range(1, 31)], slope=block_slope)
    assert not rep.summability_ok and rep.slopes[0] == 1.0
    rep = de.asymptotic_criticality_report([Fraction(3, 2)] * 10, slope=block_slope)
    assert not rep.divergence_ok


def test_sequence_report_critical_member():
    X = chain(3)
    g = ExtendedFunction(X, [2, 1, 0])
    with pytest.raises(CriticalMember) as e:
        de.asymptotic_criticality_report([0, 1, 2], g, Modulus.global_())
    assert e.value.index == 2


def test_cauchy_examples():
    seq = [1 - 2.0**-n for n in range(1, 61)]
    v = de.cauchy_check(seq, None, None, 0.5, slope=lambda z: 1.0)
    assert v.holds
    v = de.cauchy_check([0.25] * 10, None, None, 0.5, slope=lambda z: 1.0)
    assert v.holds
    with pytest.raises(PreconditionError):
        de.cauchy_check([0.0, 1.0] * 10, None, None, 0.5, slope=lambda z: 1.0)
    with pytest.raises(PreconditionError):
        de.cauchy_check(seq, None, None, 2.0, slope=lambda z: 1.0)


def test_infimizing_examples():
    f, idx = block_point_cloud(30)
    v = de.infimizing_check(idx, f, inf_f=0.0)
    assert v.holds and v.detail["gap"] < 0.05 and v.detail["bound_ok"]
    X = chain(4)
    c = ExtendedFunction(X, [2, 2, 2, 2])
    assert de.infimizing_check([0, 1, 2, 3], c).detail["gap"] == 0.0


def test_infimizing_gap_nonincreasing_in_prefix():
    f, idx = block_point_cloud(30)
    gaps = [de.infimizing_check(idx[:m], f, inf_f=0.0).detail["gap"] for m in range(2, 31)]
    assert all(b <= a for a, b in zip(gaps, gaps[1:]))


def test_oracle_examples():
    rep = de.determination_oracle(build_finite_space([[0, 1], [1, 0]]), [0, 1])
    assert rep.verdict == "holds" and rep.n_functions == 4 and rep.n_classes == 4
    rep = de.determination_oracle(chain(3), [0, 1, 2])
    assert rep.n_classes == 27
    with pytest.raises(BudgetExceeded):
        de.determination_oracle(chain(7), [0, 1])
    with pytest.raises(BudgetExceeded):
        de.determination_oracle(chain(3), [0, 1, 2], budget=26)


def test_oracle_constant_functions_split_by_minimum():
    prof = de._profiles(np.array([[1.0, 1.0, 1.0], [2.0, 2.0, 2.0]]), chain(3).distances)
    assert np.array_equal(prof[0], prof[1])


def test_oracle_thread_count_does_not_change_result():
    X = random_finite_space(np.random.default_rng(5), 5)
    a = de.determination_oracle(X, [0, 1, 2, 3], chunk=50, threads=1)
    b = de.determination_oracle(X, [0, 1, 2, 3], chunk=50, threads=4)
    assert a == b


@pytest.mark.parametrize("seed", range(10))
def test_oracle_full_sweep_small(seed):
    rng = np.random.default_rng(seed)
    for n in (2, 3, 4):
        X = random_finite_space(rng, n)
        for k in (2, 3, 4):
            assert de.determination_oracle(X, list(range(k))).verdict == "holds"


def test_comparison_examples():
    X = chain(3)
    g = ExtendedFunction(X, [2, 1, 0])
    v = de.comparison_check(g.shift(-1.0), g, Modulus.global_())
    assert not v.detail["hypothesis_i"] and v.detail["hypothesis_ii"] and v.detail["conclusion_observed"]
    assert not v.detail["conclusion_asserted"]
    v = de.comparison_check(ExtendedFunction(X, [0, 0, 0]), g, Modulus.global_())
    assert v.holds and v.detail["conclusion_asserted"] and v.detail["descent_certificates"]
    v = de.comparison_check(ExtendedFunction(X, [0, 0, 1]), g, Modulus.global_())
    assert not v.detail["hypothesis_ii"] and v.detail["hypothesis_ii_violations"] == [2]
    assert not v.detail["conclusion_asserted"]


def test_critical_existence_examples():
    X = chain(4)
    f = ExtendedFunction(X, [3, 1, 1, 2])
    v = de.critical_existence(f, Modulus.global_())
    assert v.verdict == "found_critical" and v.detail["points"] == [1, 2]

    G = Grid1D(0.0, 1.0, 101)
    lin = ExtendedFunction.from_callable(G, lambda x: x)
    h = G.step
    v = de.critical_existence(lin, Modulus.local([3 * h, 2 * h, h]))
    assert v.verdict == "found_critical" and v.detail["points"] == [0]

    b = example_block_function(30, 59)
    v = de.critical_existence(b.g, None, 29, tol=0.0, profile=b.slope)
    assert v.verdict == "found_asymptotic"
