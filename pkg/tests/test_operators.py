"""
Averaging operators, maximal functions, lambda weights and oscillation.

Run with: pytest tests/test_operators.py
"""
import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from errors import (
    BadCutPoints,
    EmptyInput,
    EmptyPlan,
    InvalidParameter,
    NonMonotonePsi,
    OutOfHorizon,
)
from operators import (
    P_GRID,
    ScalePlan,
    apply_D,
    apply_H,
    apply_M,
    dk_via_hk,
    integrate_H_over_Nk,
    lambda_weights,
    maximal,
    nk_monotone_in_k,
    oscillation,
    rearrangement_Nk,
    sandwich_ratio,
    variation2,
    vector_maximal,
)
from signals import Signal, max_deviation
from thinset import count


def random_signal(seed, atoms=20, spread=300):
    rng = np.random.default_rng(seed)
    xs = rng.choice(spread, size=atoms, replace=False)
    return Signal.from_points({int(x): float(rng.normal()) for x in xs})


def brute_variation2(seq):
    best = 0.0
    for r in range(2, len(seq) + 1):
        for idx in itertools.combinations(range(len(seq)), r):
            best = max(best, sum((seq[b] - seq[a]) ** 2 for a, b in zip(idx, idx[1:])))
    return math.sqrt(best)


# ---------------------------------------------------------------------------
# single-scale operators
# ---------------------------------------------------------------------------

def test_H_of_delta():
    out = apply_H(Signal.delta(0), 5)
    assert out.offset == 1
    np.testing.assert_allclose(out.values, np.full(5, 0.2))


def test_M_of_delta(pow125_set):
    ts = pow125_set
    out = apply_M(ts, Signal.delta(0), 200)
    assert out.offset == 1
    np.testing.assert_allclose(out.values, ts.bitmap[:200] / count(ts, 200))


def test_D_preserves_mass(pow125_set):
    f = random_signal(1)
    out = apply_D(pow125_set, f, 500)
    assert out.total() == pytest.approx(f.total(), rel=1e-12, abs=1e-12)


def test_scale_checks(pow125_set):
    with pytest.raises(InvalidParameter):
        apply_H(Signal.delta(0), 0)
    with pytest.raises(OutOfHorizon):
        apply_M(pow125_set, Signal.delta(0), pow125_set.N + 1)


# ---------------------------------------------------------------------------
# lambda weights
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("k", [1, 7, 100, 5000])
def test_lambda_weights_partition_unity(pow125_set, k):
    lam = lambda_weights(pow125_set, k)
    assert lam.size == k
    assert np.all(lam >= 0)
    assert math.fsum(lam) == pytest.approx(1.0, abs=1e-12)


def test_lambda_rejects_rising_psi():
    with pytest.raises(NonMonotonePsi):
        lambda_weights(np.array([0.1, 0.2, 0.3, 0.4]), 3)


def test_lambda_rejects_bad_k(pow125_set):
    with pytest.raises(InvalidParameter):
        lambda_weights(pow125_set, 0)


@pytest.mark.parametrize("k", [10, 300, 2000])
def test_D_is_lambda_mixture_of_H(pow125_set, k):
    f = random_signal(k)
    recon = dk_via_hk(pow125_set, f, k)
    assert max_deviation(recon, apply_D(pow125_set, f, k)) < 1e-12


def test_rearrangement_integral_matches_D(pow125_set):
    f = random_signal(3)
    rearr = rearrangement_Nk(pow125_set, 700)
    assert rearr.piece_lengths.sum() == pytest.approx(1.0, abs=1e-12)
    out = integrate_H_over_Nk(f, rearr)
    assert max_deviation(out, apply_D(pow125_set, f, 700)) < 1e-12


def test_Nk_monotone_in_k(pow125_set):
    assert nk_monotone_in_k(pow125_set, [16, 64, 256, 1024, 4096], np.linspace(0.0, 0.99, 60))


# ---------------------------------------------------------------------------
# scale plans and maximal functions
# ---------------------------------------------------------------------------

def test_dyadic_plan():
    assert ScalePlan("dyadic").scales(100).tolist() == [1, 2, 4, 8, 16, 32, 64]


def test_tau_plan_is_increasing():
    sc = ScalePlan("tau_dyadic", tau=0.4).scales(10 ** 4)
    assert sc[0] == 1
    assert np.all(np.diff(sc) > 0)
    assert sc[-1] <= 10 ** 4


@pytest.mark.parametrize("kwargs", [
    {"kind": "tau_dyadic"},
    {"kind": "tau_dyadic", "tau": 0.5},
    {"kind": "tau_dyadic", "tau": 0.3, "p0": 1.5},
    {"kind": "weekly"},
])
def test_bad_plans(kwargs):
    with pytest.raises(InvalidParameter):
        ScalePlan(**kwargs)


def test_empty_plan():
    with pytest.raises(EmptyPlan):
        ScalePlan("dyadic", t_max=0).scales(100)


def test_maximal_H_of_delta(pow125_set):
    out = maximal(pow125_set, Signal.delta(0), ScalePlan("all_t", t_max=100), op="H")
    np.testing.assert_allclose(out.values, 1.0 / np.arange(1, 101))


def test_maximal_of_zero_signal(pow125_set):
    out = maximal(pow125_set, Signal(0, np.zeros(10)), ScalePlan("dyadic", t_max=64))
    assert out.norm_inf() == 0.0


@pytest.mark.parametrize("op", ["M", "A", "D", "H"])
@pytest.mark.parametrize("kind", ["all_t", "dyadic"])
@pytest.mark.parametrize("set_name", ["pow125_set", "powlog105_set"])
def test_maximal_engines_agree(request, set_name, op, kind):
    ts = request.getfixturevalue(set_name)
    f = random_signal(11)
    plan = ScalePlan(kind, t_max=1500)
    hits = maximal(ts, f, plan, op=op, engine="hits")
    dense = maximal(ts, f, plan, op=op, engine="dense")
    assert hits.offset == dense.offset
    np.testing.assert_allclose(hits.values, dense.values, rtol=1e-10, atol=1e-14)


def test_average_maximal_of_delta_when_one_not_in_B(powlog105_set):
    ts = powlog105_set
    b1 = int(ts.elements[0])
    assert b1 > 1
    plan = ScalePlan("all_t", t_max=1500)
    hits = maximal(ts, Signal.delta(0), plan, op="A", engine="hits")
    dense = maximal(ts, Signal.delta(0), plan, op="A", engine="dense")
    # at x = 1 only d = 1 contributes; the sup is psi(1) / |B_t| at t = b1
    want = float(ts.psi_values[0]) / float(ts.prefix[b1])
    assert hits.value_at(np.array([1]))[0] == pytest.approx(want, rel=1e-12)
    np.testing.assert_allclose(hits.values, dense.values, rtol=1e-10, atol=1e-14)


def test_maximal_dominates_single_scale(pow125_set):
    f = random_signal(5)
    sup = maximal(pow125_set, f, ScalePlan("all_t", t_max=800), op="M")
    one = apply_M(pow125_set, f.abs(), 400)
    assert np.all(sup.value_at(one.xs) >= one.values - 1e-12)


def test_unknown_op(pow125_set):
    with pytest.raises(InvalidParameter):
        maximal(pow125_set, Signal.delta(0), op="Q")


def test_sandwich_ratio_reports(pow102_set):
    res = sandwich_ratio(pow102_set, Signal.delta(0))
    assert res["ratio"] > 0
    assert res["uncovered_points"] >= 0


def test_vector_maximal(pow125_set):
    fs = [random_signal(s, atoms=5) for s in (1, 2, 3)]
    norms = vector_maximal(pow125_set, fs, ScalePlan("dyadic", t_max=512))
    assert sorted(norms) == sorted(float(p) for p in P_GRID)
    assert all(v["rhs_norm"] > 0 for v in norms.values())
    with pytest.raises(EmptyInput):
        vector_maximal(pow125_set, [])


# ---------------------------------------------------------------------------
# variation and oscillation
# ---------------------------------------------------------------------------

def test_variation_small_cases():
    assert variation2([]) == {"value": 0.0, "exact": True}
    assert variation2([0.0, 1.0, 0.0])["value"] == pytest.approx(math.sqrt(2.0))
    assert not variation2(np.arange(600.0))["exact"]


@settings(max_examples=80, deadline=None)
@given(st.lists(st.floats(-10, 10, allow_nan=False), min_size=2, max_size=8))
def test_variation_matches_brute_force(seq):
    assert variation2(seq)["value"] == pytest.approx(brute_variation2(seq), rel=1e-9, abs=1e-12)


@pytest.mark.parametrize("cuts", [[3, 2], [0, 5], [], [5, 5]])
def test_bad_cut_points(pow125_set, cuts):
    with pytest.raises(BadCutPoints):
        oscillation(pow125_set, Signal.delta(0), cuts)


def test_cuts_beyond_horizon(pow125_set):
    with pytest.raises(BadCutPoints):
        oscillation(pow125_set, Signal.delta(0), [1, 10], t_end=pow125_set.N + 1)


@pytest.mark.parametrize("op", ["M", "H"])
def test_oscillation_of_constant_vanishes_inside(pow125_set, op):
    f = Signal(0, np.ones(3000))
    rep = oscillation(pow125_set, f, [1, 10, 100], op=op, t_end=400)
    interior = rep.values.value_at(np.arange(400, 3001))
    assert np.max(interior) < 1e-12


def test_variation_dominates_oscillation(pow125_set):
    f = random_signal(7, atoms=10, spread=100)
    rep = oscillation(pow125_set, f, [1, 20, 60], t_end=150, with_variation=True)
    assert rep.variation_exact
    assert np.all(rep.variation.values >= rep.values.values - 1e-12)
    assert np.all(rep.l1_bound.values >= rep.variation.values - 1e-12)
    assert set(rep.summary()["norms"]) == {str(float(p)) for p in P_GRID}
