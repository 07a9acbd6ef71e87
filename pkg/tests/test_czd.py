"""
Calderon-Zygmund decomposition, refined split, kernel hypotheses and weak type.

Run with: pytest tests/test_czd.py
"""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from czd import (
    cube_bounds,
    cz_decompose,
    random_deltas,
    refine,
    threshold_scale,
    verify_absthm_hypotheses,
    weaktype_scan,
    weaktype_trials,
)
from errors import AlphaTooSmall, InvalidParameter
from signals import Signal

signals = st.dictionaries(
    st.integers(-200, 200),
    st.floats(-50, 50, allow_nan=False).filter(lambda v: abs(v) > 1e-6),
    min_size=1,
    max_size=25,
)


def test_cube_bounds():
    assert cube_bounds((0, 5)) == (5, 6)
    assert cube_bounds((3, -1)) == (-8, 0)


def test_delta_at_quarter():
    dec = cz_decompose(Signal.delta(0), 0.25)
    assert dec.cubes == [(1, 0)]
    assert dec.root == (2, 0)
    assert dec.g.offset == 0
    assert dec.g.values.tolist() == [0.5, 0.5]
    assert dec.b.values.tolist() == [0.5, -0.5]
    assert dec.total_measure() == 2


def test_small_signal_selects_nothing():
    f = Signal(0, np.full(8, 0.1))
    dec = cz_decompose(f, 1.0)
    assert dec.cubes == []
    assert dec.b.norm_inf() == 0.0
    np.testing.assert_array_equal(dec.g.to_dense(0, 7), f.values)


def test_zero_signal():
    dec = cz_decompose(Signal(0, np.zeros(5)), 1.0)
    assert dec.cubes == []
    assert dec.total_measure() == 0


@pytest.mark.parametrize("alpha", [0.0, -1.0])
def test_alpha_must_be_positive(alpha):
    with pytest.raises(InvalidParameter):
        cz_decompose(Signal.delta(0), alpha)


def test_alpha_too_small():
    with pytest.raises(AlphaTooSmall):
        cz_decompose(Signal.delta(0, mass=1e30), 1e-3)


@settings(max_examples=60, deadline=None)
@given(points=signals, alpha=st.floats(0.05, 20.0))
def test_decomposition_invariants(points, alpha):
    f = Signal.from_points(points)
    dec = cz_decompose(f, alpha)   # raises IdentityViolation on any broken invariant
    recon = dec.g.add(dec.b).sub(f)
    assert recon.norm_inf() <= 1e-9
    assert dec.g.norm_inf() <= 2 * alpha * (1 + 1e-9)
    assert dec.total_measure() <= f.norm1() / alpha + 1e-9
    for c, part in dec.b_parts.items():
        assert abs(part.total()) <= 1e-9 * max(part.norm1(), 1.0), f"cube {c}"


@pytest.mark.parametrize("D_n,expected", [(1, 0), (2, 1), (3, 2), (4, 2), (5, 3), (1024, 10)])
def test_threshold_scale(D_n, expected):
    assert threshold_scale(D_n) == expected


@settings(max_examples=40, deadline=None)
@given(points=signals, alpha=st.floats(0.05, 5.0), d_n=st.floats(1.0, 8.0), D_n=st.floats(1.0, 64.0))
def test_refined_split_reconstructs(points, alpha, d_n, D_n):
    f = Signal.from_points(points)
    dec = cz_decompose(f, alpha)
    split = refine(dec, 3, d_n, D_n)
    total = split.good.add(split.large).add(split.short).add(split.long).sub(dec.f)
    assert total.norm_inf() <= 1e-9
    assert set(split.pieces) == set(dec.scales)
    for s, parts in split.pieces.items():
        np.testing.assert_allclose(parts["bn"].values + parts["h"].values, parts["b"].values)


def test_refine_rejects_small_parameters():
    dec = cz_decompose(Signal.delta(0), 0.25)
    with pytest.raises(InvalidParameter):
        refine(dec, 1, 0.5, 4.0)


def test_b_scale_sums_parts():
    f = Signal.from_points({0: 4.0, 9: 1.0, 10: -3.0, 33: 2.0})
    dec = cz_decompose(f, 0.4)
    total = Signal(dec.b.offset, np.zeros(dec.b.size))
    for s in dec.scales:
        total = total.add(dec.b_scale(s))
    np.testing.assert_allclose(total.to_dense(dec.b.offset, dec.b.end - 1), dec.b.values)


def test_kernel_hypotheses(pow102_set):
    harness = verify_absthm_hypotheses(pow102_set, range(6, 12))
    assert harness.symmetric
    assert harness.support_ok
    assert harness.D == [1 << (n + 2) for n in range(6, 12)]
    assert all(d >= 1 for d in harness.d)
    assert harness.lacunarity > 1.0
    assert harness.summary()["A"] == harness.A


def test_kernel_hypotheses_need_scales(pow102_set):
    with pytest.raises(InvalidParameter):
        verify_absthm_hypotheses(pow102_set, [])


def test_weaktype_invariant_under_shift_and_dyadic_scaling(pow102_set):
    f = random_deltas(np.random.default_rng(5), atoms=30, spread=1024)
    base = weaktype_scan(pow102_set, f)["exact_stat"]
    assert base > 0
    assert weaktype_scan(pow102_set, f.scale(4.0))["exact_stat"] == base
    assert weaktype_scan(pow102_set, f.shift(777))["exact_stat"] == base


def test_weaktype_levels(pow102_set):
    f = Signal.delta(0)
    res = weaktype_scan(pow102_set, f, lambdas=[1e-9, 0.5, 10.0])
    sizes = [lv["size"] for lv in res["levels"]]
    assert sizes == sorted(sizes, reverse=True)
    assert sizes[-1] == 0
    assert res["grid_stat"] <= res["exact_stat"] + 1e-12


def test_weaktype_rejects_bad_input(pow102_set):
    with pytest.raises(InvalidParameter):
        weaktype_scan(pow102_set, Signal(0, np.zeros(3)))
    with pytest.raises(InvalidParameter):
        weaktype_scan(pow102_set, Signal.delta(0), lambdas=[0.0, 1.0])


def test_weaktype_trials_are_seeded(pow102_set):
    a = weaktype_trials(pow102_set, 2, seed=9, atoms=10, spread=256)
    b = weaktype_trials(pow102_set, 2, seed=9, atoms=10, spread=256)
    assert a == b
    assert [t["norm1"] for t in a] == [10.0, 10.0]
