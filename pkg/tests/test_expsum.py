"""
Exponential sums, frequency grids, decay fits and the sawtooth split.

Run with: pytest tests/test_expsum.py
"""
from fractions import Fraction

import numpy as np
import pytest

from errors import InsufficientGrid, InvalidParameter, OutOfHorizon
from expsum import (
    exp_sum_over_B,
    exp_sum_reference,
    farey,
    fit_loglog,
    sawtooth,
    sawtooth_split,
    trest_admissible,
    trest_scan,
    van_der_corput,
    xi_grid,
)
from thinset import count


def direct_sum(n, xi):
    return complex(np.sum(np.exp(2j * np.pi * n * float(xi))))


@pytest.mark.parametrize("xi", [Fraction(3, 7), Fraction(1, 2), 0.3, 0.61803398875])
def test_reference_closed_form(xi):
    N = 1000
    got = exp_sum_reference(N, xi)
    want = direct_sum(np.arange(1, N + 1), xi)
    assert abs(got - want) < 1e-8, f"xi={xi}: {got} vs {want}"


def test_reference_at_zero_is_N():
    assert exp_sum_reference(500, Fraction(0)) == complex(500, 0)
    assert exp_sum_reference(500, 0.0) == complex(500, 0)


def test_psi_weight_needs_psi():
    with pytest.raises(InvalidParameter):
        exp_sum_reference(10, 0.25, weight="psi")


def test_frequency_must_be_reduced():
    with pytest.raises(InvalidParameter):
        exp_sum_reference(10, 1.25)


def test_sum_over_B_at_zero_counts(pow125_set):
    ts = pow125_set
    assert exp_sum_over_B(ts, 4096, Fraction(0)) == complex(count(ts, 4096), 0)


def test_sum_over_B_direct(pow125_set):
    ts = pow125_set
    xi = Fraction(2, 5)
    want = direct_sum(ts.elements_upto(3000), xi)
    assert abs(exp_sum_over_B(ts, 3000, xi) - want) < 1e-8


def test_sum_over_B_beyond_horizon(pow125_set):
    with pytest.raises(OutOfHorizon):
        exp_sum_over_B(pow125_set, pow125_set.N + 1, 0.5)


def test_farey_small_order():
    assert farey(4) == [Fraction(1, 4), Fraction(1, 3), Fraction(1, 2), Fraction(2, 3), Fraction(3, 4)]


def test_van_der_corput_prefix():
    assert van_der_corput(4) == [Fraction(1, 2), Fraction(1, 4), Fraction(3, 4), Fraction(1, 8)]


def test_xi_grid_in_unit_interval():
    grid = xi_grid(farey_order=6, multiples=2, vdc_points=8)
    assert grid[0] == 0
    assert all(0 <= float(x) < 1 for x in grid)
    assert len({float(x) for x in grid}) == len(grid)


def test_fit_recovers_power_law():
    x = np.geomspace(1e3, 1e6, 8)
    fit = fit_loglog(x, 3.0 * x ** -0.5)
    assert fit["slope"] == pytest.approx(-0.5, abs=1e-9)
    assert fit["points"] == 8


def test_fit_needs_six_points():
    x = np.geomspace(1e3, 1e6, 5)
    with pytest.raises(InsufficientGrid):
        fit_loglog(x, x ** -0.5)


def test_fit_ignores_nonpositive_samples():
    x = np.geomspace(1e3, 1e6, 8)
    y = x ** -0.25
    y[:3] = 0.0
    with pytest.raises(InsufficientGrid):
        fit_loglog(x, y)


def test_admissibility_inequality():
    assert trest_admissible(1.0, 1.0, 0.0)
    assert not trest_admissible(0.5, 0.5, 0.0)
    assert not trest_admissible(1.0, 1.0, 1.0 / 6.0)


def test_scan_zero_frequency_is_counting_error(pow125_set):
    ts = pow125_set
    grid = [1024, 2048, 4096, 8192, 16384]
    rep = trest_scan(ts, grid, [Fraction(0)])
    for i, N in enumerate(grid):
        expected = abs(count(ts, N) - ts.Psi(N)) / ts.phi2(float(N))
        assert rep.sup_error[i] == pytest.approx(expected, rel=1e-12)


def test_scan_matches_single_sums(pow125_set):
    ts = pow125_set
    xis = [Fraction(1, 3), 0.1]
    rep = trest_scan(ts, [2000, 9000], xis)
    for i, N in enumerate(rep.N_grid):
        for j, xi in enumerate(xis):
            assert abs(rep.lhs[i, j] - exp_sum_over_B(ts, int(N), xi)) < 1e-8


def test_scan_fits_slope_with_enough_points(pow125_set):
    grid = np.unique(np.geomspace(256, pow125_set.N, 8).astype(int))
    rep = trest_scan(pow125_set, grid, xi_grid(farey_order=5, multiples=1, vdc_points=4))
    assert rep.slope is not None
    assert rep.admissible in (True, False)
    assert np.all(rep.sup_error >= rep.median_error)
    assert rep.summary()["xi_count"] == len(rep.xi_grid)


def test_scan_short_grid_warns(pow125_set):
    rep = trest_scan(pow125_set, [1000, 2000, 4000], [Fraction(1, 2)])
    assert rep.slope is None
    assert rep.warnings


def test_scan_rejects_grid_beyond_horizon(pow125_set):
    with pytest.raises(OutOfHorizon):
        trest_scan(pow125_set, [10, pow125_set.N + 1], [0.5])


def test_sawtooth_values():
    assert sawtooth(np.array([0.0, 0.25, 1.75])).tolist() == [-0.5, -0.25, 0.25]


def test_sawtooth_split_reconstructs_indicator(pow125_set):
    split = sawtooth_split(pow125_set, (1, 2000), M=32)
    assert split.max_residual < 1e-9
    assert split.max_imag < 1e-9
    assert split.n.size == 2000


def test_sawtooth_split_rejects_bad_M(pow125_set):
    with pytest.raises(InvalidParameter):
        sawtooth_split(pow125_set, (1, 100), M=0)
