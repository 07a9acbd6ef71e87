"""
Thin-set enumeration: membership, counting, blocks and runs.

Run with: pytest tests/test_thinset.py
"""
import math

import numpy as np
import pytest

from conftest import spec_of
from errors import ConfigError, InvalidParameter, OutOfHorizon
from thinset import (
    CHUNK,
    ThinSetSpec,
    count,
    enumerate_set,
    membership,
    run_stats,
)


def floor_powers(limit):
    """{floor(m^1.5) : m >= 1} intersected with [1, limit], exactly."""
    out, m = set(), 1
    while math.isqrt(m ** 3) <= limit:
        out.add(math.isqrt(m ** 3))
        m += 1
    return out


def test_nh_first_elements(nh_set):
    assert nh_set.elements_upto(20).tolist() == [1, 2, 5, 8, 11, 14, 18]


def test_nh_matches_floor_powers(nh_set):
    expected = floor_powers(nh_set.N)
    got = set(nh_set.elements.tolist())
    missing = sorted(expected - got)[:5]
    extra = sorted(got - expected)[:5]
    assert got == expected, f"missing {missing}, extra {extra}"


def test_exact_tie_at_seven():
    """phi(8) = 4 exactly, so {-phi(7)} equals psi(7) and 7 is not in B."""
    m = membership(spec_of("nh15"), 7)
    assert m.used_high_precision
    assert not m.in_set


def test_integer_phi_is_member():
    m = membership(spec_of("nh15"), 8)
    assert m.in_set
    assert m.label == 4


def test_unit_point_of_irrational_power():
    m = membership(spec_of("pow105"), 1)
    assert m.in_set
    assert m.label == 1


def test_membership_rejects_non_positive():
    with pytest.raises(InvalidParameter):
        membership(spec_of("pow105"), 0)


def test_identity_agrees(pow105_set, nh_set):
    assert pow105_set.identity_disagreements == 0
    assert nh_set.identity_disagreements == 0


def test_bitmap_and_elements_consistent(pow105_set):
    ts = pow105_set
    assert ts.bitmap.sum() == ts.elements.size
    for n in ts.elements[:50]:
        assert ts.contains(int(n))
    assert np.all(np.diff(ts.elements) > 0)


def test_count_edges(pow105_set):
    ts = pow105_set
    assert count(ts, 0) == 0
    assert count(ts, ts.N) == ts.elements.size
    with pytest.raises(OutOfHorizon):
        count(ts, -1)
    with pytest.raises(OutOfHorizon):
        count(ts, ts.N + 1)


def test_count_is_nondecreasing(pow125_set):
    ts = pow125_set
    values = [count(ts, t) for t in range(0, ts.N + 1, 97)]
    assert values == sorted(values)


def test_contains_outside_horizon(pow125_set):
    with pytest.raises(OutOfHorizon):
        pow125_set.contains(pow125_set.N + 1)


def test_horizon_must_be_positive():
    with pytest.raises(InvalidParameter):
        enumerate_set(spec_of("pow105"), 0)


def test_thread_count_does_not_change_result():
    spec = spec_of("pow110")
    N = 3 * CHUNK + 17
    one = enumerate_set(spec, N, threads=1)
    many = enumerate_set(spec, N, threads=4)
    assert np.array_equal(one.bitmap, many.bitmap)
    assert np.array_equal(one.labels, many.labels)
    assert one.hp_points == many.hp_points


def test_prefix_enumeration_is_stable(pow125_set):
    short = enumerate_set(pow125_set.spec, 5000)
    assert np.array_equal(short.bitmap, pow125_set.bitmap[:5000])


def test_blocks_are_contiguous(pow105_set, nh_set):
    assert pow105_set.blocks_contiguous
    assert nh_set.blocks_contiguous
    labels = [m for m, _, _ in pow105_set.blocks]
    assert labels == sorted(set(labels))


def test_psi_prefix_matches_fsum(pow125_set):
    ts = pow125_set
    for t in (0, 1, 100, ts.N):
        assert ts.psi_prefix[t] == pytest.approx(ts.Psi(t), rel=1e-10, abs=1e-12)


def test_run_stats_nh(nh_set):
    stats = run_stats(nh_set)
    assert stats["max_run"] == 2
    assert stats["size"] == nh_set.elements.size
    assert sum(k * v for k, v in stats["run_histogram"].items()) == stats["size"]


def test_bad_sign_rejected():
    spec = spec_of("pow105")
    with pytest.raises(ConfigError):
        ThinSetSpec(phi1=spec.phi1, phi2=spec.phi2, psi=spec.psi, sign="zero")


def test_from_config_requires_h1():
    with pytest.raises(ConfigError) as exc:
        ThinSetSpec.from_config({"sign": "plus"})
    assert "h1" in str(exc.value)


@pytest.mark.slow
def test_desk_scale_enumeration():
    ts = enumerate_set(spec_of("pow105"), 10 ** 6, threads=4)
    assert ts.identity_disagreements == 0
    assert ts.blocks_contiguous
    assert count(ts, ts.N) == ts.elements.size
