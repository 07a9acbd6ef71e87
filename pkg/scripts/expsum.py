#!/usr/bin/env python3
"""
Exponential sums over B and over [N], the sawtooth split of 1_B, and
decay-exponent fits.

    S_B(N, xi)   = sum_{n in B, n <= N} w(n) e(n xi)      w = 1 or 1/psi
    S_ref(N, xi) = sum_{n <= N} w(n) e(n xi)              w = 1 or psi

with e(x) = exp(2 pi i x). Rational frequencies are kept as Fractions and
reduced exactly (n p mod q); floats are reduced mod 1 in binary64.

trest_scan measures, on an N grid, the sup over a frequency grid of
|S_B(N, xi) - S_ref_psi(N, xi)| / phi2(N) and fits its log-log slope; the
same scan reports the inverse-psi weighted variant normalised by N.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence, Union

import mpmath
import numpy as np

from errors import InsufficientGrid, InvalidParameter, OutOfHorizon
from regvar import HP_DPS, PsiSpec
from thinset import ThinSet, count

Frequency = Union[Fraction, float]

WEIGHTS_B = ("unit", "inv_psi")
WEIGHTS_REF = ("unit", "psi")
MIN_FIT_POINTS = 6

IRRATIONALS = {
    "sqrt2m1": math.sqrt(2.0) - 1.0,
    "golden": (math.sqrt(5.0) - 1.0) / 2.0,
    "pim3": math.pi - 3.0,
}


# ---------------------------------------------------------------------------
# phases
# ---------------------------------------------------------------------------

def _phase(n: np.ndarray, xi: Frequency) -> np.ndarray:
    """n xi mod 1 for integer n."""
    n = np.asarray(n, dtype=np.int64)
    if isinstance(xi, Fraction):
        p, q = xi.numerator, xi.denominator
        return ((n * p) % q) / q
    return np.mod(n.astype(float) * float(xi), 1.0)


def _e(n: np.ndarray, xi: Frequency) -> np.ndarray:
    return np.exp(2j * np.pi * _phase(n, xi))


def _is_zero(xi: Frequency) -> bool:
    if isinstance(xi, Fraction):
        return xi.denominator == 1
    return float(xi) % 1.0 == 0.0


def _csum(z: np.ndarray) -> complex:
    """Correctly rounded complex sum."""
    return complex(math.fsum(z.real), math.fsum(z.imag))


def _check_xi(xi: Frequency) -> None:
    if not 0 <= xi < 1:
        raise InvalidParameter(f"xi must lie in [0, 1) (got {xi})")


# ---------------------------------------------------------------------------
# single sums
# ---------------------------------------------------------------------------

def exp_sum_over_B(ts: ThinSet, N: int, xi: Frequency, weight: str = "unit") -> complex:
    """sum over n in B cap [1, N] of w(n) e(n xi)."""
    if weight not in WEIGHTS_B:
        raise InvalidParameter(f"weight must be one of {WEIGHTS_B} (got '{weight}')")
    if N > ts.N:
        raise OutOfHorizon(f"N={N} beyond horizon {ts.N}")
    _check_xi(xi)
    el = ts.elements_upto(N)
    terms = _e(el, xi)
    if weight == "inv_psi":
        terms = terms / ts.psi_values[el - 1]
    return _csum(terms)


def exp_sum_reference(N: int, xi: Frequency, weight: str = "unit",
                      psi: Optional[PsiSpec] = None) -> complex:
    """sum over n in [1, N] of w(n) e(n xi); closed geometric form for w = 1."""
    if weight not in WEIGHTS_REF:
        raise InvalidParameter(f"weight must be one of {WEIGHTS_REF} (got '{weight}')")
    _check_xi(xi)
    if weight == "unit":
        if _is_zero(xi):
            return complex(N, 0.0)
        z = complex(np.exp(2j * np.pi * _phase(np.array([1]), xi)[0]))
        zN = complex(np.exp(2j * np.pi * _phase(np.array([N]), xi)[0]))
        return z * (zN - 1.0) / (z - 1.0)
    if psi is None:
        raise InvalidParameter("weight='psi' needs a PsiSpec")
    n = np.arange(1, N + 1)
    return _csum(np.atleast_1d(psi.psi(n.astype(float))) * _e(n, xi))


# ---------------------------------------------------------------------------
# frequency grid
# ---------------------------------------------------------------------------

def farey(order: int) -> List[Fraction]:
    """Fractions p/q in (0, 1) with q <= order, ascending."""
    out = {Fraction(p, q) for q in range(2, order + 1) for p in range(1, q)}
    return sorted(out)


def van_der_corput(count_: int, base: int = 2) -> List[Fraction]:
    """First `count_` nonzero points of the base-b van der Corput sequence."""
    pts = []
    for k in range(1, count_ + 1):
        x, denom = Fraction(0), 1
        while k:
            k, digit = divmod(k, base)
            denom *= base
            x += Fraction(digit, denom)
        pts.append(x)
    return pts


def xi_grid(farey_order: int = 16, multiples: int = 4, vdc_points: int = 64) -> List[Frequency]:
    """{0} u Farey(order) u k*{sqrt2-1, golden, pi-3} mod 1 u van der Corput points."""
    rational = {Fraction(0)} | set(farey(farey_order)) | set(van_der_corput(vdc_points))
    irr = sorted({(k * v) % 1.0 for v in IRRATIONALS.values() for k in range(1, multiples + 1)})
    return sorted(rational, key=float) + irr


# ---------------------------------------------------------------------------
# scans
# ---------------------------------------------------------------------------

def fit_loglog(x: Sequence[float], y: Sequence[float]) -> Dict[str, Any]:
    """Least-squares slope of log y against log x.

    Raises:
        InsufficientGrid: fewer than MIN_FIT_POINTS positive samples
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    keep = (x > 0) & (y > 0) & np.isfinite(y)
    if np.count_nonzero(keep) < MIN_FIT_POINTS:
        raise InsufficientGrid(
            f"log-log fit needs {MIN_FIT_POINTS} positive points (got {int(np.count_nonzero(keep))})"
        )
    lx, ly = np.log(x[keep]), np.log(y[keep])
    (slope, intercept), res, *_ = np.polyfit(lx, ly, 1, full=True)
    return {
        "slope": float(slope),
        "intercept": float(intercept),
        "residual": float(res[0]) if len(res) else 0.0,
        "points": int(keep.sum()),
    }


def trest_admissible(gamma1: float, gamma2: float, chi: float) -> bool:
    """(1 - gamma1) + 3 (1 - gamma2) + 6 chi < 1."""
    return (1.0 - gamma1) + 3.0 * (1.0 - gamma2) + 6.0 * chi < 1.0


@dataclass(frozen=True)
class ExpSumReport:
    N_grid: np.ndarray
    xi_grid: List[Frequency]
    lhs: np.ndarray = field(repr=False)           # [N, xi] sum over B
    rhs: np.ndarray = field(repr=False)           # [N, xi] psi-weighted sum over [N]
    ext_lhs: np.ndarray = field(repr=False)       # [N, xi] 1/psi-weighted sum over B
    ext_rhs: np.ndarray = field(repr=False)       # [N, xi] plain sum over [N]
    sup_error: np.ndarray                         # per N, normalised by phi2(N)
    median_error: np.ndarray
    ext_error: np.ndarray                         # per N, normalised by N
    slope: Optional[float]
    slope_residual: Optional[float]
    ext_slope: Optional[float]
    admissible: Optional[bool]
    normalization: str = "by_phi2"
    warnings: List[str] = field(default_factory=list)

    @property
    def abs_error(self) -> np.ndarray:
        return np.abs(self.lhs - self.rhs)

    def rows(self, phi2: np.ndarray) -> List[Dict[str, Any]]:
        """CSV rows N, xi, abs_error, normalized_error."""
        err = self.abs_error
        out = []
        for i, N in enumerate(self.N_grid):
            for j, xi in enumerate(self.xi_grid):
                out.append({
                    "N": int(N),
                    "xi": float(xi),
                    "abs_error": float(err[i, j]),
                    "normalized_error": float(err[i, j] / phi2[i]),
                })
        return out

    def summary(self) -> Dict[str, Any]:
        return {
            "N_grid": [int(n) for n in self.N_grid],
            "xi_count": len(self.xi_grid),
            "sup_error": [float(v) for v in self.sup_error],
            "median_error": [float(v) for v in self.median_error],
            "ext_error": [float(v) for v in self.ext_error],
            "slope": self.slope,
            "slope_residual": self.slope_residual,
            "ext_slope": self.ext_slope,
            "admissible": self.admissible,
            "normalization": self.normalization,
            "warnings": list(self.warnings),
        }


def _segment_cumsum(values: np.ndarray, edges: np.ndarray) -> np.ndarray:
    """Prefix sums of `values` at the cut indices `edges` (ascending, > 0)."""
    starts = np.concatenate(([0], edges[:-1]))
    seg = np.array([values[a:b].sum() for a, b in zip(starts, edges)])
    return np.cumsum(seg)


def trest_scan(ts: ThinSet, N_grid: Sequence[int], xi_values: Sequence[Frequency]) -> ExpSumReport:
    """Sup over xi of the psi-weighted error on an N grid, plus the inverse-psi variant."""
    N_grid = np.unique(np.asarray(N_grid, dtype=np.int64))
    if N_grid.size == 0 or len(xi_values) == 0:
        raise InvalidParameter("N grid and xi grid must be nonempty")
    if N_grid[0] < 1 or N_grid[-1] > ts.N:
        raise OutOfHorizon(f"N grid [{N_grid[0]}, {N_grid[-1]}] outside [1, {ts.N}]")
    for xi in xi_values:
        _check_xi(xi)

    n_max = int(N_grid[-1])
    n = np.arange(1, n_max + 1, dtype=np.int64)
    ind = ts.bitmap[:n_max].astype(float)
    psi = ts.psi_values[:n_max]
    inv_psi_on_B = np.where(ind > 0, 1.0 / psi, 0.0)
    phi2 = np.atleast_1d(ts.phi2(N_grid.astype(float)))

    shape = (N_grid.size, len(xi_values))
    lhs = np.empty(shape, dtype=complex)
    rhs = np.empty(shape, dtype=complex)
    ext_lhs = np.empty(shape, dtype=complex)
    ext_rhs = np.empty(shape, dtype=complex)

    for j, xi in enumerate(xi_values):
        if _is_zero(xi):
            for i, N in enumerate(N_grid):
                N = int(N)
                lhs[i, j] = count(ts, N)
                rhs[i, j] = ts.Psi(N)
                ext_lhs[i, j] = math.fsum(inv_psi_on_B[:N])
                ext_rhs[i, j] = N
            continue
        e = _e(n, xi)
        lhs[:, j] = _segment_cumsum(ind * e, N_grid)
        rhs[:, j] = _segment_cumsum(psi * e, N_grid)
        ext_lhs[:, j] = _segment_cumsum(inv_psi_on_B * e, N_grid)
        ext_rhs[:, j] = [exp_sum_reference(int(N), xi) for N in N_grid]

    norm_err = np.abs(lhs - rhs) / phi2[:, None]
    ext_err = np.abs(ext_lhs - ext_rhs) / N_grid[:, None]
    sup_error = norm_err.max(axis=1)

    warnings: List[str] = []
    slope = residual = ext_slope = admissible = None
    try:
        fit = fit_loglog(N_grid, sup_error)
        slope, residual = fit["slope"], fit["residual"]
        ext_slope = fit_loglog(N_grid, ext_err.max(axis=1))["slope"]
        gamma1 = 1.0 / ts.spec.phi1.base.c
        gamma2 = 1.0 / ts.spec.phi2.base.c
        admissible = trest_admissible(gamma1, gamma2, max(0.0, -slope))
    except InsufficientGrid as e:
        warnings.append(str(e))

    return ExpSumReport(
        N_grid=N_grid,
        xi_grid=list(xi_values),
        lhs=lhs,
        rhs=rhs,
        ext_lhs=ext_lhs,
        ext_rhs=ext_rhs,
        sup_error=sup_error,
        median_error=np.median(norm_err, axis=1),
        ext_error=ext_err.max(axis=1),
        slope=slope,
        slope_residual=residual,
        ext_slope=ext_slope,
        admissible=admissible,
        warnings=warnings,
    )


def fitted_decay(ts: ThinSet, k_min: int = 4,
                 xi_values: Optional[Sequence[Frequency]] = None) -> float:
    """chi = max(0, -slope) of the trest_scan sup error over N = 2^k <= ts.N.

    Raises:
        InsufficientGrid: the dyadic grid below ts.N is too short to fit
    """
    k_max = int(ts.N).bit_length() - 1
    grid = [1 << k for k in range(k_min, k_max + 1)]
    if len(grid) < MIN_FIT_POINTS:
        raise InsufficientGrid(
            f"decay fit needs {MIN_FIT_POINTS} dyadic N in [2^{k_min}, {ts.N}] (got {len(grid)})"
        )
    rep = trest_scan(ts, grid, xi_grid() if xi_values is None else xi_values)
    if rep.slope is None:
        raise InsufficientGrid("; ".join(rep.warnings))
    return max(0.0, -rep.slope)


# ---------------------------------------------------------------------------
# sawtooth split
# ---------------------------------------------------------------------------

def sawtooth(x: np.ndarray) -> np.ndarray:
    """Phi(x) = {x} - 1/2."""
    return x - np.floor(x) - 0.5


def sawtooth_truncated(x: np.ndarray, M: int) -> np.ndarray:
    """-sum_{0 < |m| <= M} e(m x) / (2 pi i m), returned as a complex array."""
    x = np.asarray(x, dtype=float)
    m = np.concatenate((np.arange(-M, 0), np.arange(1, M + 1))).astype(float)
    frac = x - np.floor(x)
    terms = np.exp(2j * np.pi * np.multiply.outer(frac, m)) / (2j * np.pi * m)
    return -terms.sum(axis=-1)


@dataclass(frozen=True)
class SawtoothSplit:
    M: int
    n: np.ndarray = field(repr=False)
    psi: np.ndarray = field(repr=False)
    delta: np.ndarray = field(repr=False)
    pi: np.ndarray = field(repr=False)
    residual: np.ndarray = field(repr=False)
    max_residual: float = 0.0
    max_imag: float = 0.0
    max_abs_pi: float = 0.0

    @property
    def pi_bounded(self) -> bool:
        return self.max_abs_pi <= 2.0


def _fractional_parts(ts: ThinSet, n: np.ndarray):
    """{s phi1(n)} and {s phi1(n) - psi(n)}, high precision at recorded boundary points."""
    s = ts.spec.s
    phi = np.atleast_1d(ts.spec.phi1.phi(n.astype(float)))
    psi = ts.psi_values[n - 1]
    x0 = s * phi
    x1 = x0 - psi
    f0 = x0 - np.floor(x0)
    f1 = x1 - np.floor(x1)
    lo = int(n[0])
    tiny = mpmath.mpf(10) ** (-(HP_DPS - 10))
    for p in ts.hp_points:
        if not lo <= p <= int(n[-1]):
            continue
        with mpmath.workdps(HP_DPS):
            a = s * ts.spec.phi1.phi_mp(p)
            b = a - ts.spec.psi.psi_mp(p)
            fa = a - mpmath.floor(a)
            fb = b - mpmath.floor(b)
            fa = mpmath.mpf(0) if min(fa, 1 - fa) < tiny else fa
            fb = mpmath.mpf(0) if min(fb, 1 - fb) < tiny else fb
            f0[p - lo] = float(fa)
            f1[p - lo] = float(fb)
    return psi, f0, f1


def sawtooth_split(ts: ThinSet, n_range: Sequence[int], M: int) -> SawtoothSplit:
    """1_B(n) = psi(n) + Delta_M(n) + Pi_M(n) on an inclusive n range."""
    if M < 1:
        raise InvalidParameter(f"M must be >= 1 (got {M})")
    lo, hi = int(n_range[0]), int(n_range[1])
    if lo < 1 or hi > ts.N or lo > hi:
        raise OutOfHorizon(f"n range [{lo}, {hi}] outside [1, {ts.N}]")
    n = np.arange(lo, hi + 1, dtype=np.int64)
    psi, f0, f1 = _fractional_parts(ts, n)

    delta_c = np.empty(n.size, dtype=complex)
    step = max(1, (1 << 20) // (2 * M))
    for a in range(0, n.size, step):
        b = min(a + step, n.size)
        delta_c[a:b] = sawtooth_truncated(f1[a:b], M) - sawtooth_truncated(f0[a:b], M)

    delta = delta_c.real
    pi = (f1 - 0.5) - (f0 - 0.5) - delta
    ind = ts.bitmap[lo - 1:hi].astype(float)
    residual = ind - psi - delta - pi
    return SawtoothSplit(
        M=M,
        n=n,
        psi=psi,
        delta=delta,
        pi=pi,
        residual=residual,
        max_residual=float(np.max(np.abs(residual))),
        max_imag=float(np.max(np.abs(delta_c.imag))),
        max_abs_pi=float(np.max(np.abs(pi))),
    )
