#!/usr/bin/env python3
"""
Kernels built from a thin set and their autocorrelations.

    K_N(x) = phi2(N)^-1 sum_{n in B} eta(n/N) delta_n(x)     smooth dyadic
    K_t(x) = |B_t|^-1  sum_{n in B_t} delta_n(x)              flat
    L_t(x) = |B_t|^-1  sum_{s <= t} psi(s) delta_s(x)         psi-weighted

gn_en_split compares K_N * K~_N with its psi-smoothed model G_N and reports
the constants of the small-x bound, the E_N decay and the Lipschitz bound.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from errors import EmptySet, InsufficientGrid, InvalidParameter, OutOfHorizon
from expsum import fit_loglog, fitted_decay
from signals import Signal
from thinset import ThinSet, ThinSetSpec, count, run_stats

DIRECT_MAX_ATOMS = 1 << 12
KERNEL_KINDS = ("flat", "smooth_dyadic", "weighted")
# c1 range of the standing hypothesis for the G_N / E_N split
SHARP_C1_RANGE = (1.0, 30.0 / 29.0)


def _smooth_step(u: np.ndarray) -> np.ndarray:
    """T(u) = S(u) / (S(u) + S(1 - u)), S(u) = exp(-1/u) for u > 0."""
    u = np.clip(u, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        s0 = np.where(u > 0, np.exp(-1.0 / np.where(u > 0, u, 1.0)), 0.0)
        s1 = np.where(u < 1, np.exp(-1.0 / np.where(u < 1, 1.0 - u, 1.0)), 0.0)
    return s0 / (s0 + s1)


def bump_eta(x):
    """C-infinity bump: 0 outside (1/2, 4), 1 on [1, 2]."""
    arr = np.asarray(x, dtype=float)
    out = np.zeros(arr.shape)
    rise = (arr > 0.5) & (arr < 1.0)
    flat = (arr >= 1.0) & (arr <= 2.0)
    fall = (arr > 2.0) & (arr < 4.0)
    out[rise] = _smooth_step(2.0 * arr[rise] - 1.0)
    out[flat] = 1.0
    out[fall] = _smooth_step((4.0 - arr[fall]) / 2.0)
    return float(out) if arr.ndim == 0 else out


@dataclass(frozen=True)
class Kernel:
    signal: Signal
    normalization: str
    scale: int
    spec: ThinSetSpec

    @property
    def mass(self) -> float:
        return math.fsum(self.signal.values)

    @property
    def atoms(self) -> int:
        return int(np.count_nonzero(self.signal.values))


def kernel_smooth_dyadic(ts: ThinSet, N: int) -> Kernel:
    """K_N: atoms at B cap (N/2, 4N) with weight eta(n/N) / phi2(N)."""
    if N < 1 or 4 * N > ts.N:
        raise OutOfHorizon(f"smooth dyadic kernel at N={N} needs horizon >= {4 * N} (have {ts.N})")
    lo = N // 2 + 1
    hi = 4 * N - 1
    n = np.arange(lo, hi + 1)
    w = ts.bitmap[lo - 1:hi] * np.asarray(bump_eta(n / N)) / ts.phi2(float(N))
    return Kernel(Signal(lo, w), "smooth_dyadic", N, ts.spec)


def kernel_flat(ts: ThinSet, t: int) -> Kernel:
    """K_t: mass 1/|B_t| on each element of B_t."""
    size = count(ts, t)
    if size == 0:
        raise EmptySet(f"B_t is empty at t={t}")
    return Kernel(Signal(1, ts.bitmap[:t] / size), "flat", t, ts.spec)


def kernel_weighted(ts: ThinSet, t: int) -> Kernel:
    """L_t: mass psi(s)/|B_t| on every s <= t."""
    size = count(ts, t)
    if size == 0:
        raise EmptySet(f"B_t is empty at t={t}")
    return Kernel(Signal(1, ts.psi_values[:t] / size), "weighted", t, ts.spec)


# ---------------------------------------------------------------------------
# autocorrelation
# ---------------------------------------------------------------------------

def _correlate_direct(sig: Signal) -> np.ndarray:
    pos = np.flatnonzero(sig.values)
    w = sig.values[pos]
    span = sig.size
    out = np.zeros(2 * span - 1)
    diffs = np.subtract.outer(pos, pos) + span - 1
    np.add.at(out, diffs.ravel(), np.outer(w, w).ravel())
    return out


def _correlate_fft(sig: Signal) -> np.ndarray:
    span = sig.size
    size = 1 << int(math.ceil(math.log2(max(2 * span - 1, 2))))
    F = np.fft.rfft(sig.values, size)
    corr = np.fft.irfft(F * np.conj(F), size)
    # lags -(span-1)..(span-1)
    return np.concatenate((corr[size - span + 1:], corr[:span]))


def autocorrelate(k, method: str = "auto") -> Signal:
    """(K * K~)(x) = sum_y K(y) K(y - x), on [-(span-1), span-1], exactly symmetric.

    method: "direct" (sparse O(S^2)), "fft", or "auto" (direct up to 2^12 atoms).
    """
    sig = k.signal if isinstance(k, Kernel) else k
    if sig.size == 0:
        return Signal(0, np.zeros(0))
    if method not in ("auto", "direct", "fft"):
        raise InvalidParameter(f"unknown correlation method '{method}'")
    atoms = int(np.count_nonzero(sig.values))
    if method == "direct" or (method == "auto" and atoms <= DIRECT_MAX_ATOMS):
        v = _correlate_direct(sig)
    else:
        v = _correlate_fft(sig)
    v = 0.5 * (v + v[::-1])
    return Signal(-(sig.size - 1), v)


# ---------------------------------------------------------------------------
# G_N / E_N split
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AutocorrReport:
    N: int
    kk: Signal = field(repr=False)
    g: Signal = field(repr=False)
    e: Signal = field(repr=False)
    phi1_N: float = 0.0
    C0: int = 0
    C_small: float = 0.0
    E_max: float = 0.0
    E_bound: float = 0.0
    chi: float = 0.0
    chi_source: str = "none"
    lipschitz: float = 0.0
    mass_error: float = 0.0
    symmetric: bool = True
    warnings: List[str] = field(default_factory=list)

    def rows(self) -> List[Dict[str, Any]]:
        xs = self.kk.xs
        kk = self.kk.values
        g = self.g.value_at(xs)
        e = self.e.value_at(xs)
        return [
            {"x": int(x), "kk": float(a), "g": float(b), "e": float(c)}
            for x, a, b, c in zip(xs, kk, g, e)
        ]

    def summary(self) -> Dict[str, Any]:
        return {
            "N": self.N,
            "phi1_N": self.phi1_N,
            "C0": self.C0,
            "C_small": self.C_small,
            "E_max": self.E_max,
            "E_bound": self.E_bound,
            "chi": self.chi,
            "chi_source": self.chi_source,
            "lipschitz": self.lipschitz,
            "mass_error": self.mass_error,
            "symmetric": self.symmetric,
            "warnings": list(self.warnings),
        }


def small_x_cutoff(ts: ThinSet) -> int:
    """C0 = max_run + 2 * (minimal gap between blocks)."""
    stats = run_stats(ts)
    gap = stats["dist_between_blocks"] or 0
    return int(stats["max_run"] + 2 * gap)


def hypothesis_warnings(ts: ThinSet) -> List[str]:
    spec = ts.spec
    out = []
    if spec.phi1.base != spec.phi2.base:
        out.append("h1 != h2: outside the phi1 ~ phi2 regime")
    c1 = spec.phi1.base.c
    if not SHARP_C1_RANGE[0] < c1 < SHARP_C1_RANGE[1]:
        out.append(f"c1={c1} outside (1, 30/29)")
    return out


def resolve_chi(ts: ThinSet, chi: Optional[float] = None) -> Tuple[float, str, List[str]]:
    """(chi, source, warnings): the given chi, else the fitted exponential-sum decay on ts, else 0."""
    if chi is not None:
        return float(chi), "given", []
    try:
        return fitted_decay(ts), "fitted", []
    except InsufficientGrid as e:
        return 0.0, "none", [f"chi not fitted: {e}"]


def gn_en_split(ts: ThinSet, N: int, chi: Optional[float] = None,
                C0: Optional[int] = None) -> AutocorrReport:
    """K_N * K~_N against G_N, with E_N reported beyond phi1(N).

    Without chi, E_bound uses the fitted decay of the sup over xi of
    the exponential-sum error on ts.
    """
    K = kernel_smooth_dyadic(ts, N)
    kk = autocorrelate(K)

    lo = K.signal.offset
    n = np.arange(lo, K.signal.end)
    a = ts.psi_values[n - 1] * np.asarray(bump_eta(n / N)) / ts.phi2(float(N))
    g = autocorrelate(Signal(lo, a))

    xs = kk.xs
    g_vals = g.value_at(xs)
    phi1_N = float(ts.spec.phi1.phi(float(N)))
    far = np.abs(xs) > phi1_N
    e_vals = np.where(far, kk.values - g_vals, 0.0)

    if C0 is None:
        C0 = small_x_cutoff(ts)
    near = (np.abs(xs) >= C0) & (np.abs(xs) <= phi1_N)
    C_small = float(N * np.max(np.abs(kk.values[near]))) if near.any() else 0.0
    E_max = float(np.max(np.abs(e_vals[far]))) if far.any() else 0.0
    chi, chi_source, chi_warnings = resolve_chi(ts, chi)

    mass = K.mass
    mass_error = abs(math.fsum(kk.values) - mass * mass) / (mass * mass)
    return AutocorrReport(
        N=N,
        kk=kk,
        g=Signal(xs[0], g_vals),
        e=Signal(xs[0], e_vals),
        phi1_N=phi1_N,
        C0=C0,
        C_small=C_small,
        E_max=E_max,
        E_bound=float(N ** (1.0 + chi) * E_max),
        chi=chi,
        chi_source=chi_source,
        lipschitz=float(np.max(np.abs(np.diff(g_vals))) * N ** 2),
        mass_error=mass_error,
        symmetric=bool(np.array_equal(kk.values, kk.values[::-1])),
        warnings=hypothesis_warnings(ts) + chi_warnings,
    )


def autocorr_scan(ts: ThinSet, exponents: Sequence[int], chi: Optional[float] = None) -> Dict[str, Any]:
    """gn_en_split at N = 2^k; spreads of C_small and Lipschitz, slope of max |E_N|."""
    C0 = small_x_cutoff(ts)
    chi, chi_source, chi_warnings = resolve_chi(ts, chi)
    reports = [gn_en_split(ts, 1 << k, chi=chi, C0=C0) for k in exponents]
    Ns = [r.N for r in reports]
    c_small = [r.C_small for r in reports if r.C_small > 0]
    lips = [r.lipschitz for r in reports if r.lipschitz > 0]
    out: Dict[str, Any] = {
        "reports": [r.summary() for r in reports],
        "C0": C0,
        "symmetric": all(r.symmetric for r in reports),
        "max_mass_error": max(r.mass_error for r in reports),
        "C_small_spread": max(c_small) / min(c_small) if c_small else None,
        "lipschitz_spread": max(lips) / min(lips) if lips else None,
        "E_slope": None,
        "chi": chi,
        "chi_source": chi_source,
        "warnings": sorted({w for r in reports for w in r.warnings}) + chi_warnings,
    }
    try:
        out["E_slope"] = fit_loglog(Ns, [r.E_max for r in reports])["slope"]
    except InsufficientGrid as e:
        out["warnings"].append(str(e))
    return out
