#!/usr/bin/env python3
"""
Averaging operators along a thin set, maximal functions, the lambda-weight
bridge between D_t and H_t, and oscillation / variation seminorms.

    M_t f(x) = |B_t|^-1  sum_{n in B_t} f(x - n)
    A_t f(x) = |B_t|^-1  sum_{s <= t} psi(s) f(x - s)
    D_t f(x) = Psi(t)^-1 sum_{s <= t} psi(s) f(x - s)
    H_t f(x) = t^-1      sum_{s <= t} f(x - s)

Maximal functions over all t are exact: for a point x the ratio
numerator/denominator can only peak at a scale where the numerator jumps,
i.e. at t = x - y for an atom y of f (and, for M, only when t is in B).
The "hits" engine evaluates exactly those scales; the "dense" engine
walks every scale with running sums and is kept for brute-force checks
and signals with large support.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np

from errors import (
    BadCutPoints,
    EmptyInput,
    EmptyPlan,
    EmptySet,
    IdentityViolation,
    InvalidParameter,
    NonMonotonePsi,
    OutOfHorizon,
)
from kernels import kernel_smooth_dyadic
from regvar import PsiSpec
from signals import Signal, max_deviation, worst_point
from thinset import ThinSet, count

OPS = ("M", "A", "D", "H", "smooth_dyadic")
PLAN_KINDS = ("all_t", "dyadic", "tau_dyadic")
P_GRID = (1.25, 1.5, 2.0, 3.0, 4.0)
VARIATION_EXACT_MAX = 512
HITS_MAX_ATOMS = 512
CHUNK_ROWS = 1 << 12
PSI_MONOTONE_TOL = 1e-15


# ---------------------------------------------------------------------------
# single-scale operators
# ---------------------------------------------------------------------------

def _check_scale(ts: Optional[ThinSet], t: int) -> int:
    t = int(t)
    if t < 1:
        raise InvalidParameter(f"scale t must be >= 1 (got {t})")
    if ts is not None and t > ts.N:
        raise OutOfHorizon(f"t={t} beyond horizon {ts.N}")
    return t


def _convolve_kernel(f: Signal, weights: np.ndarray, denom: float) -> Signal:
    """sum_{s=1..t} weights[s-1] f(x - s) / denom."""
    if f.size == 0:
        return Signal(f.offset + 1, np.zeros(0))
    return Signal(f.offset + 1, np.convolve(f.values, weights) / denom)


def apply_M(ts: ThinSet, f: Signal, t: int) -> Signal:
    t = _check_scale(ts, t)
    size = count(ts, t)
    if size == 0:
        raise EmptySet(f"B_t is empty at t={t}")
    return _convolve_kernel(f, ts.bitmap[:t].astype(float), float(size))


def apply_A(ts: ThinSet, f: Signal, t: int) -> Signal:
    t = _check_scale(ts, t)
    size = count(ts, t)
    if size == 0:
        raise EmptySet(f"B_t is empty at t={t}")
    return _convolve_kernel(f, ts.psi_values[:t], float(size))


def apply_D(ts: ThinSet, f: Signal, t: int) -> Signal:
    t = _check_scale(ts, t)
    return _convolve_kernel(f, ts.psi_values[:t], ts.Psi(t))


def apply_H(f: Signal, t: int) -> Signal:
    """H_t f via prefix sums."""
    t = _check_scale(None, t)
    L = f.size
    if L == 0:
        return Signal(f.offset + 1, np.zeros(0))
    c = np.concatenate(([0.0], np.cumsum(f.values)))
    # x - offset runs over 1 .. L + t - 1
    k = np.arange(1, L + t)
    hi = np.minimum(k, L)
    lo = np.maximum(k - t, 0)
    return Signal(f.offset + 1, (c[hi] - c[lo]) / t)


# ---------------------------------------------------------------------------
# lambda weights and N_k
# ---------------------------------------------------------------------------

def _psi_array(psi: Union[PsiSpec, np.ndarray, ThinSet], upto: int) -> np.ndarray:
    if isinstance(psi, ThinSet):
        if upto > psi.N:
            return np.atleast_1d(psi.spec.psi.psi(np.arange(1, upto + 1, dtype=float)))
        return psi.psi_values[:upto]
    if isinstance(psi, PsiSpec):
        return np.atleast_1d(psi.psi(np.arange(1, upto + 1, dtype=float)))
    arr = np.asarray(psi, dtype=float)
    if arr.size < upto:
        raise InvalidParameter(f"need psi(1..{upto}), got {arr.size} values")
    return arr[:upto]


def lambda_weights(psi, k: int) -> np.ndarray:
    """lambda_s^k for s = 1..k (index s - 1).

    lambda_s = s (psi(s) - psi(s+1)) / Psi(k) for s < k, lambda_k = k psi(k) / Psi(k).
    """
    k = int(k)
    if k < 1:
        raise InvalidParameter(f"k must be >= 1 (got {k})")
    v = _psi_array(psi, k + 1)
    rises = np.flatnonzero(v[1:k] > v[:k - 1] + PSI_MONOTONE_TOL)
    if rises.size:
        s = int(rises[0]) + 1
        raise NonMonotonePsi(f"psi({s + 1}) > psi({s}) ({v[s]:.17g} > {v[s - 1]:.17g})")
    total = math.fsum(v[:k])
    s = np.arange(1, k + 1, dtype=float)
    diffs = np.append(v[:k - 1] - v[1:k], v[k - 1])
    return np.maximum(s * diffs, 0.0) / total


def dk_via_hk(ts: ThinSet, f: Signal, k: int, tol: float = 1e-10) -> Signal:
    """sum_s lambda_s^k H_s f, checked pointwise against apply_D."""
    lam = lambda_weights(ts, k)
    recon = Signal(f.offset + 1, np.zeros(max(f.size + k - 1, 0)))
    for s in np.flatnonzero(lam):
        recon = recon.add(apply_H(f, int(s) + 1).scale(lam[s]))
    direct = apply_D(ts, f, k)
    dev = max_deviation(recon, direct)
    if dev > tol * max(f.norm_inf(), 1e-300):
        raise IdentityViolation(
            f"D_k != sum lambda H_s at x={worst_point(recon, direct)} (deviation {dev:.3e}, k={k})"
        )
    return recon


@dataclass(frozen=True)
class Rearrangement:
    """N_k(t) = min{N : sum_{i <= N} lambda_i^k > t} on [0, 1)."""

    k: int
    weights: np.ndarray = field(repr=False)
    breakpoints: np.ndarray = field(repr=False)   # 0 = b_0 <= ... <= b_k

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.breakpoints[1:], t, side="right") + 1
        out = np.minimum(idx, self.k)
        return int(out) if out.ndim == 0 else out

    @property
    def piece_lengths(self) -> np.ndarray:
        return np.diff(self.breakpoints)


def rearrangement_Nk(psi, k: int) -> Rearrangement:
    lam = lambda_weights(psi, k)
    return Rearrangement(k=int(k), weights=lam, breakpoints=np.concatenate(([0.0], np.cumsum(lam))))


def integrate_H_over_Nk(f: Signal, rearr: Rearrangement) -> Signal:
    """int_0^1 H_{N_k(t)} f dt, exact on the step pieces of N_k."""
    lengths = rearr.piece_lengths
    out = Signal(f.offset + 1, np.zeros(max(f.size + rearr.k - 1, 0)))
    for s in np.flatnonzero(lengths > 0):
        out = out.add(apply_H(f, int(s) + 1).scale(lengths[s]))
    return out


def nk_monotone_in_k(psi, ks: Sequence[int], t_samples: Sequence[float]) -> bool:
    """N_k(t) nondecreasing in k for every sampled t."""
    rows = [rearrangement_Nk(psi, k)(np.asarray(t_samples)) for k in sorted(ks)]
    return bool(np.all(np.diff(np.vstack(rows), axis=0) >= 0))


# ---------------------------------------------------------------------------
# scale plans
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScalePlan:
    kind: str = "all_t"
    tau: Optional[float] = None
    t_max: Optional[int] = None
    p0: Optional[float] = None

    def __post_init__(self):
        if self.kind not in PLAN_KINDS:
            raise InvalidParameter(f"plan kind must be one of {PLAN_KINDS} (got '{self.kind}')")
        if self.kind == "tau_dyadic":
            if self.tau is None:
                raise InvalidParameter("tau_dyadic plan needs tau")
            limit = 0.5 if self.p0 is None else min((self.p0 - 1.0) / 2.0, 0.5)
            if not 0.0 < self.tau < limit:
                raise InvalidParameter(f"tau={self.tau} outside (0, {limit:g})")

    def scales(self, horizon: int) -> np.ndarray:
        """Strictly increasing scales in [1, min(t_max, horizon)]."""
        top = horizon if self.t_max is None else min(self.t_max, horizon)
        if top < 1:
            raise EmptyPlan(f"{self.kind} plan has no scale below {top}")
        if self.kind == "all_t":
            return np.arange(1, top + 1, dtype=np.int64)
        if self.kind == "dyadic":
            return 2 ** np.arange(0, int(math.floor(math.log2(top))) + 1, dtype=np.int64)
        out = []
        n = 0
        while True:
            t = int(math.floor(2.0 ** (n ** self.tau)))
            if t > top:
                break
            out.append(t)
            n += 1
        return np.unique(np.array(out, dtype=np.int64))


def _effective_scales(ts: ThinSet, plan: ScalePlan, op: str, effective_only: bool) -> np.ndarray:
    scales = plan.scales(ts.N)
    if op == "M" and plan.kind == "all_t" and effective_only:
        scales = ts.elements[ts.elements <= scales[-1]]
    if op in ("M", "A"):
        scales = scales[ts.prefix[scales] > 0]
    if scales.size == 0:
        raise EmptyPlan(f"{plan.kind} plan materialised no scale for op {op}")
    return scales


def _op_weights(ts: ThinSet, op: str, d: np.ndarray) -> np.ndarray:
    if op == "M":
        return ts.bitmap[d - 1].astype(float)
    if op in ("A", "D"):
        return ts.psi_values[d - 1]
    return np.ones(d.shape)


def _op_denominator(ts: ThinSet, op: str, t: np.ndarray) -> np.ndarray:
    if op in ("M", "A"):
        return ts.prefix[t].astype(float)
    if op == "D":
        return ts.psi_prefix[t]
    return t.astype(float)


def _maximal_hits(ts: ThinSet, f: Signal, op: str, scales: np.ndarray, all_t: bool) -> Signal:
    pos = f.support()
    y = pos[::-1]                                # descending, so x - y ascends
    a = f.value_at(y)
    t_max = int(scales[-1])
    x = np.arange(f.offset + 1, f.end + t_max, dtype=np.int64)
    out = np.zeros(x.size)
    y_asc = pos

    for lo in range(0, x.size, CHUNK_ROWS):
        xc = x[lo:lo + CHUNK_ROWS]
        d = xc[:, None] - y[None, :]
        valid = (d >= 1) & (d <= t_max)
        dc = np.clip(d, 1, t_max)
        num = np.cumsum(a * _op_weights(ts, op, dc) * valid, axis=1)
        if all_t:
            # A_t keeps its numerator on [d_j, d_j+1); the first scale with a
            # positive count there is max(d_j, min B)
            tc = np.maximum(dc, int(scales[0])) if op == "A" else dc
            den = _op_denominator(ts, op, tc)
            hit = valid & (den > 0)
            if op == "M":
                hit &= ts.bitmap[dc - 1]
            ratio = np.where(hit, num / np.where(den > 0, den, 1.0), 0.0)
            out[lo:lo + xc.size] = ratio.max(axis=1)
            continue
        best = np.zeros(xc.size)
        rows = np.arange(xc.size)
        for t in scales:
            den = float(_op_denominator(ts, op, np.array([t]))[0])
            idx = y.size - np.searchsorted(y_asc, xc - t, side="left")
            val = np.where(idx > 0, num[rows, np.maximum(idx - 1, 0)], 0.0)
            np.maximum(best, val / den, out=best)
        out[lo:lo + xc.size] = best
    return Signal(int(x[0]), out)


def _maximal_dense(ts: ThinSet, f: Signal, op: str, scales: np.ndarray) -> Signal:
    t_max = int(scales[-1])
    L = f.size
    S = np.zeros(L + t_max - 1)
    out = np.zeros_like(S)
    wanted = np.zeros(t_max + 1, dtype=bool)
    wanted[scales] = True
    for t in range(1, t_max + 1):
        w = float(_op_weights(ts, op, np.array([t]))[0])
        if w:
            S[t - 1:t - 1 + L] += w * f.values
        if wanted[t]:
            den = float(_op_denominator(ts, op, np.array([t]))[0])
            np.maximum(out, S / den, out=out)
    return Signal(f.offset + 1, out)


def _maximal_smooth_dyadic(ts: ThinSet, f: Signal, plan: ScalePlan) -> Signal:
    scales = [int(t) for t in plan.scales(ts.N) if 4 * t <= ts.N and t & (t - 1) == 0]
    if not scales:
        raise EmptyPlan("no dyadic scale N with 4N inside the horizon")
    out = Signal(f.offset, np.zeros(0))
    for N in scales:
        K = kernel_smooth_dyadic(ts, N).signal
        conv = Signal(f.offset + K.offset, np.convolve(f.values, K.values))
        lo = min(out.offset, conv.offset) if out.size else conv.offset
        hi = max(out.end, conv.end)
        grid = np.arange(lo, hi)
        out = Signal(lo, np.maximum(out.value_at(grid), conv.value_at(grid)))
    return out


def maximal(ts: ThinSet, f: Signal, plan: Optional[ScalePlan] = None, op: str = "M",
            engine: str = "auto", effective_only: bool = True) -> Signal:
    """sup over the plan's scales of op_t |f|, pointwise.

    engine: "hits" (exact sup at atom hits), "dense" (running sums over all
    scales), or "auto" (hits up to HITS_MAX_ATOMS atoms).
    """
    if op not in OPS:
        raise InvalidParameter(f"op must be one of {OPS} (got '{op}')")
    plan = plan or ScalePlan()
    g = f.abs()
    if op == "smooth_dyadic":
        return _maximal_smooth_dyadic(ts, g, plan)

    scales = _effective_scales(ts, plan, op, effective_only)
    if g.size == 0 or not np.any(g.values):
        return Signal(g.offset + 1, np.zeros(max(g.size + int(scales[-1]) - 1, 0)))
    if engine == "auto":
        engine = "hits" if np.count_nonzero(g.values) <= HITS_MAX_ATOMS else "dense"
    if engine == "hits":
        return _maximal_hits(ts, g, op, scales, all_t=(plan.kind == "all_t"))
    if engine == "dense":
        return _maximal_dense(ts, g, op, scales)
    raise InvalidParameter(f"unknown engine '{engine}'")


def sandwich_ratio(ts: ThinSet, f: Signal) -> Dict[str, float]:
    """max_x M_B f(x) / M^(sd) f(x) with M_B over t <= horizon / 4."""
    t_max = ts.N // 4
    mb = maximal(ts, f, ScalePlan("all_t", t_max=t_max), op="M")
    sd = maximal(ts, f, ScalePlan("dyadic", t_max=t_max), op="smooth_dyadic")
    xs = mb.xs
    num = mb.values
    den = sd.value_at(xs)
    both = (num > 0) & (den > 0)
    uncovered = int(np.count_nonzero((num > 0) & (den == 0)))
    ratio = float(np.max(num[both] / den[both])) if both.any() else 0.0
    return {"ratio": ratio, "uncovered_points": uncovered}


# ---------------------------------------------------------------------------
# variation / oscillation
# ---------------------------------------------------------------------------

def variation2(seq: Sequence[float]) -> Dict[str, Any]:
    """2-variation; exact DP up to VARIATION_EXACT_MAX terms, l1 bound beyond."""
    a = np.asarray(seq, dtype=float)
    n = a.size
    if n < 2:
        return {"value": 0.0, "exact": True}
    if n > VARIATION_EXACT_MAX:
        return {"value": float(np.sum(np.abs(np.diff(a)))), "exact": False}
    best = np.zeros(n)
    for j in range(1, n):
        best[j] = np.max(best[:j] + (a[j] - a[:j]) ** 2)
    return {"value": float(math.sqrt(best.max())), "exact": True}


@dataclass(frozen=True)
class OscillationReport:
    cuts: List[int]
    op: str
    values: Signal = field(repr=False)
    norms: Dict[float, Dict[str, float]] = field(default_factory=dict)
    variation: Optional[Signal] = field(default=None, repr=False)
    variation_exact: bool = False
    l1_bound: Optional[Signal] = field(default=None, repr=False)

    def summary(self) -> Dict[str, Any]:
        return {
            "cuts": list(self.cuts),
            "op": self.op,
            "max_O2": self.values.norm_inf(),
            "norms": {str(p): v for p, v in self.norms.items()},
            "variation_exact": self.variation_exact,
        }


def _check_cuts(ts: ThinSet, cuts: Sequence[int], t_end: Optional[int]) -> List[int]:
    cuts = [int(c) for c in cuts]
    if not cuts or cuts[0] < 1 or any(b <= a for a, b in zip(cuts, cuts[1:])):
        raise BadCutPoints(f"cut points must be strictly increasing and >= 1 (got {cuts})")
    last = cuts[-1] if t_end is None else int(t_end)
    if last > ts.N or last < cuts[-1]:
        raise BadCutPoints(f"cut points {cuts} (end {t_end}) leave the horizon [1, {ts.N}]")
    return cuts


def oscillation(ts: ThinSet, f: Signal, cuts: Sequence[int], plan: Optional[ScalePlan] = None,
                op: str = "M", t_end: Optional[int] = None, with_variation: bool = False,
                p_grid: Sequence[float] = P_GRID) -> OscillationReport:
    """O^2 over windows [I_j, I_{j+1}) (plus [I_J, t_end] when t_end is given)."""
    if op not in ("M", "A", "D", "H"):
        raise InvalidParameter(f"oscillation op must be M, A, D or H (got '{op}')")
    cuts = _check_cuts(ts, cuts, t_end)
    windows = [(a, b - 1) for a, b in zip(cuts, cuts[1:])]
    if t_end is not None:
        windows.append((cuts[-1], int(t_end)))
    top = windows[-1][1] if windows else cuts[-1]

    allowed = None
    if plan is not None:
        allowed = np.zeros(top + 1, dtype=bool)
        sc = plan.scales(ts.N)
        allowed[sc[sc <= top]] = True

    L = f.size
    S = np.zeros(L + top - 1)
    o2 = np.zeros_like(S)
    window_sup = np.zeros_like(S)
    seqs: List[np.ndarray] = []
    l1 = np.zeros_like(S)
    prev = None

    wi = 0
    ref = None
    for t in range(1, top + 1):
        w = float(_op_weights(ts, op, np.array([t]))[0])
        if w:
            S[t - 1:t - 1 + L] += w * f.values
        if wi >= len(windows) or t < windows[wi][0]:
            continue
        start, end = windows[wi]
        changes = op != "M" or ts.bitmap[t - 1] or t == start
        in_plan = allowed is None or allowed[t] or t == start
        if changes and in_plan:
            den = float(_op_denominator(ts, op, np.array([t]))[0])
            if den > 0:
                a_t = S / den
                if t == start:
                    ref = a_t
                elif ref is not None:
                    np.maximum(window_sup, np.abs(a_t - ref), out=window_sup)
                if with_variation:
                    if prev is not None:
                        l1 += np.abs(a_t - prev)
                    prev = a_t
                    if len(seqs) <= VARIATION_EXACT_MAX:
                        seqs.append(a_t)
        if t == end:
            o2 += window_sup ** 2
            window_sup[:] = 0.0
            ref = None
            wi += 1

    values = Signal(f.offset + 1, np.sqrt(o2))
    norms = {}
    for p in p_grid:
        rhs = f.norm_p(p)
        lhs = values.norm_p(p)
        norms[float(p)] = {"lhs": lhs, "rhs": rhs, "ratio": lhs / rhs if rhs > 0 else 0.0}

    variation = None
    exact = False
    l1_sig = None
    if with_variation:
        l1_sig = Signal(f.offset + 1, l1)
        exact = 0 < len(seqs) <= VARIATION_EXACT_MAX
        if exact:
            mat = np.vstack(seqs)
            variation = Signal(f.offset + 1, np.array([variation2(mat[:, i])["value"] for i in range(mat.shape[1])]))
        else:
            variation = l1_sig
    return OscillationReport(
        cuts=cuts,
        op=op,
        values=values,
        norms=norms,
        variation=variation,
        variation_exact=exact,
        l1_bound=l1_sig,
    )


def vector_maximal(ts: ThinSet, fs: Sequence[Signal], plan: Optional[ScalePlan] = None,
                   p_grid: Sequence[float] = P_GRID, op: str = "M") -> Dict[float, Dict[str, float]]:
    """||(sum_j (M |f_j|)^2)^1/2||_p against ||(sum_j |f_j|^2)^1/2||_p."""
    if not fs:
        raise EmptyInput("vector_maximal needs at least one signal")
    lhs_sq = Signal(0, np.zeros(0))
    rhs_sq = Signal(0, np.zeros(0))
    for f in fs:
        m = maximal(ts, f, plan, op=op)
        lhs_sq = lhs_sq.add(Signal(m.offset, m.values ** 2))
        rhs_sq = rhs_sq.add(Signal(f.offset, f.values ** 2))
    lhs = Signal(lhs_sq.offset, np.sqrt(lhs_sq.values))
    rhs = Signal(rhs_sq.offset, np.sqrt(rhs_sq.values))
    out = {}
    for p in p_grid:
        a, b = lhs.norm_p(p), rhs.norm_p(p)
        out[float(p)] = {"lhs_norm": a, "rhs_norm": b, "ratio": a / b if b > 0 else 0.0}
    return out
