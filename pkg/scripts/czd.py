#!/usr/bin/env python3
"""
Dyadic Calderon-Zygmund decomposition on Z and the weak-type harness.

cz_decompose selects the maximal dyadic cubes Q_{s,j} = [j 2^s, (j+1) 2^s)
with average of |f| above alpha, starting below a root cube whose average is
at most alpha. refine splits each scale-s bad part b_s at height alpha d_n
and re-averages what is left. verify_absthm_hypotheses measures the kernel
hypotheses (support, size, Lipschitz, E decay, lacunarity) on the smooth
dyadic kernels of a thin set; weaktype_scan measures the weak (1,1)
statistic of the maximal function.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from errors import AlphaTooSmall, IdentityViolation, InsufficientGrid, InvalidParameter
from expsum import fit_loglog
from kernels import gn_en_split, hypothesis_warnings, kernel_smooth_dyadic, small_x_cutoff
from operators import ScalePlan, maximal
from signals import Signal
from thinset import ThinSet

MAX_SPAN_LOG2 = 62
SLACK = 1e-12

Cube = Tuple[int, int]


def cube_bounds(cube: Cube) -> Tuple[int, int]:
    """[start, end) of Q_{s,j}."""
    s, j = cube
    return j << s, (j + 1) << s


@dataclass(frozen=True)
class CZDecomposition:
    f: Signal = field(repr=False)
    alpha: float
    root: Cube
    cubes: List[Cube]
    g: Signal = field(repr=False)
    b: Signal = field(repr=False)
    b_parts: Dict[Cube, Signal] = field(repr=False, default_factory=dict)

    @property
    def scales(self) -> List[int]:
        return sorted({s for s, _ in self.cubes})

    def cubes_at(self, s: int) -> List[Cube]:
        return [c for c in self.cubes if c[0] == s]

    def b_scale(self, s: int) -> Signal:
        """b_s = sum_j b_{s,j}."""
        vals = np.zeros(self.b.size)
        for c in self.cubes_at(s):
            a, e = cube_bounds(c)
            vals[a - self.b.offset:e - self.b.offset] = self.b_parts[c].values
        return Signal(self.b.offset, vals)

    def total_measure(self) -> int:
        return sum(1 << s for s, _ in self.cubes)


def _root_cube(lo: int, hi: int, mass: float, alpha: float) -> Cube:
    s = 0
    while (lo >> s) != (hi >> s):
        s += 1
    while mass / (1 << s) > alpha:
        s += 1
        if s > MAX_SPAN_LOG2:
            raise AlphaTooSmall(f"no root cube of side <= 2^{MAX_SPAN_LOG2} has average <= alpha={alpha}")
    return s, lo >> s


def cz_decompose(f: Signal, alpha: float) -> CZDecomposition:
    """Stopping-time CZ decomposition at level alpha (strict: average > alpha selects)."""
    if not alpha > 0:
        raise InvalidParameter(f"alpha must be positive (got {alpha})")
    f = f.trimmed()
    if f.size == 0:
        return CZDecomposition(f, alpha, (0, 0), [], f, Signal(0, np.zeros(0)), {})

    lo, hi = f.offset, f.end - 1
    absf = np.abs(f.values)
    P = np.concatenate(([0.0], np.cumsum(absf)))
    mass = float(P[-1])

    def cube_mass(cube: Cube) -> float:
        a, b = cube_bounds(cube)
        a = min(max(a, lo), hi + 1)
        b = min(max(b, lo), hi + 1)
        return float(P[b - lo] - P[a - lo])

    root = _root_cube(lo, hi, mass, alpha)
    cubes: List[Cube] = []
    stack = [root]
    while stack:
        s, j = stack.pop()
        if s == 0:
            continue
        for child in ((s - 1, 2 * j), (s - 1, 2 * j + 1)):
            m = cube_mass(child)
            if m == 0:
                continue
            if m / (1 << child[0]) > alpha:
                cubes.append(child)
            else:
                stack.append(child)
    cubes.sort(key=lambda c: cube_bounds(c)[0])

    starts = [cube_bounds(c)[0] for c in cubes] + [lo]
    ends = [cube_bounds(c)[1] for c in cubes] + [hi + 1]
    dom_lo, dom_hi = min(starts), max(ends)
    g_vals = f.to_dense(dom_lo, dom_hi - 1)
    b_vals = np.zeros_like(g_vals)
    b_parts: Dict[Cube, Signal] = {}
    for c in cubes:
        a, e = cube_bounds(c)
        seg = f.to_dense(a, e - 1)
        avg = math.fsum(seg) / (e - a)
        g_vals[a - dom_lo:e - dom_lo] = avg
        part = seg - avg
        b_vals[a - dom_lo:e - dom_lo] = part
        b_parts[c] = Signal(a, part)

    dec = CZDecomposition(
        f=f,
        alpha=float(alpha),
        root=root,
        cubes=cubes,
        g=Signal(dom_lo, g_vals),
        b=Signal(dom_lo, b_vals),
        b_parts=b_parts,
    )
    check_decomposition(dec)
    return dec


def check_decomposition(dec: CZDecomposition) -> None:
    """Assert the CZ invariants; raise IdentityViolation naming the first failure."""
    f, g, b, alpha = dec.f, dec.g, dec.b, dec.alpha
    scale = max(f.norm_inf(), 1.0)
    n1 = f.norm1()

    recon = g.add(b).sub(f)
    if recon.norm_inf() > SLACK * scale:
        raise IdentityViolation(f"f != g + b (max deviation {recon.norm_inf():.3e})")
    if g.norm1() > n1 * (1 + SLACK) + SLACK:
        raise IdentityViolation(f"||g||_1={g.norm1():.17g} exceeds ||f||_1={n1:.17g}")
    if g.norm_inf() > 2 * alpha * (1 + SLACK):
        raise IdentityViolation(f"||g||_inf={g.norm_inf():.17g} exceeds 2 alpha={2 * alpha:.17g}")
    for c, part in dec.b_parts.items():
        size = 1 << c[0]
        if abs(math.fsum(part.values)) > SLACK * max(part.norm1(), 1.0):
            raise IdentityViolation(f"b on cube {c} has nonzero mean ({math.fsum(part.values):.3e})")
        if part.norm1() > 4 * alpha * size * (1 + SLACK):
            raise IdentityViolation(f"||b_{c}||_1={part.norm1():.17g} exceeds 4 alpha |Q|")
    if dec.total_measure() > n1 / alpha * (1 + SLACK):
        raise IdentityViolation(f"sum |Q|={dec.total_measure()} exceeds ||f||_1 / alpha")

    bounds = [cube_bounds(c) for c in dec.cubes]
    for (a0, e0), (a1, _) in zip(bounds, bounds[1:]):
        if a1 < e0:
            raise IdentityViolation(f"cubes overlap at {a1}")
    absf = f.abs()
    for s, j in dec.cubes:
        parent = (s + 1, j >> 1)
        a, e = cube_bounds(parent)
        if math.fsum(absf.to_dense(a, e - 1)) / (e - a) > alpha * (1 + SLACK):
            raise IdentityViolation(f"parent {parent} of selected cube {(s, j)} has average > alpha")


# ---------------------------------------------------------------------------
# refined split
# ---------------------------------------------------------------------------

def threshold_scale(D_n: float) -> int:
    """s(n) = min{s >= 0 : 2^s >= D_n}."""
    return max(0, (int(math.ceil(D_n)) - 1).bit_length())


@dataclass(frozen=True)
class RefinedSplit:
    n: int
    d_n: float
    D_n: float
    s_n: int
    pieces: Dict[int, Dict[str, Signal]] = field(repr=False)
    good: Signal = field(repr=False)        # g + sum_s g_s^n
    large: Signal = field(repr=False)       # sum_s b_s^n
    short: Signal = field(repr=False)       # sum_{s < s(n)} B_s^n
    long: Signal = field(repr=False)        # sum_{s >= s(n)} B_s^n
    reconstruction_error: float = 0.0


def refine(dec: CZDecomposition, n: int, d_n: float, D_n: float) -> RefinedSplit:
    """b_s = b_s^n + h_s^n, h_s^n = g_s^n + B_s^n for every scale s."""
    if not (d_n >= 1 and D_n >= 1):
        raise InvalidParameter(f"d_n and D_n must be >= 1 (got d_n={d_n}, D_n={D_n})")
    alpha = dec.alpha
    s_n = threshold_scale(D_n)
    dom_lo = dec.b.offset
    width = dec.b.size
    good = dec.g.values.copy()
    large = np.zeros(width)
    short = np.zeros(width)
    long_ = np.zeros(width)
    pieces: Dict[int, Dict[str, Signal]] = {}
    scale = max(dec.f.norm_inf(), 1.0)

    for s in dec.scales:
        b_s = np.zeros(width)
        for c in dec.cubes_at(s):
            a, e = cube_bounds(c)
            b_s[a - dom_lo:e - dom_lo] = dec.b_parts[c].values
        mask = np.abs(b_s) > alpha * d_n
        bn = np.where(mask, b_s, 0.0)
        h = np.where(mask, 0.0, b_s)
        g_s = np.zeros(width)
        B_s = np.zeros(width)
        for c in dec.cubes_at(s):
            a, e = cube_bounds(c)
            seg = h[a - dom_lo:e - dom_lo]
            avg = math.fsum(seg) / (e - a)
            B_Q = seg - avg
            if abs(math.fsum(B_Q)) > SLACK * max(np.abs(B_Q).sum(), 1.0):
                raise IdentityViolation(f"B_{s}^{n} has nonzero mean on cube {c}")
            if np.abs(B_Q).sum() > 4 * alpha * (1 << s) * (1 + SLACK):
                raise IdentityViolation(f"||B_{s}^{n} 1_Q||_1 exceeds 4 alpha 2^s on cube {c}")
            g_s[a - dom_lo:e - dom_lo] = avg
            B_s[a - dom_lo:e - dom_lo] = B_Q
        if np.abs(bn + h - b_s).max(initial=0.0) > SLACK * scale:
            raise IdentityViolation(f"b_{s}^{n} + h_{s}^{n} != b_{s}")
        if np.abs(g_s + B_s - h).max(initial=0.0) > SLACK * scale:
            raise IdentityViolation(f"g_{s}^{n} + B_{s}^{n} != h_{s}^{n}")
        pieces[s] = {name: Signal(dom_lo, arr) for name, arr in
                     (("b", b_s), ("bn", bn), ("h", h), ("g", g_s), ("B", B_s))}
        good += g_s
        large += bn
        if s < s_n:
            short += B_s
        else:
            long_ += B_s

    good_sig, large_sig = Signal(dom_lo, good), Signal(dom_lo, large)
    short_sig, long_sig = Signal(dom_lo, short), Signal(dom_lo, long_)
    err = good_sig.add(large_sig).add(short_sig).add(long_sig).sub(dec.f).norm_inf()
    if err > SLACK * scale:
        raise IdentityViolation(f"four-way split does not reconstruct f (max deviation {err:.3e})")
    return RefinedSplit(n, float(d_n), float(D_n), s_n, pieces, good_sig, large_sig, short_sig, long_sig, err)


# ---------------------------------------------------------------------------
# kernel hypotheses
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AbsThmHarness:
    n_values: List[int]
    d: List[int]
    D: List[int]
    A: int
    near_size: List[float]        # sup_{|x| <= A} d_n F_n(x)
    far_size: List[float]         # sup_{|x| > A} D_n F_n(x)
    lipschitz: List[float]        # D_n^2 max_{|x| >= d_n} |F_n(x+1) - F_n(x)|
    E_max: List[float]
    eps1: Optional[float]
    eps0: float
    lacunarity: float
    symmetric: bool
    support_ok: bool
    warnings: List[str] = field(default_factory=list)

    @property
    def far_spread(self) -> float:
        pos = [v for v in self.far_size if v > 0]
        return max(pos) / min(pos) if pos else 0.0

    def summary(self) -> Dict[str, Any]:
        return {
            "n": list(self.n_values),
            "d": list(self.d),
            "D": list(self.D),
            "A": self.A,
            "near_size": list(self.near_size),
            "far_size": list(self.far_size),
            "far_spread": self.far_spread,
            "lipschitz": list(self.lipschitz),
            "E_max": list(self.E_max),
            "eps1": self.eps1,
            "eps0": self.eps0,
            "lacunarity": self.lacunarity,
            "symmetric": self.symmetric,
            "support_ok": self.support_ok,
            "warnings": list(self.warnings),
        }


def verify_absthm_hypotheses(ts: ThinSet, n_range: Sequence[int]) -> AbsThmHarness:
    """Measure the kernel hypotheses at K_n = K_{2^n}, d_n = ceil(phi1(2^n)), D_n = 2^(n+2)."""
    ns = sorted(int(n) for n in n_range)
    if not ns:
        raise InvalidParameter("n range is empty")
    A = small_x_cutoff(ts)
    d, D, near, far, lip, emax = [], [], [], [], [], []
    symmetric = True
    support_ok = True
    for n in ns:
        N = 1 << n
        K = kernel_smooth_dyadic(ts, N).signal.trimmed()
        rep = gn_en_split(ts, N, C0=A)
        xs = rep.kk.xs
        F = np.where(np.abs(xs) <= rep.phi1_N, rep.kk.values, rep.g.value_at(xs))
        d_n = int(math.ceil(rep.phi1_N))
        D_n = 1 << (n + 2)

        symmetric &= bool(np.array_equal(F, F[::-1]))
        support_ok &= K.offset >= 0 and K.end - 1 <= 4 * D_n
        inner = np.abs(xs) <= A
        near.append(float(d_n * np.max(np.abs(F[inner]))) if inner.any() else 0.0)
        far.append(float(D_n * np.max(np.abs(F[~inner]))) if (~inner).any() else 0.0)
        outer = np.abs(xs[:-1]) >= d_n
        steps = np.abs(np.diff(F))[outer]
        lip.append(float(D_n ** 2 * steps.max()) if steps.size else 0.0)
        emax.append(rep.E_max)
        d.append(d_n)
        D.append(D_n)

    warnings = hypothesis_warnings(ts)
    eps1 = None
    try:
        eps1 = -fit_loglog(D, emax)["slope"] - 1.0
    except InsufficientGrid as e:
        warnings.append(str(e))
    eps0 = max(math.log(dn) / math.log(Dn) for dn, Dn in zip(d, D) if dn > 1) if any(x > 1 for x in d) else 0.0
    ratios = [min(d[i + 1] / d[i], D[i + 1] / D[i]) for i in range(len(ns) - 1)]
    return AbsThmHarness(
        n_values=ns,
        d=d,
        D=D,
        A=A,
        near_size=near,
        far_size=far,
        lipschitz=lip,
        E_max=emax,
        eps1=eps1,
        eps0=eps0,
        lacunarity=min(ratios) if ratios else 0.0,
        symmetric=symmetric,
        support_ok=support_ok,
        warnings=warnings,
    )


# ---------------------------------------------------------------------------
# weak type
# ---------------------------------------------------------------------------

def weaktype_scan(ts: ThinSet, f: Signal, lambdas: Optional[Sequence[float]] = None,
                  plan: Optional[ScalePlan] = None, op: str = "M") -> Dict[str, Any]:
    """Level-set sizes |{Mf > lambda}| and sup_lambda lambda |{Mf > lambda}| / ||f||_1."""
    norm = f.norm1()
    if norm == 0:
        raise InvalidParameter("weak-type statistic needs a nonzero f")
    mf = maximal(ts, f, plan, op=op)
    vals = np.sort(mf.values[mf.values > 0])[::-1]
    exact = float(np.max(vals * np.arange(1, vals.size + 1)) / norm) if vals.size else 0.0

    out: Dict[str, Any] = {"norm1": norm, "exact_stat": exact, "levels": []}
    if lambdas is not None:
        lam = np.asarray(lambdas, dtype=float)
        if np.any(lam <= 0):
            raise InvalidParameter("lambda grid must be positive")
        asc = vals[::-1]
        sizes = asc.size - np.searchsorted(asc, lam, side="right")
        out["levels"] = [{"lambda": float(l), "size": int(s)} for l, s in zip(lam, sizes)]
        out["grid_stat"] = float(np.max(lam * sizes) / norm)
    return out


def random_deltas(rng: np.random.Generator, atoms: int = 100, spread: int = 4096) -> Signal:
    """`atoms` unit deltas with random signs at distinct points of [0, spread)."""
    pos = rng.choice(spread, size=atoms, replace=False)
    signs = rng.choice(np.array([-1.0, 1.0]), size=atoms)
    return Signal.from_points({int(p): float(s) for p, s in zip(pos, signs)})


def weaktype_trials(ts: ThinSet, trials: int, seed: int, atoms: int = 100,
                    spread: int = 4096, plan: Optional[ScalePlan] = None) -> List[Dict[str, Any]]:
    rng = np.random.default_rng(seed)
    out = []
    for i in range(trials):
        f = random_deltas(rng, atoms, spread)
        res = weaktype_scan(ts, f, plan=plan)
        out.append({"trial": i, "exact_stat": res["exact_stat"], "norm1": res["norm1"]})
    return out
