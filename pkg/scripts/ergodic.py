#!/usr/bin/env python3
"""
Ergodic averages along a thin set.

Two stock systems:

* RotationSystem: x -> x + theta mod 1 on [0, 1)^k (commuting rotations, one
  angle per coordinate) with separable observables u_1(x_1) ... u_k(x_k).
* ShiftSystem: the integer shift T^n x = x - n carrying a finite Signal, on
  which the ergodic average is literally the operator M_N of operators.py.

Orbit phases n theta mod 1 are re-anchored from a 50-digit theta every 2^16
steps so binary64 drift stays below 2^16 ulp.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import mpmath
import numpy as np

from errors import ConfigError, DimensionTooLarge, EmptySet, InvalidParameter
from signals import Signal
from thinset import ThinSet, count

ANCHOR_BITS = 16
THETA_DPS = 50
MAX_DIMENSION = 3

THETAS = {
    "sqrt2m1": lambda: mpmath.sqrt(2) - 1,
    "golden": lambda: (mpmath.sqrt(5) - 1) / 2,
}


def theta_mp(theta: Union[str, float]):
    with mpmath.workdps(THETA_DPS):
        if isinstance(theta, str):
            if theta not in THETAS:
                raise ConfigError(f"theta: unknown angle '{theta}' (expected one of {sorted(THETAS)})")
            return THETAS[theta]()
        return mpmath.mpf(theta)


def orbit_phases(theta: Union[str, float], n: np.ndarray, x0: float = 0.0) -> np.ndarray:
    """(x0 + n theta) mod 1 for integer n >= 0."""
    n = np.asarray(n, dtype=np.int64)
    th = theta_mp(theta)
    th_f = float(th)
    blocks = n >> ANCHOR_BITS
    out = np.empty(n.size)
    for blk in np.unique(blocks):
        sel = blocks == blk
        base_n = int(blk) << ANCHOR_BITS
        with mpmath.workdps(THETA_DPS):
            anchor = float(mpmath.frac(base_n * th + mpmath.mpf(x0)))
        out[sel] = np.mod(anchor + (n[sel] - base_n) * th_f, 1.0)
    return out


@dataclass(frozen=True)
class Observable:
    """Function on [0, 1): indicator of [a, b), cos(2 pi x), or a constant."""

    kind: str
    a: float = 0.0
    b: float = 1.0

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind == "indicator":
            return ((x >= self.a) & (x < self.b)).astype(float)
        if self.kind == "cos":
            return np.cos(2.0 * np.pi * x)
        return np.full(x.shape, self.a)

    @property
    def integral(self) -> float:
        if self.kind == "indicator":
            return self.b - self.a
        if self.kind == "cos":
            return 0.0
        return self.a

    @property
    def bounds(self) -> Tuple[float, float]:
        if self.kind == "indicator":
            return 0.0, 1.0
        if self.kind == "cos":
            return -1.0, 1.0
        return self.a, self.a


def parse_observable(text: str) -> Observable:
    """'indicator:a,b' | 'cos' | 'const:c'."""
    kind, _, rest = text.partition(":")
    kind = kind.strip()
    if kind == "cos":
        return Observable("cos")
    if kind not in ("indicator", "const"):
        raise ConfigError(f"observable: unknown kind '{kind}' (expected indicator, cos, const)")
    try:
        if kind == "const":
            return Observable("const", float(rest) if rest else 1.0)
        a, b = (float(v) for v in rest.split(","))
    except ValueError as e:
        raise ConfigError(f"observable '{text}': {e}") from e
    if not 0.0 <= a < b <= 1.0:
        raise InvalidParameter(f"indicator needs 0 <= a < b <= 1 (got {a}, {b})")
    return Observable("indicator", a, b)


@dataclass(frozen=True)
class RotationSystem:
    thetas: Tuple[Union[str, float], ...]
    factors: Tuple[Observable, ...]

    def __post_init__(self):
        if len(self.thetas) != len(self.factors):
            raise InvalidParameter("one observable factor per rotation angle")

    @property
    def dimension(self) -> int:
        return len(self.thetas)

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        """f at rows (x_1, ..., x_k) of `points`."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.ones(points.shape[0])
        for i, u in enumerate(self.factors):
            out *= u(points[:, i])
        return out

    @property
    def integral(self) -> float:
        return math.prod(u.integral for u in self.factors)

    @property
    def bounds(self) -> Tuple[float, float]:
        corners = [1.0]
        for u in self.factors:
            lo, hi = u.bounds
            corners = [c * v for c in corners for v in (lo, hi)]
        return min(corners), max(corners)


@dataclass(frozen=True)
class ShiftSystem:
    """Integer shift T^n x = x - n observing a finite Signal."""

    f: Signal

    @property
    def bounds(self) -> Tuple[float, float]:
        v = self.f.values
        return (min(0.0, float(v.min())), max(0.0, float(v.max()))) if v.size else (0.0, 0.0)


System = Union[RotationSystem, ShiftSystem]


def _orbit_values(ts: ThinSet, sys: System, x0, N: int, axis: int = 0) -> np.ndarray:
    el = ts.elements_upto(N)
    if el.size == 0:
        raise EmptySet(f"B cap [1, {N}] is empty")
    if isinstance(sys, ShiftSystem):
        return sys.f.value_at(int(x0) - el)
    return sys.factors[axis](orbit_phases(sys.thetas[axis], el, float(x0)))


def ergodic_average(ts: ThinSet, sys: System, x0, N: int) -> float:
    """|B cap [1, N]|^-1 sum_{n in B, n <= N} f(T^n x0)."""
    if isinstance(sys, RotationSystem) and sys.dimension != 1:
        raise InvalidParameter("ergodic_average takes a one-dimensional system; use multiparam_average")
    vals = _orbit_values(ts, sys, x0, N)
    return math.fsum(vals) / vals.size


def _direct_average(ts_list: Sequence[ThinSet], sys: RotationSystem, x0: Sequence[float],
                    N_vector: Sequence[int]) -> float:
    """Mean of f over every tuple (l_1, ..., l_k) of the product set, one slab per l_1."""
    k = len(ts_list)
    axes = []
    for ts, N in zip(ts_list, N_vector):
        el = ts.elements_upto(int(N))
        if el.size == 0:
            raise EmptySet(f"B cap [1, {int(N)}] is empty")
        axes.append(el)
    if k > 1:
        rest = np.stack(np.meshgrid(*axes[1:], indexing="ij"), axis=-1).reshape(-1, k - 1)
    else:
        rest = np.empty((1, 0), dtype=np.int64)
    sums = []
    for l1 in axes[0]:
        tuples = np.column_stack([np.full(rest.shape[0], l1, dtype=np.int64), rest])
        points = np.column_stack([orbit_phases(sys.thetas[i], tuples[:, i], float(x0[i])) for i in range(k)])
        sums.append(math.fsum(sys.evaluate(points)))
    return math.fsum(sums) / math.prod(a.size for a in axes)


def multiparam_average(ts_list: Sequence[ThinSet], sys: RotationSystem, x0: Sequence[float],
                       N_vector: Sequence[int], method: str = "factorized") -> float:
    """Average of f(x + l_1 theta_1, ..., x + l_k theta_k) over the product of B_i cap [1, N_i].

    method: "factorized" (product of one-dimensional averages) or "direct"
    (f evaluated at every point of the product set).
    """
    k = len(ts_list)
    if k > MAX_DIMENSION:
        raise DimensionTooLarge(f"k={k} > {MAX_DIMENSION}")
    if not (k == sys.dimension == len(x0) == len(N_vector)):
        raise InvalidParameter("ts_list, system, x0 and N_vector must share one dimension")

    if method == "factorized":
        per_axis = [_orbit_values(ts, sys, x0[i], int(N_vector[i]), axis=i) for i, ts in enumerate(ts_list)]
        return math.prod(math.fsum(v) / v.size for v in per_axis)
    if method == "direct":
        return _direct_average(ts_list, sys, x0, N_vector)
    raise InvalidParameter(f"method must be 'factorized' or 'direct' (got '{method}')")


@dataclass(frozen=True)
class ConvergenceTrace:
    N_grid: List[int]
    x0: Any
    averages: List[float]
    reference: Optional[float]
    deviations: List[Optional[float]]
    increments: List[float]
    max_increment_top: float
    max_increment_bottom: float
    in_range: bool
    warnings: List[str] = field(default_factory=list)

    @property
    def increments_shrink(self) -> bool:
        return self.max_increment_top <= self.max_increment_bottom

    def rows(self) -> List[Dict[str, Any]]:
        return [
            {"N": n, "average": a, "deviation": d}
            for n, a, d in zip(self.N_grid, self.averages, self.deviations)
        ]

    def summary(self) -> Dict[str, Any]:
        return {
            "N_grid": list(self.N_grid),
            "averages": list(self.averages),
            "reference": self.reference,
            "max_increment_top": self.max_increment_top,
            "max_increment_bottom": self.max_increment_bottom,
            "increments_shrink": self.increments_shrink,
            "in_range": self.in_range,
            "warnings": list(self.warnings),
        }


def convergence_trace(ts: ThinSet, sys: System, x0, N_grid: Sequence[int]) -> ConvergenceTrace:
    grid = sorted(int(n) for n in N_grid)
    top = grid[-1]
    vals = _orbit_values(ts, sys, x0, top)
    averages = []
    for N in grid:
        c = count(ts, N)
        if c == 0:
            raise EmptySet(f"B cap [1, {N}] is empty")
        averages.append(math.fsum(vals[:c]) / c)

    reference = sys.integral if isinstance(sys, RotationSystem) else None
    deviations = [None if reference is None else abs(a - reference) for a in averages]
    inc = [abs(b - a) for a, b in zip(averages, averages[1:])]
    half = len(inc) // 2
    bottom = max(inc[:half], default=0.0)
    topmax = max(inc[half:], default=0.0)
    lo, hi = sys.bounds
    eps = 1e-12 * max(1.0, abs(lo), abs(hi))
    warnings = []
    if topmax > bottom:
        warnings.append("Cauchy increments did not shrink over the upper half of the grid")
    return ConvergenceTrace(
        N_grid=grid,
        x0=x0,
        averages=averages,
        reference=reference,
        deviations=deviations,
        increments=inc,
        max_increment_top=topmax,
        max_increment_bottom=bottom,
        in_range=all(lo - eps <= a <= hi + eps for a in averages),
        warnings=warnings,
    )


def birkhoff_average(sys: RotationSystem, x0: float, N: int) -> float:
    """Plain average over n = 1..N (comparison baseline)."""
    n = np.arange(1, N + 1)
    return math.fsum(sys.factors[0](orbit_phases(sys.thetas[0], n, x0))) / N
