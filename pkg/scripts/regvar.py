#!/usr/bin/env python3
"""
Regularly varying functions, their inverses and the psi cut-off.

A FunctionSpec is h(x) = x^c l(x) from a fixed family registry:

    pow          x^c                   x0 = 1
    pow_log      x^c ln x              x0 = e
    pow_div_log  x^c / ln x            x0 = e^2
    pow_explog   x exp((ln x)^a)       x0 = e,  c = 1, a in (0, 1)

Each family has closed-form h', h'', h'''. Every evaluator works on numpy
arrays (binary64) and on mpmath numbers (high-precision path) through the
same formula, selected by the `lib` argument of FunctionSpec._eval.

InverseSpec is phi = h^{-1} (closed form for pow, safeguarded Newton
otherwise); below y0 = h(x0) phi continues along its tangent line so that
phi(n) exists for every n >= 1. PsiSpec is psi = min(1/2, kappa * phi') or,
for kind="difference", psi = min(1/2, kappa * (phi(x+1) - phi(x))).

All three types are frozen and their evaluators are pure.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Any, Dict, Optional, Tuple

import mpmath
import numpy as np

from errors import (
    ConfigError,
    DomainTooSmall,
    InadmissibleExponent,
    InadmissibleSlowlyVarying,
    InvalidParameter,
    NoConvergence,
)

FAMILIES = ("pow", "pow_log", "pow_div_log", "pow_explog")
FAMILY_X0 = {
    "pow": 1.0,
    "pow_log": math.e,
    "pow_div_log": math.e ** 2,
    "pow_explog": math.e,
}
FAMILY_PARAMS = {
    "pow": (),
    "pow_log": (),
    "pow_div_log": (),
    "pow_explog": ("a",),
}
# Families whose l is in L0 (admissible at c = 1)
L0_FAMILIES = {"pow_log", "pow_explog"}

HP_DPS = 40
NEWTON_BUDGET = 200
INVERSE_TOL = 1e-13
PSI_CEILING = 0.5

# Admissibility grid: 64 geometric points from x0 to max(1e12, 1e3 x0)
GRID_POINTS = 64
GRID_TOP = 1e12
# Largest accepted |h(2x)/(2^c h(x)) - 1| at the top of the grid
RATIO_TOL = 0.5


def _as_array(x) -> Tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=float)
    return np.atleast_1d(arr), arr.ndim == 0


def _restore(out: np.ndarray, scalar: bool):
    return float(out[0]) if scalar else out


@dataclass(frozen=True)
class FunctionSpec:
    """Admissible h in R_c: family, exponent c, domain start x0, parameters."""

    family: str
    c: float
    x0: float
    params: Tuple[Tuple[str, float], ...] = ()

    def param(self, name: str) -> float:
        return dict(self.params)[name]

    def describe(self) -> Dict[str, Any]:
        return {"family": self.family, "c": self.c, "x0": self.x0, "params": dict(self.params)}

    # -- evaluation -----------------------------------------------------

    def _eval(self, x, order: int, lib):
        """h^(order)(x) for order 0..3 with lib = numpy or mpmath."""
        c = self.c
        fam = self.family
        if fam == "pow":
            coef = 1.0
            for k in range(order):
                coef *= (c - k)
            return coef * x ** (c - order)

        L = lib.log(x)
        if fam == "pow_log":
            if order == 0:
                return x ** c * L
            if order == 1:
                return x ** (c - 1) * (c * L + 1)
            if order == 2:
                return x ** (c - 2) * (c * (c - 1) * L + 2 * c - 1)
            return x ** (c - 3) * ((c - 2) * (c * (c - 1) * L + 2 * c - 1) + c * (c - 1))

        if fam == "pow_div_log":
            if order == 0:
                return x ** c / L
            if order == 1:
                return x ** (c - 1) * (c / L - 1 / L ** 2)
            r = c * (c - 1) / L - (2 * c - 1) / L ** 2 + 2 / L ** 3
            if order == 2:
                return x ** (c - 2) * r
            dr = -c * (c - 1) / L ** 2 + 2 * (2 * c - 1) / L ** 3 - 6 / L ** 4
            return x ** (c - 3) * ((c - 2) * r + dr)

        # pow_explog
        a = self.param("a")
        E = lib.exp(L ** a)
        if order == 0:
            return x * E
        g = a * L ** (a - 1)
        if order == 1:
            return E * (1 + g)
        u = g + g * g + a * (a - 1) * L ** (a - 2)
        if order == 2:
            return E / x * u
        du = a * (a - 1) * L ** (a - 2) + a * a * (2 * a - 2) * L ** (2 * a - 3) \
            + a * (a - 1) * (a - 2) * L ** (a - 3)
        return E / x ** 2 * (g * u - u + du)

    def h(self, x):
        arr, scalar = _as_array(x)
        return _restore(self._eval(arr, 0, np), scalar)

    def dh(self, x):
        arr, scalar = _as_array(x)
        return _restore(self._eval(arr, 1, np), scalar)

    def d2h(self, x):
        arr, scalar = _as_array(x)
        return _restore(self._eval(arr, 2, np), scalar)

    def d3h(self, x):
        arr, scalar = _as_array(x)
        return _restore(self._eval(arr, 3, np), scalar)

    def h_mp(self, x, order: int = 0):
        """High-precision h^(order); call inside an mpmath.workdps block."""
        return self._eval(mpmath.mpf(x), order, mpmath)

    def ell(self, x):
        arr, scalar = _as_array(x)
        return _restore(self._eval(arr, 0, np) / arr ** self.c, scalar)

    # -- exact integer comparisons ---------------------------------------

    @cached_property
    def exact_exponent(self) -> Optional[Fraction]:
        """c as p/q when h = x^c and c is a short binary fraction, else None."""
        if self.family != "pow":
            return None
        frac = Fraction(self.c)
        return frac if frac.denominator <= 64 else None

    def compare_at_integer(self, m: int, k: int) -> int:
        """Sign of h(m) - k computed exactly (m^p vs k^q); needs exact_exponent."""
        frac = self.exact_exponent
        if frac is None:
            raise InvalidParameter(f"{self.family}(c={self.c}) has no exact integer comparison")
        lhs = int(m) ** frac.numerator
        rhs = int(k) ** frac.denominator
        return (lhs > rhs) - (lhs < rhs)


def admissibility_grid(x0: float) -> np.ndarray:
    top = max(GRID_TOP, 1e3 * x0)
    return np.geomspace(x0, top, GRID_POINTS)


def _check_admissible(spec: FunctionSpec) -> None:
    grid = admissibility_grid(spec.x0)
    d1 = spec.dh(grid)
    d2 = spec.d2h(grid)
    hv = spec.h(grid)
    bad = (d1 <= 0) | (d2 < -1e-12 * hv / grid ** 2)
    if bad.any():
        worst = float(grid[bad][-1])
        raise DomainTooSmall(
            f"{spec.family}(c={spec.c}): h is not increasing and convex up to x={worst:.6g}; "
            f"start the domain beyond it (x0={spec.x0:.6g})"
        )

    ratio = np.abs(spec.h(2 * grid) / (2 ** spec.c * hv) - 1.0)
    if np.any(np.diff(ratio) > 1e-12) or ratio[-1] > RATIO_TOL:
        raise InadmissibleSlowlyVarying(
            f"{spec.family}(c={spec.c}): h(2x)/h(x) does not settle at 2^c "
            f"(deviation {ratio[-1]:.3g} at x={grid[-1]:.3g})"
        )

    if spec.c == 1.0:
        ell = spec.ell(grid)
        if np.any(np.diff(ell) <= 0) or not ell[-1] > ell[0]:
            raise InadmissibleSlowlyVarying(
                f"{spec.family}: l must increase to infinity when c = 1"
            )


def make_function(family: str, params: Optional[Dict[str, float]] = None,
                  c: float = 1.0, x0: Optional[float] = None) -> FunctionSpec:
    """Build and validate an admissible h.

    Raises:
        ConfigError: unknown family or parameter name
        InadmissibleExponent: c outside [1, 2) or not allowed for the family
        InadmissibleSlowlyVarying: L / L0 conditions fail on the grid
        DomainTooSmall: x0 below the family start, h(x0) < 1, or h not
            increasing and convex on the grid
    """
    if family not in FAMILIES:
        raise ConfigError(f"family: unknown family '{family}' (expected one of {list(FAMILIES)})")
    params = dict(params or {})
    unknown = sorted(set(params) - set(FAMILY_PARAMS[family]))
    if unknown:
        raise ConfigError(f"params: unknown key(s) {unknown} for family '{family}'")
    missing = [p for p in FAMILY_PARAMS[family] if p not in params]
    if missing:
        raise ConfigError(f"params: missing key(s) {missing} for family '{family}'")

    c = float(c)
    if not (1.0 <= c < 2.0) or math.isnan(c):
        raise InadmissibleExponent(f"c={c} outside [1, 2)")
    if family == "pow_explog":
        if c != 1.0:
            raise InadmissibleExponent(f"pow_explog fixes c = 1 (got c={c})")
        a = float(params["a"])
        if not 0.0 < a < 1.0:
            raise InadmissibleSlowlyVarying(f"pow_explog needs a in (0, 1) (got a={a})")
    if c == 1.0 and family not in L0_FAMILIES:
        raise InadmissibleSlowlyVarying(
            f"c = 1 requires l in L0; family '{family}' does not provide it"
        )

    start = FAMILY_X0[family]
    x0 = start if x0 is None else float(x0)
    if x0 < start:
        raise DomainTooSmall(f"x0={x0:.6g} below the {family} domain start {start:.6g}")

    spec = FunctionSpec(
        family=family,
        c=c,
        x0=x0,
        params=tuple(sorted((k, float(v)) for k, v in params.items())),
    )
    if spec.h(x0) < 1.0:
        raise DomainTooSmall(f"h(x0)={spec.h(x0):.6g} < 1")
    if family in L0_FAMILIES and spec.ell(x0) < 1.0:
        raise DomainTooSmall(f"l(x0)={spec.ell(x0):.6g} < 1")
    _check_admissible(spec)
    return spec


def function_from_config(block: Dict[str, Any]) -> FunctionSpec:
    """FunctionSpec from a config block {"family", "c", "params"?, "x0"?}."""
    if not isinstance(block, dict):
        raise ConfigError("function block must be a mapping")
    unknown = sorted(set(block) - {"family", "c", "params", "x0"})
    if unknown:
        raise ConfigError(f"unknown key(s) {unknown} in function block")
    family = block.get("family")
    if family is None:
        raise ConfigError("family: required")
    c = block.get("c", 1.0 if family == "pow_explog" else None)
    if c is None:
        raise ConfigError("c: required")
    return make_function(family, block.get("params"), c=c, x0=block.get("x0"))


# ---------------------------------------------------------------------------
# Inverse
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class InverseSpec:
    """phi = h^{-1} with phi', phi'', phi''' and a high-precision path."""

    base: FunctionSpec
    mode: str
    tolerance: float = INVERSE_TOL

    @cached_property
    def y0(self) -> float:
        return self.base.h(self.base.x0)

    @cached_property
    def slope0(self) -> float:
        return 1.0 / self.base.dh(self.base.x0)

    def _solve(self, y: np.ndarray) -> np.ndarray:
        base = self.base
        if self.mode == "closed_form":
            return y ** (1.0 / base.c)

        lo = np.full_like(y, base.x0)
        hi = np.maximum(2.0 * y ** (1.0 / base.c) + 16.0, base.x0 + 1.0)
        for _ in range(NEWTON_BUDGET):
            short = base.h(hi) < y
            if not short.any():
                break
            hi = np.where(short, 2.0 * hi, hi)
        else:
            raise NoConvergence("could not bracket phi(y)")

        x = np.clip(y ** (1.0 / base.c), lo, hi)
        for _ in range(NEWTON_BUDGET):
            fx = base.h(x) - y
            done = np.abs(fx) <= self.tolerance * y
            collapsed = (hi - lo) <= 4.0 * np.spacing(x)
            if np.all(done | collapsed):
                return x
            lo = np.where(fx < 0, x, lo)
            hi = np.where(fx > 0, x, hi)
            with np.errstate(divide="ignore", invalid="ignore"):
                step = x - fx / base.dh(x)
            outside = ~np.isfinite(step) | (step <= lo) | (step >= hi)
            x = np.where(done, x, np.where(outside, 0.5 * (lo + hi), step))
        raise NoConvergence(f"Newton budget {NEWTON_BUDGET} exhausted for {self.base.family}")

    def phi(self, y):
        arr, scalar = _as_array(y)
        out = np.empty_like(arr)
        inside = arr >= self.y0
        out[~inside] = self.base.x0 + (arr[~inside] - self.y0) * self.slope0
        if inside.any():
            out[inside] = self._solve(arr[inside])
        return _restore(out, scalar)

    def dphi(self, y):
        arr, scalar = _as_array(y)
        x = np.atleast_1d(self.phi(arr))
        out = np.where(arr >= self.y0, 1.0 / self.base.dh(np.maximum(x, self.base.x0)), self.slope0)
        return _restore(out, scalar)

    def d2phi(self, y):
        arr, scalar = _as_array(y)
        x = np.maximum(np.atleast_1d(self.phi(arr)), self.base.x0)
        d1 = self.base.dh(x)
        out = np.where(arr >= self.y0, -self.base.d2h(x) / d1 ** 3, 0.0)
        return _restore(out, scalar)

    def d3phi(self, y):
        arr, scalar = _as_array(y)
        x = np.maximum(np.atleast_1d(self.phi(arr)), self.base.x0)
        d1 = self.base.dh(x)
        d2 = self.base.d2h(x)
        d3 = self.base.d3h(x)
        out = np.where(arr >= self.y0, -d3 / d1 ** 4 + 3.0 * d2 ** 2 / d1 ** 5, 0.0)
        return _restore(out, scalar)

    # -- high precision --------------------------------------------------

    def phi_mp(self, y):
        """High-precision phi(y); call inside an mpmath.workdps block."""
        base = self.base
        y = mpmath.mpf(y)
        x0 = mpmath.mpf(base.x0)
        y0 = base.h_mp(x0)
        if y < y0:
            return x0 + (y - y0) / base.h_mp(x0, 1)
        if self.mode == "closed_form":
            return y ** (1 / mpmath.mpf(base.c))
        start = mpmath.mpf(self.phi(float(y)))
        return mpmath.findroot(lambda t: base.h_mp(t) - y, start)

    def dphi_mp(self, y):
        base = self.base
        x = self.phi_mp(y)
        x0 = mpmath.mpf(base.x0)
        return 1 / base.h_mp(max(x, x0), 1) if x >= x0 else 1 / base.h_mp(x0, 1)


def invert(spec: FunctionSpec) -> InverseSpec:
    """Compositional inverse of an admissible h."""
    mode = "closed_form" if spec.family == "pow" else "newton_bisection"
    return InverseSpec(base=spec, mode=mode)


def doubling_constant(inv: InverseSpec, grid: Optional[np.ndarray] = None) -> float:
    """sup phi'(x) / phi'(2x) over a geometric grid (C with phi'(x) <= C phi'(2x))."""
    if grid is None:
        grid = np.geomspace(max(1.0, inv.y0), 1e12, 256)
    return float(np.max(inv.dphi(grid) / inv.dphi(2.0 * grid)))


# ---------------------------------------------------------------------------
# psi
# ---------------------------------------------------------------------------

PSI_KINDS = ("derivative", "difference")


@dataclass(frozen=True)
class PsiSpec:
    """psi: [1, inf) -> (0, 1/2], psi ~ kappa * phi' (or a forward difference)."""

    base: InverseSpec
    kappa: float = 1.0
    kind: str = "derivative"
    ceiling: float = PSI_CEILING

    def raw(self, x):
        arr, scalar = _as_array(x)
        if self.kind == "derivative":
            out = self.kappa * np.atleast_1d(self.base.dphi(arr))
        else:
            out = self.kappa * (np.atleast_1d(self.base.phi(arr + 1.0))
                                - np.atleast_1d(self.base.phi(arr)))
        return _restore(out, scalar)

    def _raw_derivative(self, arr: np.ndarray, order: int) -> np.ndarray:
        fn = self.base.d2phi if order == 1 else self.base.d3phi
        if self.kind == "derivative":
            return self.kappa * np.atleast_1d(fn(arr))
        prev = self.base.dphi if order == 1 else self.base.d2phi
        return self.kappa * (np.atleast_1d(prev(arr + 1.0)) - np.atleast_1d(prev(arr)))

    def psi(self, x):
        arr, scalar = _as_array(x)
        return _restore(np.minimum(self.ceiling, np.atleast_1d(self.raw(arr))), scalar)

    def dpsi(self, x):
        arr, scalar = _as_array(x)
        active = np.atleast_1d(self.raw(arr)) < self.ceiling
        return _restore(np.where(active, self._raw_derivative(arr, 1), 0.0), scalar)

    def d2psi(self, x):
        arr, scalar = _as_array(x)
        active = np.atleast_1d(self.raw(arr)) < self.ceiling
        return _restore(np.where(active, self._raw_derivative(arr, 2), 0.0), scalar)

    def psi_mp(self, x):
        """High-precision psi(x); call inside an mpmath.workdps block."""
        if self.kind == "derivative":
            raw = self.kappa * self.base.dphi_mp(x)
        else:
            x = mpmath.mpf(x)
            raw = self.kappa * (self.base.phi_mp(x + 1) - self.base.phi_mp(x))
        return min(mpmath.mpf(self.ceiling), raw)

    @cached_property
    def clip_point(self) -> float:
        """Smallest x >= 1 beyond which psi = raw (clipping inactive)."""
        if self.raw(1.0) < self.ceiling:
            return 1.0
        lo, hi = 1.0, 2.0
        while self.raw(hi) >= self.ceiling:
            lo, hi = hi, 2.0 * hi
            if hi > 1e300:
                return math.inf
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if self.raw(mid) >= self.ceiling:
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-12 * hi:
                break
        return hi

    def describe(self) -> Dict[str, Any]:
        return {"kappa": self.kappa, "kind": self.kind, "clip_point": self.clip_point}


def make_psi(inv: InverseSpec, kappa: float = 1.0, kind: str = "derivative") -> PsiSpec:
    """psi(x) = min(1/2, kappa * phi'(x)); kind="difference" uses phi(x+1) - phi(x)."""
    kappa = float(kappa)
    if not kappa > 0 or not math.isfinite(kappa):
        raise InvalidParameter(f"kappa must be positive (got {kappa})")
    if kind not in PSI_KINDS:
        raise ConfigError(f"psi.kind: unknown kind '{kind}' (expected one of {list(PSI_KINDS)})")
    return PsiSpec(base=inv, kappa=kappa, kind=kind)


def block_construction_psi(inv: InverseSpec, width: int = 100) -> PsiSpec:
    """psi = width * C * phi' with C the doubling constant of phi'.

    Makes B contain infinitely many blocks of `width` consecutive integers.
    """
    return make_psi(inv, kappa=width * doubling_constant(inv))
