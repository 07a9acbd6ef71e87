#!/usr/bin/env python3
"""
Thin sets B+ = {n : {phi1(n)} < psi(n)} and B- = {n : {-phi1(n)} < psi(n)}.

Membership is decided in binary64 first. Points whose boundary margin (or
distance of phi1(n) to an integer) is under 64 ulp of phi1(n) are re-decided
with mpmath at HP_DPS digits; if that is still inside its guard and h1 is a
pure power with rational exponent, the tie is settled with integer
arithmetic. Anything else raises PrecisionExhausted.

Every point is also checked against the floor-difference identity

    1_B(n) = floor(s phi1(n)) - floor(s phi1(n) - psi(n)),   s = +1 / -1

and the number of disagreements is stored on the ThinSet.

Usage (library):
    spec = ThinSetSpec.from_config(cfg)
    ts = enumerate_set(spec, 10**6, threads=4)
    count(ts, 1000); run_stats(ts)
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Dict, List, Optional, Tuple

import mpmath
import numpy as np

from errors import (
    ConfigError,
    EmptySet,
    InvalidParameter,
    OutOfHorizon,
    PrecisionExhausted,
)
from regvar import (
    HP_DPS,
    InverseSpec,
    PsiSpec,
    function_from_config,
    invert,
    make_psi,
)

SIGNS = ("plus", "minus")
GUARD_ULPS = 64
CHUNK = 1 << 16


@dataclass(frozen=True)
class ThinSetSpec:
    phi1: InverseSpec
    phi2: InverseSpec
    psi: PsiSpec
    sign: str = "plus"

    def __post_init__(self):
        if self.sign not in SIGNS:
            raise ConfigError(f"sign: expected one of {list(SIGNS)} (got '{self.sign}')")

    @property
    def s(self) -> int:
        return 1 if self.sign == "plus" else -1

    @classmethod
    def from_config(cls, cfg: Dict[str, Any]) -> "ThinSetSpec":
        """Build from a validated config mapping (keys h1, h2, psi, sign)."""
        try:
            h1 = function_from_config(cfg["h1"])
            h2 = function_from_config(cfg.get("h2", cfg["h1"]))
        except KeyError as e:
            raise ConfigError(f"{e.args[0]}: required") from e
        psi_block = cfg.get("psi") or {}
        phi2 = invert(h2)
        psi = make_psi(phi2, kappa=psi_block.get("kappa", 1.0), kind=psi_block.get("kind", "derivative"))
        return cls(phi1=invert(h1), phi2=phi2, psi=psi, sign=cfg.get("sign", "plus"))

    def describe(self) -> Dict[str, Any]:
        return {
            "h1": self.phi1.base.describe(),
            "h2": self.phi2.base.describe(),
            "psi": self.psi.describe(),
            "sign": self.sign,
        }


@dataclass(frozen=True)
class Membership:
    in_set: bool
    boundary_margin: float
    used_high_precision: bool
    label: int
    identity_agrees: bool = True


# ---------------------------------------------------------------------------
# single-point decisions
# ---------------------------------------------------------------------------

def _exact_tie(spec: ThinSetSpec, n: int, phi_hp) -> Optional[Tuple[bool, int]]:
    """Integer-arithmetic decision for h1 = x^(p/q); None when not applicable."""
    base = spec.phi1.base
    if n < spec.phi1.y0:
        return None
    k = int(mpmath.nint(phi_hp))
    if base.exact_exponent is None:
        # h(1) = 1 for every pure power
        if k >= base.x0 and base.h_mp(k) == n:
            return True, k
        return None
    if k >= 1 and base.compare_at_integer(k, n) == 0:
        # phi1(n) is the integer k: {+-phi1(n)} = 0 < psi(n)
        return True, k

    psi = spec.psi
    if spec.sign == "minus" and psi.kind == "difference" and psi.kappa == 1.0 \
            and psi.raw(float(n)) < psi.ceiling:
        # {-phi(n)} < phi(n+1) - phi(n)  <=>  h(ceil(phi(n))) < n + 1
        m = int(mpmath.ceil(phi_hp))
        if m - 1 >= 1 and base.compare_at_integer(m - 1, n) >= 0:
            m -= 1
        elif base.compare_at_integer(m, n) < 0:
            m += 1
        return base.compare_at_integer(m, n + 1) < 0, m
    return None


def _decide_high_precision(spec: ThinSetSpec, n: int) -> Membership:
    with mpmath.workdps(HP_DPS):
        phi = spec.phi1.phi_mp(n)
        psi = spec.psi.psi_mp(n)
        s_phi = phi if spec.sign == "plus" else -phi
        frac = s_phi - mpmath.floor(s_phi)
        margin = abs(frac - psi)
        to_int = abs(phi - mpmath.nint(phi))
        guard = mpmath.mpf(10) ** (-(HP_DPS - 8)) * max(1, abs(phi))

        if margin < guard or to_int < guard:
            tie = _exact_tie(spec, n, phi)
            if tie is None:
                raise PrecisionExhausted(n, float(margin))
            in_set, label = tie
            return Membership(in_set, float(margin), True, label, True)

        in_set = bool(frac < psi)
        identity = int(mpmath.floor(s_phi) - mpmath.floor(s_phi - psi)) == 1
        label = int(mpmath.floor(phi)) if spec.sign == "plus" else int(mpmath.ceil(phi))
        return Membership(in_set, float(margin), True, label, identity == in_set)


def membership(spec: ThinSetSpec, n: int) -> Membership:
    """Decide n in B with the guarded two-stage test."""
    if int(n) != n or n < 1:
        raise InvalidParameter(f"n must be a positive integer (got {n})")
    n = int(n)
    chunk = _classify_chunk(spec, n, n + 1)
    return Membership(
        in_set=bool(chunk["inside"][0]),
        boundary_margin=float(chunk["margin"][0]),
        used_high_precision=bool(chunk["hp_points"]),
        label=int(chunk["labels"][0]),
        identity_agrees=chunk["disagreements"] == 0,
    )


# ---------------------------------------------------------------------------
# vectorised enumeration
# ---------------------------------------------------------------------------

def _classify_chunk(spec: ThinSetSpec, lo: int, hi: int) -> Dict[str, Any]:
    """Membership of every n in [lo, hi)."""
    n = np.arange(lo, hi, dtype=float)
    phi = np.atleast_1d(spec.phi1.phi(n))
    psi = np.atleast_1d(spec.psi.psi(n))
    s_phi = phi if spec.sign == "plus" else -phi
    fl = np.floor(s_phi)
    frac = s_phi - fl
    inside = frac < psi
    identity = (fl - np.floor(s_phi - psi)) == 1
    labels = (np.floor(phi) if spec.sign == "plus" else np.ceil(phi)).astype(np.int64)

    guard = GUARD_ULPS * np.spacing(phi)
    margin = np.abs(frac - psi)
    flagged = (margin < guard) | (np.abs(phi - np.rint(phi)) < guard)

    disagreements = int(np.count_nonzero((identity != inside) & ~flagged))
    hp_points = [int(v) for v in n[flagged]]
    for n_hp in hp_points:
        res = _decide_high_precision(spec, n_hp)
        i = n_hp - lo
        inside[i] = res.in_set
        margin[i] = res.boundary_margin
        labels[i] = res.label
        disagreements += 0 if res.identity_agrees else 1

    return {
        "inside": inside,
        "labels": labels,
        "margin": margin,
        "hp_points": hp_points,
        "disagreements": disagreements,
    }


@dataclass(frozen=True)
class ThinSet:
    """B intersected with [1, N]: bitmap, elements, prefix counts and blocks."""

    spec: ThinSetSpec
    N: int
    bitmap: np.ndarray = field(repr=False)        # bitmap[n - 1] for n in [1, N]
    elements: np.ndarray = field(repr=False)      # sorted int64
    labels: np.ndarray = field(repr=False)        # block label of each element
    prefix: np.ndarray = field(repr=False)        # prefix[t] = |B cap [1, t]|
    hp_points: Tuple[int, ...] = ()
    identity_disagreements: int = 0

    @cached_property
    def blocks(self) -> List[Tuple[int, int, int]]:
        """(m, n_start, n_end) for each block B_m, in increasing m."""
        if self.elements.size == 0:
            return []
        cut = np.flatnonzero(np.diff(self.labels)) + 1
        starts = np.concatenate(([0], cut))
        ends = np.concatenate((cut, [self.elements.size])) - 1
        return [
            (int(self.labels[s]), int(self.elements[s]), int(self.elements[e]))
            for s, e in zip(starts, ends)
        ]

    @cached_property
    def blocks_contiguous(self) -> bool:
        """Every block is a run of consecutive integers."""
        if self.elements.size == 0:
            return True
        cut = np.flatnonzero(np.diff(self.labels)) + 1
        sizes = np.diff(np.concatenate(([0], cut, [self.elements.size])))
        spans = np.array([e - s + 1 for _, s, e in self.blocks])
        return bool(np.array_equal(sizes, spans))

    @property
    def hp_count(self) -> int:
        return len(self.hp_points)

    def contains(self, n: int) -> bool:
        if n < 1 or n > self.N:
            raise OutOfHorizon(f"n={n} outside [1, {self.N}]")
        return bool(self.bitmap[n - 1])

    def elements_upto(self, t: int) -> np.ndarray:
        return self.elements[:count(self, t)]

    @cached_property
    def psi_values(self) -> np.ndarray:
        """psi(1..N)."""
        return np.atleast_1d(self.spec.psi.psi(np.arange(1, self.N + 1, dtype=float)))

    @cached_property
    def psi_prefix(self) -> np.ndarray:
        """Psi(t) = sum_{s <= t} psi(s), index t in [0, N]."""
        return np.concatenate(([0.0], np.cumsum(self.psi_values)))

    def Psi(self, t: int) -> float:
        """Psi(t) as a correctly rounded sum."""
        if t < 0 or t > self.N:
            raise OutOfHorizon(f"t={t} outside [0, {self.N}]")
        return math.fsum(self.psi_values[:t])

    def phi2(self, t) -> float:
        return self.spec.phi2.phi(t)


def enumerate_set(spec: ThinSetSpec, N: int, threads: int = 1) -> ThinSet:
    """Materialise B on [1, N].

    Chunks of 2^16 integers are classified independently (optionally on a
    thread pool) and merged in index order, so the result does not depend
    on `threads`.
    """
    if int(N) != N or N < 1:
        raise InvalidParameter(f"horizon N must be >= 1 (got {N})")
    N = int(N)
    bounds = [(lo, min(lo + CHUNK, N + 1)) for lo in range(1, N + 1, CHUNK)]

    if threads > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda b: _classify_chunk(spec, *b), bounds))
    else:
        parts = [_classify_chunk(spec, lo, hi) for lo, hi in bounds]

    bitmap = np.concatenate([p["inside"] for p in parts])
    all_labels = np.concatenate([p["labels"] for p in parts])
    elements = np.flatnonzero(bitmap).astype(np.int64) + 1
    prefix = np.concatenate(([0], np.cumsum(bitmap, dtype=np.int64)))
    hp_points = tuple(n for p in parts for n in p["hp_points"])

    bitmap.flags.writeable = False
    return ThinSet(
        spec=spec,
        N=N,
        bitmap=bitmap,
        elements=elements,
        labels=all_labels[elements - 1],
        prefix=prefix,
        hp_points=hp_points,
        identity_disagreements=sum(p["disagreements"] for p in parts),
    )


def count(ts: ThinSet, t: int) -> int:
    """|B cap [1, t]| for 0 <= t <= N."""
    if t < 0 or t > ts.N:
        raise OutOfHorizon(f"t={t} outside [0, {ts.N}]")
    return int(ts.prefix[int(t)])


def run_stats(ts: ThinSet) -> Dict[str, Any]:
    """Runs of consecutive integers in B and gaps between blocks.

    Returns:
        dict with max_run, run_histogram {length: number of runs},
        dist_between_blocks (min start_{k+1} - end_k, None for one block),
        dist_between_blocks_tail (same over the upper half of the blocks)
    """
    el = ts.elements
    if el.size == 0:
        raise EmptySet(f"B is empty on [1, {ts.N}]")

    breaks = np.flatnonzero(np.diff(el) != 1)
    run_lengths = np.diff(np.concatenate(([0], breaks + 1, [el.size])))
    lengths, freq = np.unique(run_lengths, return_counts=True)

    blocks = ts.blocks
    gaps = np.array([b[1] - a[2] for a, b in zip(blocks, blocks[1:])], dtype=np.int64)
    tail = gaps[len(gaps) // 2:]
    return {
        "N": ts.N,
        "size": int(el.size),
        "max_run": int(run_lengths.max()),
        "run_histogram": {int(k): int(v) for k, v in zip(lengths, freq)},
        "blocks": len(blocks),
        "dist_between_blocks": int(gaps.min()) if gaps.size else None,
        "dist_between_blocks_tail": int(tail.min()) if tail.size else None,
    }
