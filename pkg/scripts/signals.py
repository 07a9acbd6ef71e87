#!/usr/bin/env python3
"""
Finitely supported real functions on Z.

A Signal is an integer offset plus a dense float64 array; values outside
[offset, offset + len(values)) are zero. Every operator in operators.py,
kernels.py, czd.py and ergodic.py takes and returns Signals.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterable, Sequence

import numpy as np

from errors import InvalidParameter


@dataclass(frozen=True)
class Signal:
    offset: int
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=float)
        if arr.ndim != 1:
            raise InvalidParameter("Signal values must be one-dimensional")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "offset", int(self.offset))

    # -- constructors ----------------------------------------------------

    @classmethod
    def delta(cls, at: int = 0, mass: float = 1.0) -> "Signal":
        return cls(at, np.array([mass]))

    @classmethod
    def zeros(cls, lo: int, hi: int) -> "Signal":
        """Zero signal carried on [lo, hi] (inclusive)."""
        return cls(lo, np.zeros(max(hi - lo + 1, 0)))

    @classmethod
    def from_points(cls, points: Dict[int, float]) -> "Signal":
        if not points:
            return cls(0, np.zeros(0))
        lo, hi = min(points), max(points)
        vals = np.zeros(hi - lo + 1)
        for x, v in points.items():
            vals[x - lo] += v
        return cls(lo, vals)

    @classmethod
    def from_csv_rows(cls, rows: Iterable[Sequence[str]]) -> "Signal":
        """Rows of (x, value); header rows must be stripped by the caller."""
        return cls.from_points({int(r[0]): float(r[1]) for r in rows})

    # -- geometry --------------------------------------------------------

    @property
    def size(self) -> int:
        return int(self.values.size)

    @property
    def end(self) -> int:
        """One past the last carried index."""
        return self.offset + self.size

    @property
    def xs(self) -> np.ndarray:
        return np.arange(self.offset, self.end, dtype=np.int64)

    def support(self) -> np.ndarray:
        """Integer points with a nonzero value, ascending."""
        return self.xs[self.values != 0]

    def value_at(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.int64)
        idx = x - self.offset
        inside = (idx >= 0) & (idx < self.size)
        out = np.zeros(x.shape)
        out[inside] = self.values[idx[inside]]
        return out

    def to_dense(self, lo: int, hi: int) -> np.ndarray:
        """Values on [lo, hi] (inclusive) as a dense array."""
        return self.value_at(np.arange(lo, hi + 1))

    def trimmed(self) -> "Signal":
        nz = np.flatnonzero(self.values)
        if nz.size == 0:
            return Signal(0, np.zeros(0))
        return Signal(self.offset + int(nz[0]), self.values[nz[0]:nz[-1] + 1])

    # -- arithmetic ------------------------------------------------------

    def shift(self, k: int) -> "Signal":
        """x -> f(x - k)."""
        return Signal(self.offset + int(k), self.values)

    def scale(self, c: float) -> "Signal":
        return Signal(self.offset, c * self.values)

    def abs(self) -> "Signal":
        return Signal(self.offset, np.abs(self.values))

    def add(self, other: "Signal") -> "Signal":
        if other.size == 0:
            return self
        if self.size == 0:
            return other
        lo = min(self.offset, other.offset)
        hi = max(self.end, other.end)
        out = np.zeros(hi - lo)
        out[self.offset - lo:self.end - lo] += self.values
        out[other.offset - lo:other.end - lo] += other.values
        return Signal(lo, out)

    def sub(self, other: "Signal") -> "Signal":
        return self.add(other.scale(-1.0))

    def reflected(self) -> "Signal":
        """x -> f(-x)."""
        return Signal(-(self.end - 1), self.values[::-1])

    # -- norms -----------------------------------------------------------

    def total(self) -> float:
        return float(np.sum(self.values))

    def norm1(self) -> float:
        return float(np.sum(np.abs(self.values)))

    def norm2(self) -> float:
        return float(np.sqrt(np.sum(self.values ** 2)))

    def norm_p(self, p: float) -> float:
        if np.isinf(p):
            return self.norm_inf()
        return float(np.sum(np.abs(self.values) ** p) ** (1.0 / p))

    def norm_inf(self) -> float:
        return float(np.max(np.abs(self.values))) if self.size else 0.0


def max_deviation(a: Signal, b: Signal) -> float:
    """sup_x |a(x) - b(x)|."""
    diff = a.sub(b)
    return diff.norm_inf()


def worst_point(a: Signal, b: Signal) -> int:
    diff = a.sub(b)
    if diff.size == 0:
        return 0
    return diff.offset + int(np.argmax(np.abs(diff.values)))
