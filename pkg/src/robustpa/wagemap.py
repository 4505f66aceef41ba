"""Money cost of delivering utility: the wage map h and its inverse u."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from robustpa.errors import DomainError

_EXP_CAP = 700.0


@dataclass(frozen=True)
class WageMap:
    """Strictly increasing, strictly convex h mapping utility to wage.

    ``exp-plus-linear``: h(x) = slope * x + scale * exp(x), onto the reals.
    ``exponential``:     h(x) = scale * exp(x), i.e. log utility u(w) = log(w / scale).
    """

    kind: str = "exp-plus-linear"
    slope: float = 1.0
    scale: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in ("exp-plus-linear", "exponential"):
            raise DomainError(f"unknown wage map kind {self.kind!r}")
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise DomainError(f"wage map scale must be positive, got {self.scale!r}")
        if self.kind == "exp-plus-linear" and not (self.slope > 0 and math.isfinite(self.slope)):
            raise DomainError(f"wage map slope must be positive, got {self.slope!r}")

    def h(self, x):
        e = self.scale * np.exp(np.minimum(x, _EXP_CAP))
        if self.kind == "exponential":
            return e
        return self.slope * np.asarray(x, dtype=float) + e

    def dh(self, x):
        e = self.scale * np.exp(np.minimum(x, _EXP_CAP))
        if self.kind == "exponential":
            return e
        return self.slope + e

    def u(self, w: float, tol: float = 1e-12) -> float:
        """Utility delivered by wage ``w``: the inverse of h."""
        w = float(w)
        if self.kind == "exponential":
            if w <= 0:
                raise DomainError(f"log utility needs a positive wage, got {w!r}")
            return math.log(w / self.scale)
        return _invert_increasing(lambda v: float(self.h(v)), lambda v: float(self.dh(v)), w, tol)

    @property
    def slope_at_minus_inf(self) -> float:
        return 0.0 if self.kind == "exponential" else self.slope

    @property
    def slope_at_plus_inf(self) -> float:
        return math.inf


def _invert_increasing(f, df, target: float, tol: float) -> float:
    """Safeguarded Newton for f(v) = target with a bisection fallback."""
    lo, hi = -1.0, 1.0
    while f(lo) > target:
        lo *= 2.0
    while f(hi) < target:
        hi *= 2.0
    v = 0.5 * (lo + hi)
    for _ in range(200):
        fv = f(v) - target
        if abs(fv) <= tol * max(1.0, abs(target)):
            return v
        if fv > 0:
            hi = v
        else:
            lo = v
        step = v - fv / df(v)
        v = step if lo < step < hi else 0.5 * (lo + hi)
        if hi - lo <= tol * max(1.0, abs(v)):
            return v
    return v


def no_intertemporal_arbitrage(wmap: WageMap, delta: float) -> bool:
    """delta * h'(+inf) > h'(-inf): deferring utility never becomes arbitrarily cheap."""
    return delta * wmap.slope_at_plus_inf > wmap.slope_at_minus_inf
