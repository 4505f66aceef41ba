"""Small one-dimensional search helpers shared by the capacity routines."""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_max(f: Callable[[float], float], a: float, b: float, tol: float = 1e-10) -> tuple[float, float]:
    """Golden-section search for a maximum of ``f`` on [a, b]; returns (argmax, max).

    Unlike scipy's bracketed golden search this accepts plateaus, which occur when the
    gap saturates at its boundary limit in floating point.
    """
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = f(d)
    z = 0.5 * (a + b)
    return z, f(z)


def scan_then_golden(
    f_vec: Callable[[np.ndarray], np.ndarray], lo: float, hi: float, n: int, tol: float = 1e-10
) -> tuple[float, float, int]:
    """Coarse grid scan followed by golden refinement of the best cell.

    Returns (argmax, max, index of best grid point); the index lets callers tell an
    interior maximum from one stuck at the edge of the box.
    """
    grid = np.linspace(lo, hi, n)
    vals = f_vec(grid)
    i = int(np.argmax(vals))
    best_z, best_v = float(grid[i]), float(vals[i])
    a = grid[max(i - 1, 0)]
    b = grid[min(i + 1, n - 1)]

    def f(z: float) -> float:
        return float(f_vec(np.array([z]))[0])

    z, v = golden_max(f, float(a), float(b), tol)
    if v > best_v:
        best_z, best_v = z, v
    return best_z, best_v, i


def sign_change_roots(
    f_vec: Callable[[np.ndarray], np.ndarray],
    lo: float,
    hi: float,
    n: int,
    tol: float = 1e-13,
    nonnegative: bool = False,
) -> list[float]:
    """All roots of ``f`` that show up as sign changes on an n-point grid, refined by bisection.

    With ``nonnegative`` each root is reported as the end of its final bracket at
    which f >= 0, so callers can rely on the sign at the returned point.
    """
    grid = np.linspace(lo, hi, n)
    vals = f_vec(grid)
    roots = []
    for j in range(n - 1):
        va, vb = vals[j], vals[j + 1]
        if va == 0.0:
            roots.append(float(grid[j]))
        elif va * vb < 0.0:
            a, b = float(grid[j]), float(grid[j + 1])
            fa, fb = va, vb
            while b - a > tol * max(1.0, abs(a)):
                mid = 0.5 * (a + b)
                fm = float(f_vec(np.array([mid]))[0])
                if fm == 0.0:
                    a = b = mid
                    break
                if (fm < 0) == (fa < 0):
                    a, fa = mid, fm
                else:
                    b, fb = mid, fm
            if nonnegative:
                roots.append(a if fa >= 0.0 else b)
            else:
                roots.append(0.5 * (a + b))
    if vals[-1] == 0.0:
        roots.append(float(grid[-1]))
    return roots
