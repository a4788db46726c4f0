"""Penalized smoothing of tracked lines and interpolating splines for ground truth."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np
from scipy.interpolate import CubicSpline


@dataclass(frozen=True)
class SmoothingParams:
    p: float = 1e-4

    def __post_init__(self):
        if not 0 < self.p < 1:
            raise ValueError(f"smoothing weight must lie in (0, 1), got {self.p}")


def second_difference_gram(n: int):
    """Bands of D^T D for the (n-2) x n second-difference operator D.

    Returns (diag, off1, off2) with lengths n, n-1, n-2.
    """
    diag = np.zeros(n)
    off1 = np.zeros(max(n - 1, 0))
    off2 = np.zeros(max(n - 2, 0))
    k = np.arange(n - 2)
    # row k of D is (1, -2, 1) at columns k, k+1, k+2
    np.add.at(diag, k, 1.0)
    np.add.at(diag, k + 1, 4.0)
    np.add.at(diag, k + 2, 1.0)
    np.add.at(off1, k, -2.0)
    np.add.at(off1, k + 1, -2.0)
    off2[:] = 1.0
    return diag, off1, off2


def solve_pentadiagonal_spd(diag, off1, off2, rhs) -> np.ndarray:
    """Solve A x = rhs for symmetric positive-definite A with bandwidth 2.

    Banded Cholesky A = L L^T, then forward and back substitution.
    """
    a0 = [float(x) for x in diag]
    a1 = [float(x) for x in off1]
    a2 = [float(x) for x in off2]
    b = [float(x) for x in rhs]
    n = len(a0)
    d = [0.0] * n  # L[i, i]
    e = [0.0] * n  # L[i, i-1]
    f = [0.0] * n  # L[i, i-2]
    for i in range(n):
        fi = a2[i - 2] / d[i - 2] if i >= 2 else 0.0
        ei = (a1[i - 1] - (fi * e[i - 1] if i >= 2 else 0.0)) / d[i - 1] if i >= 1 else 0.0
        piv = a0[i] - fi * fi - ei * ei
        if piv <= 0.0:
            raise np.linalg.LinAlgError("matrix is not positive definite")
        d[i] = math.sqrt(piv)
        e[i] = ei
        f[i] = fi
    y = [0.0] * n
    for i in range(n):
        acc = b[i]
        if i >= 1:
            acc -= e[i] * y[i - 1]
        if i >= 2:
            acc -= f[i] * y[i - 2]
        y[i] = acc / d[i]
    x = [0.0] * n
    for i in range(n - 1, -1, -1):
        acc = y[i]
        if i + 1 < n:
            acc -= e[i + 1] * x[i + 1]
        if i + 2 < n:
            acc -= f[i + 2] * x[i + 2]
        x[i] = acc / d[i]
    return np.array(x)


def smooth_curve(samples: Sequence[float], p: float = 1e-4) -> np.ndarray:
    """Minimize p*sum((g - s)**2) + (1 - p)*sum((s[m-1] - 2 s[m] + s[m+1])**2).

    Fewer than three samples are returned unchanged since the curvature
    penalty has no terms.
    """
    g = np.asarray(samples, dtype=np.float64)
    if not np.all(np.isfinite(g)):
        raise ValueError("samples must be finite")
    if not 0 < p < 1:
        raise ValueError(f"smoothing weight must lie in (0, 1), got {p}")
    n = len(g)
    if n < 3:
        return g.copy()
    # affine sequences are in the null space of D, so s(g) = a + s(g - a) for
    # any line a; solving for the residual of a least-squares line keeps the
    # right-hand side small and reproduces affine input to rounding error
    m = np.arange(n, dtype=np.float64)
    intercept, slope = np.polynomial.polynomial.polyfit(m, g, 1)
    trend = intercept + slope * m
    diag, off1, off2 = second_difference_gram(n)
    q = 1.0 - p
    return trend + solve_pentadiagonal_spd(p + q * diag, q * off1, q * off2, p * (g - trend))


def round_curve(curve) -> np.ndarray:
    """Round to the nearest integer, halves away from zero."""
    c = np.asarray(curve, dtype=np.float64)
    return (np.sign(c) * np.floor(np.abs(c) + 0.5)).astype(np.int64)


def interp_spline(control_points: Sequence[Tuple[float, float]], col_range: Tuple[int, int]) -> np.ndarray:
    """Cubic spline through (col, row) control points, sampled at integer columns.

    ``col_range`` is inclusive. Outside the control span the curve continues
    linearly with the end slope.
    """
    pts = np.asarray(control_points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 2:
        raise ValueError("need at least two (col, row) control points")
    x, y = pts[:, 0], pts[:, 1]
    if np.any(np.diff(x) <= 0):
        raise ValueError("control point columns must be strictly increasing")
    cols = np.arange(col_range[0], col_range[1] + 1, dtype=np.float64)
    if len(pts) == 2:
        slope = (y[1] - y[0]) / (x[1] - x[0])
        return y[0] + slope * (cols - x[0])
    spline = CubicSpline(x, y, bc_type="not-a-knot")
    out = spline(cols)
    lo, hi = cols < x[0], cols > x[-1]
    if lo.any():
        out[lo] = y[0] + spline(x[0], 1) * (cols[lo] - x[0])
    if hi.any():
        out[hi] = y[-1] + spline(x[-1], 1) * (cols[hi] - x[-1])
    return out
