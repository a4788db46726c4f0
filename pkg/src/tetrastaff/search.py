"""Tetragram search over vertical stripes using y-projections."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

Stripe = Tuple[int, int]  # half-open column interval [c0, c1)


@dataclass(frozen=True)
class SearchParams:
    n_stripes: int = 16
    ma_length: int = 11
    threshold_frac: float = 0.4
    sep_min: int = 20
    sep_max: int = 100
    spacing_tol: float = 0.20

    def __post_init__(self):
        if self.n_stripes < 1:
            raise ValueError("n_stripes must be >= 1")
        if self.ma_length < 1 or self.ma_length % 2 == 0:
            raise ValueError(f"ma_length must be odd and positive, got {self.ma_length}")
        if not 0 < self.threshold_frac <= 1:
            raise ValueError("threshold_frac must lie in (0, 1]")
        if not 0 < self.sep_min < self.sep_max:
            raise ValueError("need 0 < sep_min < sep_max")
        if not 0 < self.spacing_tol < 1:
            raise ValueError("spacing_tol must lie in (0, 1)")


@dataclass(frozen=True)
class StaffHypothesis:
    peak_rows: Tuple[int, int, int, int]
    stripe: Stripe

    @property
    def deltas(self) -> Tuple[int, int, int]:
        r = self.peak_rows
        return (r[1] - r[0], r[2] - r[1], r[3] - r[2])

    @property
    def mean_sep(self) -> float:
        return sum(self.deltas) / 3.0


def stripe_bounds(cols: int, n_stripes: int) -> List[Stripe]:
    """Partition ``cols`` columns into stripes; the last one takes the remainder."""
    n = min(n_stripes, cols)
    width = cols // n
    bounds = [(s * width, (s + 1) * width) for s in range(n)]
    bounds[-1] = (bounds[-1][0], cols)
    return bounds


def y_projection(image: np.ndarray, stripe: Stripe) -> np.ndarray:
    """Foreground count per row restricted to the stripe's columns."""
    c0, c1 = stripe
    if not 0 <= c0 < c1 <= image.shape[1]:
        raise ValueError(f"stripe {stripe} is empty or outside width {image.shape[1]}")
    return np.count_nonzero(image[:, c0:c1], axis=1).astype(np.float64)


def smooth_projection(values: np.ndarray, length: int) -> np.ndarray:
    """Centered moving average with zero padding; output length = input length."""
    if length < 1 or length % 2 == 0:
        raise ValueError(f"moving-average length must be odd and positive, got {length}")
    values = np.asarray(values, dtype=np.float64)
    # summing first keeps integer projections exact, so equal plateaus compare equal
    return np.convolve(values, np.ones(length), mode="same") / length


def threshold_projection(values: np.ndarray, stripe_width: int, frac: float) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    h_th = frac * stripe_width
    return np.where(values > h_th, values, 0.0)


def local_maxima(values: np.ndarray, min_sep: int) -> List[int]:
    """Plateau-aware local maxima, thinned greedily by height.

    A plateau of equal values bordered by lower values on both sides (the
    ends of the sequence count as zero) yields its center row. Candidates
    are then accepted tallest first (ties to the lower row) and anything
    closer than ``min_sep`` rows to an accepted peak is dropped.
    """
    v = np.asarray(values, dtype=np.float64).tolist()
    n = len(v)
    candidates = []
    i = 0
    while i < n:
        if v[i] <= 0:
            i += 1
            continue
        j = i
        while j + 1 < n and v[j + 1] == v[i]:
            j += 1
        left = v[i - 1] if i > 0 else 0.0
        right = v[j + 1] if j + 1 < n else 0.0
        if left < v[i] and right < v[i]:
            candidates.append((i + (j - i) // 2, v[i]))
        i = j + 1
    candidates.sort(key=lambda c: (-c[1], c[0]))
    accepted: List[int] = []
    for row, _ in candidates:
        if all(abs(row - a) >= min_sep for a in accepted):
            accepted.append(row)
    return sorted(accepted)


def spacing_ok(deltas: Sequence[float], params: SearchParams) -> bool:
    for i, d in enumerate(deltas):
        if not params.sep_min <= d <= params.sep_max:
            return False
        others = [deltas[j] for j in range(3) if j != i]
        ref = sum(others) / 2.0
        if abs(d - ref) > params.spacing_tol * ref:
            return False
    return True


def find_tetragram(maxima: Sequence[int], params: SearchParams = SearchParams(), stripe: Stripe = (0, 0)) -> Optional[StaffHypothesis]:
    """First window of four consecutive maxima with staff-like spacing."""
    rows = list(maxima)
    for k in range(len(rows) - 3):
        window = rows[k : k + 4]
        deltas = [window[i + 1] - window[i] for i in range(3)]
        if spacing_ok(deltas, params):
            return StaffHypothesis(tuple(int(r) for r in window), stripe)
    return None


def stripe_projections(image: np.ndarray, params: SearchParams = SearchParams()):
    """Raw y-projections for every stripe, as (bounds, array of shape (n_stripes, rows))."""
    bounds = stripe_bounds(image.shape[1], params.n_stripes)
    projections = np.stack([y_projection(image, b) for b in bounds])
    return bounds, projections


def search_projections(bounds: Sequence[Stripe], projections: np.ndarray, params: SearchParams = SearchParams()):
    for s, (stripe, raw) in enumerate(zip(bounds, projections)):
        if not raw.any():
            continue
        smoothed = smooth_projection(raw, params.ma_length)
        filtered = threshold_projection(smoothed, stripe[1] - stripe[0], params.threshold_frac)
        maxima = local_maxima(filtered, params.sep_min)
        hyp = find_tetragram(maxima, params, stripe)
        if hyp is not None:
            return hyp, s
    return None


def search_staff(image: np.ndarray, params: SearchParams = SearchParams()) -> Optional[Tuple[StaffHypothesis, int]]:
    """Scan stripes left to right and return the first tetragram found."""
    image = np.asarray(image, dtype=bool)
    bounds, projections = stripe_projections(image, params)
    return search_projections(bounds, projections, params)
