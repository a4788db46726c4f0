"""Column-by-column tracking of the four lines of a staff, and the page loop.

Each line position is tracked as a float row. At every column a line is
either detected (a vertical foreground run connected to its previous
position), estimated from the mean update of the lines detected at that
column, or, when nothing is detected, extrapolated with the mean recent
slope of the staff.
"""

from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .morphology import PreprocessParams, preprocess
from .search import SearchParams, StaffHypothesis, search_projections, stripe_projections
from .spline import SmoothingParams, round_curve, smooth_curve

log = logging.getLogger(__name__)

LEFT_TO_RIGHT = "ltr"
RIGHT_TO_LEFT = "rtl"

# per-pixel status codes; 1..3 mean "estimated from k detected lines"
EXTRAPOLATED = 0
DETECTED = 4
STATUS_NAMES = {0: "X", 1: "E1", 2: "E2", 3: "E3", 4: "D"}
STATUS_CODES = {v: k for k, v in STATUS_NAMES.items()}

DEFAULT_THICKNESS = 10


class TrackingInvariantError(RuntimeError):
    """A tracked staff violated a structural invariant (e.g. line order)."""


def _ceil(x: float) -> int:
    # guards against 2/3 * 60 landing a hair above 40
    return int(math.ceil(x - 1e-9))


@dataclass(frozen=True)
class TrackerParams:
    seed_tile_width_frac: float = 2.0 / 3.0
    seed_tile_height: int = 3
    slope_window_frac: float = 0.5
    search_halfwidth_frac: float = 0.25
    removal_margin_frac: float = 0.5

    def __post_init__(self):
        for name in ("seed_tile_width_frac", "slope_window_frac", "search_halfwidth_frac", "removal_margin_frac"):
            v = getattr(self, name)
            if not 0 < v <= 1:
                raise ValueError(f"{name} must lie in (0, 1], got {v}")
        if self.seed_tile_height < 1 or self.seed_tile_height % 2 == 0:
            raise ValueError(f"seed_tile_height must be odd and positive, got {self.seed_tile_height}")

    def tile_width(self, mean_sep: float) -> int:
        return max(1, _ceil(self.seed_tile_width_frac * mean_sep))

    def slope_window(self, mean_sep: float) -> int:
        return max(1, _ceil(self.slope_window_frac * mean_sep))

    def search_halfwidth(self, mean_sep: float) -> int:
        return max(1, _ceil(self.search_halfwidth_frac * mean_sep))

    def removal_margin(self, mean_sep: float) -> int:
        return _ceil(self.removal_margin_frac * mean_sep)


@dataclass
class TrackedStaff:
    col_range: Tuple[int, int]  # inclusive
    lines: np.ndarray  # (4, width) float rows
    status: np.ndarray  # (4, width) int8 status codes
    mean_sep: float
    thickness_samples: List[int] = field(default_factory=list)
    direction: str = LEFT_TO_RIGHT

    @property
    def n_detected(self) -> int:
        return int(np.count_nonzero(self.status == DETECTED))


@dataclass
class ReconstructedStaff:
    col_range: Tuple[int, int]  # inclusive
    lines: np.ndarray  # (4, width) int rows
    thickness: int
    mean_sep: float
    status: Optional[np.ndarray] = None

    @property
    def columns(self) -> np.ndarray:
        return np.arange(self.col_range[0], self.col_range[1] + 1)


class ColumnView:
    """Column-major byte copy of a binary image for fast vertical-run queries."""

    def __init__(self, image: np.ndarray):
        self.rows, self.cols = image.shape
        self._t = np.ascontiguousarray(np.asarray(image, dtype=bool).T).view(np.uint8)
        self._data = self._t.tobytes()

    def column(self, m: int) -> bytes:
        return self._data[m * self.rows : (m + 1) * self.rows]

    def clear_rows(self, r0: int, r1: int) -> None:
        self._t[:, r0:r1] = 0
        self._data = self._t.tobytes()


def vertical_run(col: bytes, r: int) -> Tuple[int, int]:
    """Half-open [top, bottom) of the foreground run through row r."""
    top = col.rfind(b"\x00", 0, r) + 1
    bottom = col.find(b"\x00", r)
    if bottom < 0:
        bottom = len(col)
    return top, bottom


def _nearest_int(x: float) -> int:
    return int(math.floor(x + 0.5)) if x >= 0 else -int(math.floor(-x + 0.5))


def detect_line(col: bytes, prev: float, halfwidth: int) -> Optional[Tuple[float, int]]:
    """Run center and length for the run touching rows round(prev)-1..round(prev)+1.

    The run must lie within ``halfwidth`` rows of the previous center; among
    several runs the closest center wins.
    """
    r0 = _nearest_int(prev)
    n = len(col)
    best = None
    last_top = -1
    for r in (r0 - 1, r0, r0 + 1):
        if r < 0 or r >= n or not col[r]:
            continue
        top, bottom = vertical_run(col, r)
        if top == last_top:
            continue
        last_top = top
        center = (top + bottom - 1) / 2.0
        dist = abs(center - prev)
        if dist <= halfwidth and (best is None or dist < best[0]):
            best = (dist, center, bottom - top)
    if best is None:
        return None
    return best[1], best[2]


def find_seed(image: np.ndarray, hyp: StaffHypothesis, direction: str = LEFT_TO_RIGHT,
              params: TrackerParams = TrackerParams()) -> Optional[Tuple[int, Tuple[float, ...], Tuple[int, ...]]]:
    """First column, scanning from the travel origin, where all four tiles are filled.

    Returns (column, start rows, run lengths) or None.
    """
    image = np.asarray(image, dtype=bool)
    rows, cols = image.shape
    w = params.tile_width(hyp.mean_sep)
    half_h = params.seed_tile_height // 2
    if w > cols:
        return None
    ok = np.ones(cols, dtype=bool)
    for p in hyp.peak_rows:
        if p - half_h < 0 or p + half_h >= rows:
            return None
        ok &= image[p - half_h : p + half_h + 1].all(axis=0)
    csum = np.concatenate([[0], np.cumsum(ok, dtype=np.int64)])
    full = np.flatnonzero((csum[w:] - csum[:-w]) == w)  # tile covers [j, j + w)
    if len(full) == 0:
        return None
    if direction == LEFT_TO_RIGHT:
        c = int(full[0]) + w // 2
    elif direction == RIGHT_TO_LEFT:
        c = int(full[-1]) + (w - 1 - w // 2)
    else:
        raise ValueError(f"unknown direction {direction!r}")
    column = np.ascontiguousarray(image[:, c]).view(np.uint8).tobytes()
    starts, lengths = [], []
    for p in hyp.peak_rows:
        top, bottom = vertical_run(column, p)
        starts.append((top + bottom - 1) / 2.0)
        lengths.append(bottom - top)
    return c, tuple(starts), tuple(lengths)


def track_direction(image: np.ndarray, seed, mean_sep: float, params: TrackerParams = TrackerParams(),
                    direction: str = LEFT_TO_RIGHT, view: Optional[ColumnView] = None) -> TrackedStaff:
    """Track the four lines from the seed column to the page edge in one direction.

    The span between the seed and the page edge behind it is back-filled
    with the seed rows (status extrapolated) so the pass covers every column.
    """
    if view is None:
        view = ColumnView(image)
    rows, cols = view.rows, view.cols
    col0, start_rows = seed[0], seed[1]
    seed_lengths = list(seed[2]) if len(seed) > 2 else []
    step = 1 if direction == LEFT_TO_RIGHT else -1
    if direction not in (LEFT_TO_RIGHT, RIGHT_TO_LEFT):
        raise ValueError(f"unknown direction {direction!r}")

    window = params.slope_window(mean_sep)
    halfwidth = params.search_halfwidth(mean_sep)
    g = [float(r) for r in start_rows]
    line_cols = [[0.0] * cols for _ in range(4)]
    stat_cols = [[EXTRAPOLATED] * cols for _ in range(4)]
    for i in range(4):
        line_cols[i][col0] = g[i]
        stat_cols[i][col0] = DETECTED
    samples = list(seed_lengths)
    history = [deque(maxlen=window) for _ in range(4)]

    m = col0 + step
    while 0 <= m < cols:
        col = view.column(m)
        found = [detect_line(col, g[i], halfwidth) for i in range(4)]
        hits = [i for i in range(4) if found[i] is not None]
        if hits:
            mean_delta = sum(found[i][0] - g[i] for i in hits) / len(hits)
            k = len(hits)
            for i in range(4):
                if found[i] is not None:
                    center, length = found[i]
                    delta = center - g[i]
                    g[i] = center
                    samples.append(length)
                    stat_cols[i][m] = DETECTED
                else:
                    delta = mean_delta
                    g[i] += delta
                    stat_cols[i][m] = k
                history[i].append(delta)
        else:
            # mean slope over the last `window` stored updates; missing entries count as flat
            common = sum(sum(h) / window for h in history) / 4.0
            for i in range(4):
                g[i] += common
                history[i].append(0.0)
        if not g[0] < g[1] < g[2] < g[3]:
            raise TrackingInvariantError(f"line order violated at column {m}: {g}")
        for i in range(4):
            line_cols[i][m] = g[i]
        m += step

    behind = range(0, col0) if direction == LEFT_TO_RIGHT else range(col0 + 1, cols)
    for i in range(4):
        for c in behind:
            line_cols[i][c] = float(start_rows[i])
    return TrackedStaff(
        col_range=(0, cols - 1),
        lines=np.array(line_cols),
        status=np.array(stat_cols, dtype=np.int8),
        mean_sep=float(mean_sep),
        thickness_samples=samples,
        direction=direction,
    )


def merge_tracks(a: TrackedStaff, b: TrackedStaff) -> TrackedStaff:
    """Combine two directional passes.

    The pass with more detections is principal (ties go to ``a``, the
    left-to-right pass). Principal pixels that are extrapolated or estimated
    from a single line take the other pass's value where that one was
    detected or estimated from at least two lines.
    """
    if a.col_range != b.col_range or a.lines.shape != b.lines.shape:
        raise ValueError(f"cannot merge passes over {a.col_range} and {b.col_range}")
    principal, other = (a, b) if a.n_detected >= b.n_detected else (b, a)
    weak = (principal.status == EXTRAPOLATED) | (principal.status == 1)
    strong = (other.status == DETECTED) | (other.status == 2) | (other.status == 3)
    take = weak & strong
    return TrackedStaff(
        col_range=principal.col_range,
        lines=np.where(take, other.lines, principal.lines),
        status=np.where(take, other.status, principal.status).astype(np.int8),
        mean_sep=principal.mean_sep,
        thickness_samples=list(principal.thickness_samples),
        direction=principal.direction,
    )


def removal_rows(top: float, bottom: float, mean_sep: float, params: TrackerParams, n_rows: int) -> Tuple[int, int]:
    margin = params.removal_margin(mean_sep)
    r0 = max(0, int(math.floor(top)) - margin)
    r1 = min(n_rows, int(math.ceil(bottom)) + margin + 1)
    return r0, max(r0, r1)


def remove_staff(image: np.ndarray, staff: TrackedStaff, params: TrackerParams = TrackerParams()) -> np.ndarray:
    """Copy of ``image`` with the full-width stripe holding the staff cleared."""
    out = np.array(image, dtype=bool, copy=True)
    r0, r1 = removal_rows(staff.lines[0].min(), staff.lines[3].max(), staff.mean_sep, params, out.shape[0])
    out[r0:r1] = False
    return out


def estimate_thickness(samples: Sequence[int]) -> int:
    if not samples:
        return DEFAULT_THICKNESS
    return max(1, _nearest_int(sum(samples) / len(samples)))


def finish_staff(staff: TrackedStaff, smoothing: SmoothingParams = SmoothingParams()) -> ReconstructedStaff:
    lines = np.stack([round_curve(smooth_curve(line, smoothing.p)) for line in staff.lines])
    return ReconstructedStaff(
        col_range=staff.col_range,
        lines=lines,
        thickness=estimate_thickness(staff.thickness_samples),
        mean_sep=staff.mean_sep,
        status=staff.status.copy(),
    )


def reconstruct_binary(binary: np.ndarray, search: SearchParams = SearchParams(),
                       tracker: TrackerParams = TrackerParams(),
                       smoothing: SmoothingParams = SmoothingParams()) -> List[ReconstructedStaff]:
    """Search, track, smooth and remove staves until no tetragram remains."""
    work = np.array(binary, dtype=bool, copy=True)
    n_rows = work.shape[0]
    view = ColumnView(work)
    bounds, projections = stripe_projections(work, search)
    staves: List[ReconstructedStaff] = []

    def clear(r0: int, r1: int) -> None:
        work[r0:r1] = False
        view.clear_rows(r0, r1)
        projections[:, r0:r1] = 0

    while True:
        found = search_projections(bounds, projections, search)
        if found is None:
            break
        hyp, stripe_index = found
        passes = []
        for direction in (LEFT_TO_RIGHT, RIGHT_TO_LEFT):
            seed = find_seed(work, hyp, direction, tracker)
            if seed is not None:
                passes.append(track_direction(work, seed, hyp.mean_sep, tracker, direction, view))
        # the hypothesis rows are always cleared so every iteration removes ink
        top, bottom = hyp.peak_rows[0], hyp.peak_rows[3]
        if not passes:
            log.info("no seed for hypothesis %s in stripe %d; discarding", hyp.peak_rows, stripe_index)
            clear(*removal_rows(top, bottom, hyp.mean_sep, tracker, n_rows))
            continue
        merged = merge_tracks(*passes) if len(passes) == 2 else passes[0]
        staves.append(finish_staff(merged, smoothing))
        log.info("staff %d at rows %s (stripe %d)", len(staves), hyp.peak_rows, stripe_index)
        top = min(top, float(merged.lines[0].min()))
        bottom = max(bottom, float(merged.lines[3].max()))
        clear(*removal_rows(top, bottom, hyp.mean_sep, tracker, n_rows))
    return staves


def reconstruct_page(image: np.ndarray, preprocess_params: PreprocessParams = PreprocessParams(),
                     search: SearchParams = SearchParams(), tracker: TrackerParams = TrackerParams(),
                     smoothing: SmoothingParams = SmoothingParams()) -> List[ReconstructedStaff]:
    """Full pipeline on a gray page: pre-process, then reconstruct every staff."""
    cleaned = preprocess(image, preprocess_params)
    return reconstruct_binary(cleaned, search, tracker, smoothing)
