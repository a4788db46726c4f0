"""Pixel-level scoring of reconstructed staves against spline ground truth.

Every reconstructed and ground-truth staff pixel (one per column per line)
falls in one of six classes depending on whether it is matched to a pixel
of the other set at the same column within a vertical tolerance, and on
whether the binary image is foreground at that pixel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .spline import interp_spline, round_curve

COUNT_KEYS = ("detected", "interpolated", "missed_det", "missed_interp", "false_det", "false_interp")
GT_KEYS = ("detected", "interpolated", "missed_det", "missed_interp")


@dataclass
class GTLine:
    control_points: List[Tuple[float, float]]
    col_range: Tuple[int, int]  # inclusive; empty when col_range[1] < col_range[0]
    rows: np.ndarray

    @property
    def columns(self) -> np.ndarray:
        return np.arange(self.col_range[0], self.col_range[1] + 1)


@dataclass
class GroundTruth:
    staves: List[List[GTLine]]
    shape: Tuple[int, int]

    @property
    def total_pixels(self) -> int:
        return sum(len(line.rows) for staff in self.staves for line in staff)

    def pixels(self) -> Tuple[np.ndarray, np.ndarray]:
        cols = [line.columns for staff in self.staves for line in staff]
        rows = [line.rows for staff in self.staves for line in staff]
        if not cols:
            return np.zeros(0, np.int64), np.zeros(0, np.int64)
        return np.concatenate(cols).astype(np.int64), np.concatenate(rows).astype(np.int64)


def rasterize_ground_truth(staves: Sequence[Sequence[Sequence[Tuple[float, float]]]], shape: Tuple[int, int]) -> GroundTruth:
    """One integer row per integer column over each line's control-point span."""
    n_cols = shape[1]
    out = []
    for staff in staves:
        lines = []
        for points in staff:
            pts = [(float(c), float(r)) for c, r in points]
            c0 = max(0, math.ceil(pts[0][0]))
            c1 = min(n_cols - 1, math.floor(pts[-1][0]))
            if c1 >= c0:
                rows = round_curve(interp_spline(pts, (c0, c1)))
            else:
                rows = np.zeros(0, dtype=np.int64)
            lines.append(GTLine(pts, (c0, c1), rows))
        out.append(lines)
    return GroundTruth(out, tuple(shape))


def _recon_pixels(recon) -> Tuple[np.ndarray, np.ndarray]:
    cols, rows = [], []
    for staff in recon:
        c = np.arange(staff.col_range[0], staff.col_range[1] + 1)
        for line in staff.lines:
            cols.append(c)
            rows.append(np.asarray(line, dtype=np.int64))
    if not cols:
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    return np.concatenate(cols), np.concatenate(rows)


def _foreground(binary: np.ndarray, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    inside = (rows >= 0) & (rows < binary.shape[0]) & (cols >= 0) & (cols < binary.shape[1])
    fg = np.zeros(len(rows), dtype=bool)
    fg[inside] = binary[rows[inside], cols[inside]]
    return fg


@dataclass
class Classification:
    counts: Dict[str, int]
    offsets: np.ndarray  # recon row - GT row for every matched pair
    gt_total: int
    recon_total: int


def match_pixels(gt_cols, gt_rows, rc_cols, rc_rows, tol: int) -> Tuple[np.ndarray, np.ndarray]:
    """Greedy one-to-one matching within each column by ascending |row difference|.

    Ties resolve by column, then GT row, then reconstructed row. Returns
    index arrays (gt_index, recon_index) of the accepted pairs.
    """
    rc_order = np.lexsort((rc_rows, rc_cols))
    rc_c, rc_r = rc_cols[rc_order], rc_rows[rc_order]
    # candidate recon pixels for GT pixel k lie in [lo[k], hi[k]) of the sorted recon list
    span = np.int64(max(int(np.abs(rc_r).max(initial=0)), int(np.abs(gt_rows).max(initial=0))) + tol + 1)
    key_rc = rc_c * (4 * span) + (rc_r + 2 * span)
    lo = np.searchsorted(key_rc, gt_cols * (4 * span) + (gt_rows - tol + 2 * span), side="left")
    hi = np.searchsorted(key_rc, gt_cols * (4 * span) + (gt_rows + tol + 2 * span), side="right")
    n_cand = hi - lo
    gi = np.repeat(np.arange(len(gt_cols)), n_cand)
    if len(gi) == 0:
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    offs = np.arange(len(gi)) - np.repeat(np.cumsum(n_cand) - n_cand, n_cand)
    ri_sorted = np.repeat(lo, n_cand) + offs
    ri = rc_order[ri_sorted]
    dist = np.abs(rc_rows[ri] - gt_rows[gi])
    order = np.lexsort((rc_rows[ri], gt_rows[gi], gt_cols[gi], dist))
    gt_used = np.zeros(len(gt_cols), dtype=bool)
    rc_used = np.zeros(len(rc_cols), dtype=bool)
    out_g, out_r = [], []
    for g, r in zip(gi[order].tolist(), ri[order].tolist()):
        if gt_used[g] or rc_used[r]:
            continue
        gt_used[g] = rc_used[r] = True
        out_g.append(g)
        out_r.append(r)
    return np.array(out_g, dtype=np.int64), np.array(out_r, dtype=np.int64)


def classify_pixels(recon, gt: GroundTruth, binary: np.ndarray, vertical_tol: int) -> Classification:
    binary = np.asarray(binary, dtype=bool)
    if tuple(binary.shape) != tuple(gt.shape):
        raise ValueError(f"binary image {binary.shape} does not match ground truth {gt.shape}")
    if vertical_tol < 1:
        raise ValueError("vertical_tol must be >= 1")
    for staff in recon:
        if staff.col_range[0] < 0 or staff.col_range[1] >= binary.shape[1]:
            raise ValueError(f"staff columns {staff.col_range} exceed image width {binary.shape[1]}")
    gt_cols, gt_rows = gt.pixels()
    rc_cols, rc_rows = _recon_pixels(recon)
    gi, ri = match_pixels(gt_cols, gt_rows, rc_cols, rc_rows, vertical_tol)

    gt_matched = np.zeros(len(gt_cols), dtype=bool)
    gt_matched[gi] = True
    rc_matched = np.zeros(len(rc_cols), dtype=bool)
    rc_matched[ri] = True
    gt_fg = _foreground(binary, gt_rows, gt_cols)
    rc_fg = _foreground(binary, rc_rows, rc_cols)
    counts = {
        "detected": int(np.count_nonzero(gt_matched & gt_fg)),
        "interpolated": int(np.count_nonzero(gt_matched & ~gt_fg)),
        "missed_det": int(np.count_nonzero(~gt_matched & gt_fg)),
        "missed_interp": int(np.count_nonzero(~gt_matched & ~gt_fg)),
        "false_det": int(np.count_nonzero(~rc_matched & rc_fg)),
        "false_interp": int(np.count_nonzero(~rc_matched & ~rc_fg)),
    }
    offsets = rc_rows[ri] - gt_rows[gi]
    return Classification(counts, offsets, len(gt_cols), len(rc_cols))


def separation_histogram(offsets) -> Dict[int, int]:
    values, counts = np.unique(np.asarray(offsets, dtype=np.int64), return_counts=True)
    return {int(v): int(c) for v, c in zip(values, counts)}


@dataclass
class EvalReport:
    counts: Dict[str, int]
    gt_total: int
    staff_line_pixels: int
    vertical_tol: Optional[int] = None
    separation_histogram: Dict[int, int] = field(default_factory=dict)

    @property
    def correct_reconstructed(self) -> int:
        return self.counts["detected"] + self.counts["interpolated"]

    @property
    def defined(self) -> bool:
        return self.gt_total > 0

    def percentages(self) -> Optional[Dict[str, float]]:
        """Percent of GT pixels (of reconstructed pixels for the false classes); None without GT."""
        if not self.defined:
            return None
        gt = self.gt_total
        pct = {
            "staff_line_pixels": 100.0 * self.staff_line_pixels / gt,
            "correct_reconstructed": 100.0 * self.correct_reconstructed / gt,
        }
        for k in GT_KEYS:
            pct[k] = 100.0 * self.counts[k] / gt
        for k in ("false_det", "false_interp"):
            pct[k] = 100.0 * self.counts[k] / self.staff_line_pixels if self.staff_line_pixels else 0.0
        return pct

    def near_fraction(self, radius: int = 1) -> float:
        total = sum(self.separation_histogram.values())
        if total == 0:
            return 0.0
        near = sum(c for off, c in self.separation_histogram.items() if abs(off) <= radius)
        return near / total

    def to_dict(self) -> dict:
        pct = self.percentages()
        return {
            "counts": dict(self.counts),
            "gt_total": self.gt_total,
            "staff_line_pixels": self.staff_line_pixels,
            "correct_reconstructed": self.correct_reconstructed,
            "vertical_tol": self.vertical_tol,
            "defined": self.defined,
            "percentages": pct,
            "percentages_2dp": None if pct is None else {k: f"{v:.2f}" for k, v in pct.items()},
            "separation_histogram": {str(k): v for k, v in sorted(self.separation_histogram.items())},
        }

    def table(self) -> str:
        pct = self.percentages() or {}
        rows = [
            ("staff line pixels", self.staff_line_pixels, "staff_line_pixels"),
            ("correctly reconstructed pixels", self.correct_reconstructed, "correct_reconstructed"),
            ("correctly detected pixels", self.counts["detected"], "detected"),
            ("correctly interpolated pixels", self.counts["interpolated"], "interpolated"),
            ("missed detections", self.counts["missed_det"], "missed_det"),
            ("missed interpolations", self.counts["missed_interp"], "missed_interp"),
            ("false detections", self.counts["false_det"], "false_det"),
            ("false interpolations", self.counts["false_interp"], "false_interp"),
        ]
        lines = []
        for label, n, key in rows:
            p = pct.get(key)
            lines.append(f"{label:<32}{n:>10}  {'n/a' if p is None else f'{p:6.2f}%'}")
        return "\n".join(lines)


def compute_report(counts: Dict[str, int], gt_total: int, vertical_tol: Optional[int] = None,
                   histogram: Optional[Dict[int, int]] = None) -> EvalReport:
    counts = {k: int(counts.get(k, 0)) for k in COUNT_KEYS}
    if any(v < 0 for v in counts.values()):
        raise ValueError("counts must be nonnegative")
    if sum(counts[k] for k in GT_KEYS) != gt_total:
        raise ValueError("ground-truth counts do not add up to the ground-truth total")
    staff_line_pixels = counts["detected"] + counts["interpolated"] + counts["false_det"] + counts["false_interp"]
    return EvalReport(counts, int(gt_total), staff_line_pixels, vertical_tol, dict(histogram or {}))


def tolerance_from_staves(recon, default: int = 10) -> int:
    """Rounded mean estimated line thickness of a page (at least 1 px)."""
    if not recon:
        return default
    mean = sum(s.thickness for s in recon) / len(recon)
    return max(1, int(math.floor(mean + 0.5)))


def evaluate_page(recon, gt: GroundTruth, binary: np.ndarray, vertical_tol: Optional[int] = None) -> EvalReport:
    tol = vertical_tol if vertical_tol is not None else tolerance_from_staves(recon)
    cls = classify_pixels(recon, gt, binary, tol)
    return compute_report(cls.counts, cls.gt_total, tol, separation_histogram(cls.offsets))


def combine_reports(reports: Sequence[EvalReport]) -> EvalReport:
    """Sum counts and histograms over pages."""
    counts = {k: sum(r.counts[k] for r in reports) for k in COUNT_KEYS}
    hist: Dict[int, int] = {}
    for r in reports:
        for k, v in r.separation_histogram.items():
            hist[k] = hist.get(k, 0) + v
    return compute_report(counts, sum(r.gt_total for r in reports), None, dict(sorted(hist.items())))
