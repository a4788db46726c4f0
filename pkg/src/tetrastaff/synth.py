"""Deterministic synthetic tetragram pages with exact ground truth.

Line centers come from a cubic spline through control points sampled on an
analytic baseline, and the same spline defines the ground truth, so the
drawn bands and the reference lines agree exactly.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .raster import draw_lines, save_binary_png
from .spline import interp_spline, round_curve

FULL_ROWS, FULL_COLS = 6993, 4414
CONTROL_SEGMENTS = 12


@dataclass(frozen=True)
class Baseline:
    kind: str = "flat"  # flat | slope | sinusoid
    slope: float = 0.0  # px per column, about the page center
    amplitude: float = 0.0
    period: float = 3000.0
    phase: float = 0.0

    def offset(self, cols: np.ndarray, n_cols: int) -> np.ndarray:
        cols = np.asarray(cols, dtype=np.float64)
        if self.kind == "flat":
            return np.zeros_like(cols)
        if self.kind == "slope":
            return self.slope * (cols - (n_cols - 1) / 2.0)
        if self.kind == "sinusoid":
            return self.amplitude * np.sin(2 * math.pi * cols / self.period + self.phase)
        raise ValueError(f"unknown baseline kind {self.kind!r}")


@dataclass(frozen=True)
class Gap:
    staff: int
    lines: Tuple[int, ...]
    start: int
    stop: int  # exclusive


@dataclass(frozen=True)
class ArtifactSpec:
    count: int = 0
    min_area: int = 100
    max_area: int = 400
    clearance: int = 3  # px kept free around staff bands and other blobs


@dataclass(frozen=True)
class SynthSpec:
    rows: int = FULL_ROWS
    cols: int = FULL_COLS
    n_staves: int = 10
    line_spacing: int = 60
    thickness: int = 10
    margin: int = 250
    baseline: Baseline = Baseline()
    gaps: Tuple[Gap, ...] = ()
    artifacts: ArtifactSpec = ArtifactSpec()
    seed: int = 0
    sep_range: Tuple[int, int] = (20, 100)

    @classmethod
    def from_dict(cls, d: dict) -> "SynthSpec":
        d = dict(d)
        if "baseline" in d:
            d["baseline"] = Baseline(**d["baseline"])
        if "gaps" in d:
            d["gaps"] = tuple(Gap(g["staff"], tuple(g["lines"]), g["start"], g["stop"]) for g in d["gaps"])
        if "artifacts" in d:
            d["artifacts"] = ArtifactSpec(**d["artifacts"])
        if "sep_range" in d:
            d["sep_range"] = tuple(d["sep_range"])
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown synth spec fields: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["gaps"] = [dict(g, lines=list(g["lines"])) for g in d["gaps"]]
        d["sep_range"] = list(self.sep_range)
        return d

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    @property
    def degradation(self) -> str:
        if not self.gaps and not self.artifacts.count:
            return "clean"
        parts = []
        if self.gaps:
            parts.append(f"gaps:{len(self.gaps)}")
        if self.artifacts.count:
            parts.append(f"artifacts:{self.artifacts.count}")
        return ",".join(parts)


def staff_tops(spec: SynthSpec) -> np.ndarray:
    """Row of each staff's first line before the baseline offset."""
    height = 3 * spec.line_spacing
    usable = spec.rows - 2 * spec.margin - height
    if spec.n_staves == 1:
        return np.array([spec.margin + usable / 2.0])
    return spec.margin + np.arange(spec.n_staves) * (usable / (spec.n_staves - 1))


def validate(spec: SynthSpec) -> None:
    lo, hi = spec.sep_range
    if not lo <= spec.line_spacing <= hi:
        raise ValueError(f"line spacing {spec.line_spacing} outside {spec.sep_range}")
    if spec.thickness < 1 or spec.thickness >= spec.line_spacing:
        raise ValueError("thickness must be positive and smaller than the line spacing")
    if spec.n_staves < 0 or spec.rows < 1 or spec.cols < 2:
        raise ValueError("bad page geometry")
    if spec.n_staves == 0:
        return
    cols = np.arange(spec.cols)
    off = spec.baseline.offset(cols, spec.cols)
    drift = float(off.max() - off.min())
    tops = staff_tops(spec)
    extent = 3 * spec.line_spacing + spec.thickness + drift
    if spec.n_staves > 1 and np.diff(tops).min() <= extent + 2 * spec.artifacts.clearance:
        raise ValueError("staves overlap: reduce n_staves, spacing or baseline drift")
    if tops[0] + off.min() - spec.thickness < 0 or tops[-1] + 3 * spec.line_spacing + off.max() + spec.thickness >= spec.rows:
        raise ValueError("staves do not fit on the page")
    for g in spec.gaps:
        if not 0 <= g.staff < spec.n_staves:
            raise ValueError(f"gap refers to missing staff {g.staff}")
        if not g.lines or any(not 0 <= i < 4 for i in g.lines):
            raise ValueError(f"bad gap line selector {g.lines}")
        if not 0 <= g.start < g.stop <= spec.cols:
            raise ValueError(f"gap columns [{g.start}, {g.stop}) outside page")
    a = spec.artifacts
    if a.count < 0 or not 0 < a.min_area <= a.max_area:
        raise ValueError("bad artifact spec")


def control_columns(n_cols: int) -> List[int]:
    step = math.ceil(n_cols / CONTROL_SEGMENTS)
    cols = list(range(0, n_cols, step))
    if cols[-1] != n_cols - 1:
        cols.append(n_cols - 1)
    return cols


def ground_truth_points(spec: SynthSpec) -> List[List[List[Tuple[float, float]]]]:
    cols = np.array(control_columns(spec.cols))
    off = spec.baseline.offset(cols, spec.cols)
    staves = []
    for top in staff_tops(spec):
        lines = []
        for i in range(4):
            rows = top + i * spec.line_spacing + off
            lines.append([(float(c), round(float(r), 3)) for c, r in zip(cols, rows)])
        staves.append(lines)
    return staves


def _blob(rng: np.random.Generator, area: int) -> np.ndarray:
    """Random rectangle or disc footprint of roughly ``area`` pixels."""
    if rng.random() < 0.5:
        r = max(1, int(round(math.sqrt(area / math.pi))))
        yy, xx = np.mgrid[-r : r + 1, -r : r + 1]
        return (yy * yy + xx * xx) <= r * r
    aspect = rng.uniform(0.25, 4.0)
    h = max(1, int(round(math.sqrt(area / aspect))))
    w = max(1, int(round(area / h)))
    return np.ones((h, w), dtype=bool)


def _place_artifacts(page: np.ndarray, occupied: np.ndarray, a: ArtifactSpec, rng: np.random.Generator) -> int:
    rows, cols = page.shape
    placed = 0
    attempts = 0
    c = a.clearance
    while placed < a.count and attempts < 50 * max(a.count, 1):
        attempts += 1
        area = int(rng.integers(a.min_area, a.max_area + 1))
        fp = _blob(rng, area)
        if fp.sum() > a.max_area:
            continue
        h, w = fp.shape
        if h + 2 * c >= rows or w + 2 * c >= cols:
            continue
        r0 = int(rng.integers(c, rows - h - c))
        c0 = int(rng.integers(c, cols - w - c))
        if occupied[r0 - c : r0 + h + c, c0 - c : c0 + w + c].any():
            continue
        page[r0 : r0 + h, c0 : c0 + w] |= fp
        occupied[r0 : r0 + h, c0 : c0 + w] = True
        placed += 1
    return placed


def generate_page(spec: SynthSpec):
    """Render a page; returns (binary raster, GT control points per staff/line)."""
    validate(spec)
    rng = np.random.default_rng(spec.seed)
    page = np.zeros((spec.rows, spec.cols), dtype=bool)
    gt = ground_truth_points(spec)
    cols = np.arange(spec.cols)
    # band rows [top, top + t) with top = round(y - (t - 1) / 2), so the ink's
    # vertical center is within half a pixel of the curve for even t as well;
    # draw_lines takes the row at offset t // 2 inside the band
    half = (spec.thickness - 1) / 2.0
    centers = [[round_curve(interp_spline(line, (0, spec.cols - 1)) - half) + spec.thickness // 2 for line in staff]
               for staff in gt]
    for staff in centers:
        for rows in staff:
            draw_lines(page, cols, rows, spec.thickness)
    occupied = page.copy()
    for g in spec.gaps:
        for i in g.lines:
            erase = np.zeros_like(page)
            sl = slice(g.start, g.stop)
            draw_lines(erase, cols[sl], centers[g.staff][i][sl], spec.thickness)
            page &= ~erase
    if spec.artifacts.count:
        # keep blobs clear of the staff bands, including erased gaps
        _place_artifacts(page, occupied, spec.artifacts, rng)
    return page, gt


def gt_document(spec: SynthSpec, gt) -> dict:
    return {
        "image": {"rows": spec.rows, "cols": spec.cols},
        "staves": [{"lines": [[[c, r] for c, r in line] for line in staff]} for staff in gt],
    }


def random_degradation(seed: int, n_staves: int, n_cols: int, max_gap: int = 200, min_gap: int = 40,
                       artifacts: int = 2000) -> Tuple[Tuple[Gap, ...], ArtifactSpec]:
    """Gaps on one to four lines of every staff plus sub-threshold blobs."""
    rng = np.random.default_rng([seed, 0x9A95])
    gaps = []
    for s in range(n_staves):
        for _ in range(int(rng.integers(1, 4))):
            k = int(rng.integers(1, 5))
            lines = tuple(sorted(rng.choice(4, size=k, replace=False).tolist()))
            width = int(rng.integers(min_gap, max_gap + 1))
            start = int(rng.integers(0, n_cols - width))
            gaps.append(Gap(s, lines, start, start + width))
    return tuple(gaps), ArtifactSpec(count=artifacts)


def clean_corpus_specs(n_pages: int = 20, seed: int = 0, **overrides) -> List[SynthSpec]:
    """Flat, sloped and sinusoidal pages in rotation, without degradation."""
    rng = np.random.default_rng([seed, 0xC1EA])
    specs = []
    for k in range(n_pages):
        kind = ("flat", "slope", "sinusoid")[k % 3]
        if kind == "flat":
            base = Baseline()
        elif kind == "slope":
            base = Baseline("slope", slope=float(rng.choice([-1, 1]) * rng.uniform(0.004, 0.012)))
        else:
            base = Baseline("sinusoid", amplitude=float(rng.uniform(5, 15)), period=float(rng.uniform(2500, 5000)),
                            phase=float(rng.uniform(0, 2 * math.pi)))
        spacing = int(rng.integers(52, 63))
        specs.append(SynthSpec(line_spacing=spacing, baseline=base, seed=seed * 1000 + k, **overrides))
    return specs


def degraded_corpus_specs(n_pages: int = 10, seed: int = 1, artifacts: int = 2000, **overrides) -> List[SynthSpec]:
    out = []
    for spec in clean_corpus_specs(n_pages, seed, **overrides):
        gaps, art = random_degradation(spec.seed, spec.n_staves, spec.cols, artifacts=artifacts)
        out.append(SynthSpec(**{**spec.__dict__, "gaps": gaps, "artifacts": art}))
    return out


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def generate_corpus(specs: Sequence[SynthSpec], out_dir, prefix: str = "page") -> dict:
    """Write ``<prefix>_NNN.png`` / ``.json`` pairs plus ``manifest.json``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    pages = []
    for k, spec in enumerate(specs):
        stem = f"{prefix}_{k:03d}"
        page, gt = generate_page(spec)
        png, js = out_dir / f"{stem}.png", out_dir / f"{stem}.json"
        save_binary_png(page, png)
        js.write_text(json.dumps(gt_document(spec, gt), indent=1))
        pages.append({
            "stem": stem,
            "image": png.name,
            "ground_truth": js.name,
            "seed": spec.seed,
            "spec_sha256": spec.digest(),
            "degradation": spec.degradation,
            "image_sha256": _sha256(png),
            "ground_truth_sha256": _sha256(js),
            "spec": spec.to_dict(),
        })
    manifest = {"pages": pages}
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=1))
    return manifest
