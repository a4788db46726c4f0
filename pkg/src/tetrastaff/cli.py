"""Command-line entry point: reconstruct, evaluate, synth, overlay.

Exit codes: 0 success, 2 usage or input error, 3 internal invariant failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import schema
from .config import Config, load_config
from .evaluation import combine_reports, evaluate_page, rasterize_ground_truth
from .morphology import otsu_binarize
from .raster import RasterFormatError, load_gray, render_overlay, save_binary_png, save_png, staff_mask
from .synth import SynthSpec, clean_corpus_specs, degraded_corpus_specs, generate_corpus
from .synth import validate as validate_spec
from .tracker import TrackingInvariantError, reconstruct_page

log = logging.getLogger("tetrastaff")

EXIT_OK, EXIT_INPUT, EXIT_INVARIANT = 0, 2, 3
IMAGE_SUFFIXES = (".png", ".pgm")


class InputError(Exception):
    pass


def _param_parent() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("pipeline parameters (flags > --config file > defaults)")
    g.add_argument("--config", type=Path, help="JSON file with {section: {field: value}} overrides")
    g.add_argument("--stripes", type=int, help="number of vertical search stripes (16)")
    g.add_argument("--ma-length", type=int, help="moving-average length for projections (11)")
    g.add_argument("--proj-threshold-frac", type=float, help="projection threshold as a fraction of stripe width (0.4)")
    g.add_argument("--sep-min", type=int, help="minimum line separation in px (20)")
    g.add_argument("--sep-max", type=int, help="maximum line separation in px (100)")
    g.add_argument("--spacing-tol", type=float, help="allowed relative spacing deviation (0.2)")
    g.add_argument("--min-area", type=int, help="area-opening threshold and closing disc area in px (500)")
    g.add_argument("--spline-p", type=float, help="smoothing weight p (1e-4)")
    g.add_argument("--seed-tile-width-frac", type=float, help="seed tile width as a fraction of line spacing (2/3)")
    g.add_argument("--seed-tile-height", type=int, help="seed tile height in px (3)")
    g.add_argument("--slope-window-frac", type=float, help="slope window as a fraction of line spacing (0.5)")
    g.add_argument("--search-halfwidth-frac", type=float, help="max per-column jump as a fraction of spacing (0.25)")
    g.add_argument("--removal-margin-frac", type=float, help="removal stripe margin as a fraction of spacing (0.5)")
    g.add_argument("--vertical-tol", type=int, help="evaluation tolerance in px (default: rounded mean thickness)")
    g.add_argument("--jobs", type=int, default=1, help="pages processed in parallel in batch mode")
    g.add_argument("-v", "--verbose", action="count", default=0)
    return p


def build_parser() -> argparse.ArgumentParser:
    parent = _param_parent()
    parser = argparse.ArgumentParser(prog="tetrastaff", description="Tetragram staff-line reconstruction")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("reconstruct", parents=[parent], help="reconstruct staves of a page or a directory of pages")
    p.add_argument("input", type=Path, help="PNG/PGM page, or a directory of pages")
    p.add_argument("output", type=Path, help="output directory")
    p.add_argument("--no-images", action="store_true", help="write staves.json only")

    p = sub.add_parser("evaluate", parents=[parent], help="score reconstructed staves against ground truth")
    p.add_argument("staves", type=Path, nargs="?", help="staves.json")
    p.add_argument("gt", type=Path, nargs="?", help="gt.json")
    p.add_argument("image", type=Path, nargs="?", help="binary staff image")
    p.add_argument("-o", "--out", type=Path, required=True, help="output directory")
    p.add_argument("--recon-dir", type=Path, help="batch mode: directory of <stem>/staves.json")
    p.add_argument("--corpus-dir", type=Path, help="batch mode: directory of <stem>.png and <stem>.json")

    p = sub.add_parser("synth", parents=[parent], help="generate a synthetic corpus")
    p.add_argument("spec", type=Path, help="corpus spec JSON")
    p.add_argument("output", type=Path, help="output directory")
    p.add_argument("--seed", type=int, help="base seed overriding the seeds in the corpus spec")

    p = sub.add_parser("overlay", parents=[parent], help="draw staves.json over an image")
    p.add_argument("image", type=Path)
    p.add_argument("staves", type=Path)
    p.add_argument("out", type=Path, help="output PNG")
    p.add_argument("--thickness", type=int, help="line thickness (default: each staff's estimate)")
    return parser


def _config(args) -> Config:
    flags = {k: v for k, v in vars(args).items() if v is not None}
    try:
        return load_config(args.config, flags)
    except FileNotFoundError as exc:
        raise InputError(f"config file not found: {exc.filename}") from exc
    except (ValueError, TypeError) as exc:
        raise InputError(f"bad configuration: {exc}") from exc


def _page_files(directory: Path) -> List[Path]:
    return sorted(p for p in directory.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES and p.is_file())


def reconstruct_file(path: Path, out_dir: Path, config: Config, images: bool = True) -> int:
    """Run the pipeline on one page and write its outputs; returns the staff count."""
    gray = load_gray(path)
    staves = reconstruct_page(gray, config.preprocess, config.search, config.tracker, config.smoothing)
    out_dir.mkdir(parents=True, exist_ok=True)
    schema.dump(schema.staves_document(staves, gray.shape, config.to_dict()), out_dir / "staves.json")
    if images:
        save_binary_png(staff_mask(gray.shape, staves), out_dir / "staff_image.png")
        save_png(render_overlay(gray, staves), out_dir / "overlay.png")
    return len(staves)


def _reconstruct_job(job):
    path, out_dir, config, images = job
    return path.name, reconstruct_file(path, out_dir, config, images)


def _run_jobs(fn, jobs: list, workers: int):
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        return list(pool.map(fn, jobs))


def cmd_reconstruct(args) -> int:
    config = _config(args)
    if args.input.is_dir():
        pages = _page_files(args.input)
        if not pages:
            raise InputError(f"no PNG/PGM pages in {args.input}")
        jobs = [(p, args.output / p.stem, config, not args.no_images) for p in pages]
        for name, n in _run_jobs(_reconstruct_job, jobs, args.jobs):
            print(f"{name}: {n} staves")
        return EXIT_OK
    if not args.input.is_file():
        raise InputError(f"input not found: {args.input}")
    n = reconstruct_file(args.input, args.output, config, not args.no_images)
    print(f"{args.input.name}: {n} staves")
    return EXIT_OK


def _load_binary(path: Path) -> np.ndarray:
    return otsu_binarize(load_gray(path))


def evaluate_files(staves_path: Path, gt_path: Path, image_path: Path, config: Config):
    for p in (staves_path, gt_path, image_path):
        if not p.is_file():
            raise InputError(f"input not found: {p}")
    shape, staves = schema.parse_staves(schema.read_json(staves_path))
    gt_shape, gt_points = schema.parse_ground_truth(schema.read_json(gt_path))
    binary = _load_binary(image_path)
    if tuple(binary.shape) != tuple(shape):
        raise InputError(f"image {binary.shape} does not match staves.json dims {shape}")
    if gt_shape is not None and tuple(gt_shape) != tuple(shape):
        raise InputError(f"gt.json dims {gt_shape} do not match staves.json dims {shape}")
    gt = rasterize_ground_truth(gt_points, binary.shape)
    return evaluate_page(staves, gt, binary, config.evaluation.vertical_tol)


def write_report(report, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.json").write_text(json.dumps(report.to_dict(), indent=1, sort_keys=True) + "\n")
    lines = ["offset,count"] + [f"{k},{v}" for k, v in sorted(report.separation_histogram.items())]
    (out_dir / "sep_hist.csv").write_text("\n".join(lines) + "\n")


def _evaluate_job(job):
    stem, staves_path, gt_path, image_path, out_dir, config = job
    report = evaluate_files(staves_path, gt_path, image_path, config)
    write_report(report, out_dir)
    return stem, report


def cmd_evaluate(args) -> int:
    config = _config(args)
    if args.recon_dir or args.corpus_dir:
        if not (args.recon_dir and args.corpus_dir) or args.staves:
            raise InputError("batch mode needs --recon-dir and --corpus-dir and no positional inputs")
        pages = [p for p in _page_files(args.corpus_dir) if p.with_suffix(".json").is_file()]
        if not pages:
            raise InputError(f"no <page>.png + <page>.json pairs in {args.corpus_dir}")
        jobs = [(p.stem, args.recon_dir / p.stem / "staves.json", p.with_suffix(".json"), p,
                 args.out / p.stem, config) for p in pages]
        results = _run_jobs(_evaluate_job, jobs, args.jobs)
        total = combine_reports([r for _, r in results])
        write_report(total, args.out)
        for stem, r in results:
            pct = r.percentages() or {}
            print(f"{stem}: correct {pct.get('correct_reconstructed', float('nan')):.2f}%")
        print(total.table())
        return EXIT_OK
    if not (args.staves and args.gt and args.image):
        raise InputError("evaluate needs STAVES GT IMAGE (or --recon-dir/--corpus-dir)")
    report = evaluate_files(args.staves, args.gt, args.image, config)
    write_report(report, args.out)
    print(report.table())
    return EXIT_OK


def load_corpus_spec(path: Path, seed: Optional[int] = None) -> List[SynthSpec]:
    """Corpus spec: a list of page specs, or {"defaults": {...}, "pages": [...]},
    or a preset {"preset": "clean"|"degraded", "pages": N, "seed": S, "overrides": {...}}."""
    data = schema.read_json(path)
    if isinstance(data, dict) and "preset" in data:
        n = int(data.get("pages", 20))
        base = seed if seed is not None else int(data.get("seed", 0))
        overrides = data.get("overrides", {})
        if data["preset"] == "clean":
            return clean_corpus_specs(n, base, **overrides)
        if data["preset"] == "degraded":
            return degraded_corpus_specs(n, base, artifacts=int(data.get("artifacts", 2000)), **overrides)
        raise schema.SchemaError(f"unknown preset {data['preset']!r}", "preset")
    if isinstance(data, list):
        defaults, pages = {}, data
    elif isinstance(data, dict) and isinstance(data.get("pages"), list):
        defaults, pages = data.get("defaults", {}), data["pages"]
    else:
        raise schema.SchemaError("expected a list of page specs or an object with 'pages'")
    specs = []
    for k, page in enumerate(pages):
        if not isinstance(page, dict):
            raise schema.SchemaError("page spec must be an object", f"pages[{k}]")
        try:
            spec = SynthSpec.from_dict({**defaults, **page})
        except (TypeError, ValueError, KeyError) as exc:
            raise schema.SchemaError(str(exc), f"pages[{k}]") from exc
        if seed is not None:
            spec = SynthSpec.from_dict({**spec.to_dict(), "seed": seed + k})
        try:
            validate_spec(spec)
        except ValueError as exc:
            raise schema.SchemaError(str(exc), f"pages[{k}]") from exc
        specs.append(spec)
    return specs


def cmd_synth(args) -> int:
    if not args.spec.is_file():
        raise InputError(f"spec not found: {args.spec}")
    specs = load_corpus_spec(args.spec, args.seed)
    manifest = generate_corpus(specs, args.output)
    print(f"wrote {len(manifest['pages'])} pages to {args.output}")
    return EXIT_OK


def cmd_overlay(args) -> int:
    for p in (args.image, args.staves):
        if not p.is_file():
            raise InputError(f"input not found: {p}")
    gray = load_gray(args.image)
    shape, staves = schema.parse_staves(schema.read_json(args.staves))
    if tuple(shape) != tuple(gray.shape):
        raise InputError(f"image {gray.shape} does not match staves.json dims {shape}")
    args.out.parent.mkdir(parents=True, exist_ok=True)
    save_png(render_overlay(gray, staves, args.thickness), args.out)
    return EXIT_OK


COMMANDS = {"reconstruct": cmd_reconstruct, "evaluate": cmd_evaluate, "synth": cmd_synth, "overlay": cmd_overlay}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (InputError, schema.SchemaError, RasterFormatError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except TrackingInvariantError as exc:
        print(f"internal invariant failure: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
