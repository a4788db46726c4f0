"""Reconstruct and score a synthetic corpus, printing a percentage summary.

    python3 scripts/synthetic_benchmark.py --pages 5
    python3 scripts/synthetic_benchmark.py --pages 10 --degraded --json out.json
"""

import argparse
import json
import time

import numpy as np

from tetrastaff.evaluation import combine_reports, evaluate_page, rasterize_ground_truth
from tetrastaff.morphology import otsu_binarize
from tetrastaff.synth import clean_corpus_specs, degraded_corpus_specs, generate_page
from tetrastaff.tracker import reconstruct_page


def run(specs):
    reports, rows = [], []
    for k, spec in enumerate(specs):
        page, gt_points = generate_page(spec)
        gray = np.where(page, 255, 0).astype(np.uint8)
        t0 = time.perf_counter()
        staves = reconstruct_page(gray)
        dt = time.perf_counter() - t0
        rep = evaluate_page(staves, rasterize_ground_truth(gt_points, gray.shape), otsu_binarize(gray))
        reports.append(rep)
        pct = rep.percentages()
        rows.append({"page": k, "baseline": spec.baseline.kind, "degradation": spec.degradation,
                     "staves": len(staves), "seconds": round(dt, 3),
                     "correct": round(pct["correct_reconstructed"], 3), "near1": round(rep.near_fraction(1), 4)})
        print(f"page {k:3d} {spec.baseline.kind:<8} staves {len(staves):2d}  {dt:5.2f} s  "
              f"correct {pct['correct_reconstructed']:7.3f}%  |d|<=1 {100 * rep.near_fraction(1):6.2f}%")
    return rows, combine_reports(reports)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--pages", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--degraded", action="store_true", help="add gaps and 2000 small blobs per page")
    ap.add_argument("--artifacts", type=int, default=2000)
    ap.add_argument("--rows", type=int, help="override page height (default full resolution)")
    ap.add_argument("--cols", type=int, help="override page width")
    ap.add_argument("--staves", type=int, help="staves per page (default 10; lower it for small pages)")
    ap.add_argument("--json", help="write per-page rows and the combined report here")
    args = ap.parse_args()

    overrides = {k: v for k, v in (("rows", args.rows), ("cols", args.cols), ("n_staves", args.staves)) if v is not None}
    if args.degraded:
        specs = degraded_corpus_specs(args.pages, args.seed, artifacts=args.artifacts, **overrides)
    else:
        specs = clean_corpus_specs(args.pages, args.seed, **overrides)
    rows, total = run(specs)
    print()
    print(total.table())
    print(f"matched pixels with |drow| <= 1: {100 * total.near_fraction(1):.2f}%")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump({"pages": rows, "total": total.to_dict()}, fh, indent=1)


if __name__ == "__main__":
    main()
