"""Effect of the smoothing weight p on a saw-tooth, a single outlier and a slow bend.

    python3 scripts/smoothing_sweep.py
"""

import argparse

import numpy as np

from tetrastaff.spline import round_curve, smooth_curve


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=400)
    ap.add_argument("--p", type=float, nargs="*", default=[1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6])
    args = ap.parse_args()

    m = np.arange(args.n)
    saw = np.where(m % 2, 11.0, 10.0)
    spike = np.full(args.n, 50.0)
    spike[args.n // 2] += 20
    bend = 100 + 8 * np.sin(2 * np.pi * m / args.n)
    inner = slice(args.n // 10, -args.n // 10)

    print(f"{'p':>8}  {'saw dev':>9}  {'saw rounds':>10}  {'spike peak':>10}  {'bend err':>9}")
    for p in args.p:
        s = smooth_curve(saw, p)
        rounded = len(set(round_curve(s[inner]).tolist()))
        peak = smooth_curve(spike, p)[args.n // 2] - 50
        bend_err = np.max(np.abs(smooth_curve(bend, p) - bend)[inner])
        print(f"{p:8.0e}  {np.max(np.abs(s[inner] - 10.5)):9.2e}  {rounded:10d}  {peak:10.3f}  {bend_err:9.3f}")


if __name__ == "__main__":
    main()
