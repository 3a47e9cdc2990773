"""Blue (small-gain) and black (origin compound Jacobian) curves in the (d, b) plane.

    python scripts/thomas_curves.py --points 41 --workers 4 --out results/

Writes blue.csv, black.csv and curves.csv; plot with scripts/plot_curves.py.
"""
import argparse
import sys
from pathlib import Path

from sg2contract.cli import RunConfig, cmd_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--points", type=int, default=41)
    ap.add_argument("--lo", type=float, default=-1.0)
    ap.add_argument("--hi", type=float, default=1.0)
    ap.add_argument("--b-tol", type=float, default=1e-3)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", type=Path, default=Path("results"))
    args = ap.parse_args()
    cfg = RunConfig("sweep", d_grid=f"{args.lo}:{args.hi}:{args.points}", b_tol=args.b_tol,
                    workers=args.workers, out=args.out).validate()
    return cmd_sweep(cfg)


if __name__ == "__main__":
    sys.exit(main())
