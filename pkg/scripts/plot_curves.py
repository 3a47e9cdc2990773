"""Plot curves.csv from a sweep: blue small-gain boundary over the black necessary-condition curve."""
import argparse
import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def read(path):
    rows = list(csv.DictReader(Path(path).open()))

    def col(name):
        return [float(r[name]) if r[name] else float("nan") for r in rows]

    return col("d"), col("b_blue"), col("b_black")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("curves", nargs="?", default="results/curves.csv")
    ap.add_argument("--out", default="results/curves.png")
    args = ap.parse_args()
    d, blue, black = read(args.curves)
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.plot(d, blue, color="tab:blue", label="small-gain certificate")
    ax.plot(d, black, color="k", label="compound Jacobian at 0")
    ax.set_xlabel("d")
    ax.set_ylabel("b")
    ax.legend()
    fig.savefig(args.out, dpi=150, bbox_inches="tight")
    print(args.out)


if __name__ == "__main__":
    main()
