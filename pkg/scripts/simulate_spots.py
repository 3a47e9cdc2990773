"""Trajectories of the coupled ring at a few (b, d) spot values.

For each (b, d) pair, 20 seeded initial conditions are drawn from the
invariant box, integrated to T=500 and labelled.  The (x1, x2, x3)
projections go to CSV; with --plot a PNG per pair is written as well.
"""
import argparse
import csv
import json
from pathlib import Path

from sg2contract.thomas import ThomasParams, simulate

CASES = [(0.4, 0.6), (0.3, 0.6), (0.4, -0.6), (0.3, -0.6)]


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--out", type=Path, default=Path("results/sims"))
    ap.add_argument("--n", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--horizon", type=float, default=500.0)
    ap.add_argument("--plot", action="store_true")
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    summary = {}
    for b, d in CASES:
        traj, labels = simulate(ThomasParams(b, d), n_traj=args.n, seed=args.seed, T=args.horizon)
        tag = f"b{b:g}_d{d:g}"
        with (args.out / f"proj_{tag}.csv").open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["traj", "t", "x1", "x2", "x3"])
            for k in range(traj.states.shape[1]):
                for t, x in zip(traj.times, traj.states[:, k]):
                    w.writerow([k, f"{t:.6g}", f"{x[0]:.8g}", f"{x[1]:.8g}", f"{x[2]:.8g}"])
        kinds = [c.kind for c in labels]
        summary[tag] = {k: kinds.count(k) for k in sorted(set(kinds))}
        print(f"b={b:g} d={d:+g}: {summary[tag]}")
        if args.plot:
            plot(traj, labels, args.out / f"proj_{tag}.png", f"b = {b:g}, d = {d:g}")
    (args.out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")


def plot(traj, labels, path, title):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig = plt.figure(figsize=(5, 5))
    ax = fig.add_subplot(projection="3d")
    for k, c in enumerate(labels):
        x = traj.states[:, k]
        ax.plot(x[:, 0], x[:, 1], x[:, 2], lw=0.6)
        ax.scatter(*x[0, :3], marker="x", color="k", s=12)
    ax.set_xlabel("x1")
    ax.set_ylabel("x2")
    ax.set_zlabel("x3")
    ax.set_title(title)
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)


if __name__ == "__main__":
    main()
