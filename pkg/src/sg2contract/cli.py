"""Command-line front end.

    sg2contract certify  --model thomas --b 1.2 --d 0
    sg2contract certify  --model path/to/model.json
    sg2contract sweep    --d-grid -1:1:41 --out curves/
    sg2contract simulate --b 0.4 --d 0.6 --seed 0 --horizon 500

Exit codes: 0 certified (or command succeeded), 1 not certified,
2 indeterminate or error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import thomas
from .gains import InterconnectionModel, ModelError
from .odesim import NonFiniteStateError
from .smallgain import certify_model

EXIT_OK = 0
EXIT_NOT_CERTIFIED = 1
EXIT_ERROR = 2

log = logging.getLogger("sg2contract")


class ConfigError(ValueError):
    pass


def parse_grid(text: str) -> np.ndarray:
    """``lo:hi:n`` -> ``n`` evenly spaced points (a bare number is a one-point grid)."""
    parts = text.split(":")
    try:
        if len(parts) == 1:
            return np.array([float(parts[0])])
        lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
    except (ValueError, IndexError) as exc:
        raise ConfigError(f"bad grid {text!r}; expected lo:hi:n") from exc
    if len(parts) != 3:
        raise ConfigError(f"bad grid {text!r}; expected lo:hi:n")
    if n < 1:
        raise ConfigError("grid must contain at least one point")
    return np.linspace(lo, hi, n)


@dataclass
class RunConfig:
    command: str
    model: str = "thomas"
    b: float | None = None
    d: float | None = None
    d_grid: str = "-1:1:41"
    b_tol: float = 1e-3
    gain_tol: float = 1e-3
    out: Path = Path("out")
    workers: int = 1
    seed: int = 0
    horizon: float = thomas.SIM_HORIZON
    n_traj: int = 20
    step: float = thomas.SIM_STEP

    def validate(self):
        if self.b_tol <= 0 or self.gain_tol <= 0 or self.step <= 0:
            raise ConfigError("tolerances and step must be positive")
        if self.horizon <= 0:
            raise ConfigError("horizon must be positive")
        if self.workers < 1 or self.n_traj < 1:
            raise ConfigError("workers and trajectory count must be >= 1")
        if self.command in ("certify", "simulate") and self.model == "thomas":
            if self.b is None or self.d is None:
                raise ConfigError("thomas runs need --b and --d")
        if self.command == "sweep":
            if self.model != "thomas":
                raise ConfigError("sweep is defined for the built-in thomas model only")
            if len(self.grid()) == 0:
                raise ConfigError("empty d grid")
        if self.command == "simulate" and self.model != "thomas":
            raise ConfigError("simulate is defined for the built-in thomas model only")
        return self

    def grid(self) -> np.ndarray:
        return parse_grid(self.d_grid)


def _write_json(path: Path, data) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
    return path


def _fmt(x) -> str:
    return "" if x is None else f"{x:.10g}"


def cmd_certify(cfg: RunConfig) -> int:
    if cfg.model == "thomas":
        params = thomas.ThomasParams(cfg.b, cfg.d)
        report = thomas.certify(params, tol=cfg.gain_tol, workers=cfg.workers)
        name = f"certify_b{cfg.b:g}_d{cfg.d:g}.json"
    else:
        model = InterconnectionModel.from_json(cfg.model)
        report = certify_model(model, tol=cfg.gain_tol, workers=cfg.workers)
        name = f"certify_{model.name}.json"
    path = _write_json(cfg.out / name, report.to_dict())
    print(f"{report.verdict}: rho = {report.rho:.6g}  ({path})")
    for line in report.diagnostics:
        print(f"  {line}")
    if report.verdict == "certified":
        return EXIT_OK
    if report.verdict == "not_certified":
        return EXIT_NOT_CERTIFIED
    return EXIT_ERROR


def _blue_point(args):
    d, b_tol, gain_tol = args
    warnings.simplefilter("ignore")
    return thomas.blue_curve([d], b_tol=b_tol, tol=gain_tol)[0]


def _write_curve(path: Path, points) -> Path:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["d", "b"])
        for p in points:
            w.writerow([_fmt(p.d), _fmt(p.b)])
    return path


def cmd_sweep(cfg: RunConfig) -> int:
    grid = [float(d) for d in cfg.grid()]
    jobs = [(d, cfg.b_tol, cfg.gain_tol) for d in grid]
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            blue = list(pool.map(_blue_point, jobs))
    else:
        blue = [_blue_point(j) for j in jobs]
    black = thomas.black_curve(grid)
    cfg.out.mkdir(parents=True, exist_ok=True)
    _write_curve(cfg.out / "blue.csv", blue)
    _write_curve(cfg.out / "black.csv", black)
    with (cfg.out / "curves.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["d", "b_blue", "b_black", "blue_flags", "black_flags"])
        for pb, pk in zip(blue, black):
            w.writerow([_fmt(pb.d), _fmt(pb.b), _fmt(pk.b), "; ".join(pb.flags), "; ".join(pk.flags)])
    for pb, pk in zip(blue, black):
        print(f"d={pb.d:+.4f}  blue b={_fmt(pb.b) or '-':>12}  black b={_fmt(pk.b) or '-':>12}")
    return EXIT_OK


def cmd_simulate(cfg: RunConfig) -> int:
    params = thomas.ThomasParams(cfg.b, cfg.d)
    traj, labels = thomas.simulate(params, n_traj=cfg.n_traj, seed=cfg.seed, T=cfg.horizon,
                                   h=cfg.step)
    tag = f"b{cfg.b:g}_d{cfg.d:g}_s{cfg.seed}"
    outdir = cfg.out / f"sim_{tag}"
    outdir.mkdir(parents=True, exist_ok=True)
    for k in range(traj.states.shape[1]):
        traj.member(k).to_csv(outdir / f"traj_{k:03d}.csv")
    counts = {}
    for c in labels:
        counts[c.kind] = counts.get(c.kind, 0) + 1
    summary = {"b": cfg.b, "d": cfg.d, "a": params.a, "seed": cfg.seed, "horizon": cfg.horizon,
               "step": cfg.step, "counts": counts,
               "trajectories": [dict(c.to_dict(), index=k, x0=traj.states[0, k].tolist())
                                for k, c in enumerate(labels)]}
    _write_json(outdir / "summary.json", summary)
    print(", ".join(f"{k}: {v}" for k, v in sorted(counts.items())) + f"  ({outdir})")
    return EXIT_OK


COMMANDS = {"certify": cmd_certify, "sweep": cmd_sweep, "simulate": cmd_simulate}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sg2contract", description=__doc__.split("\n\n")[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--model", default="thomas", help="'thomas' or a model.json path")
    common.add_argument("--out", type=Path, default=Path("out"))
    common.add_argument("--workers", type=int, default=1)
    common.add_argument("--gain-tol", type=float, default=1e-3)

    c = sub.add_parser("certify", parents=[common], help="certify one model / parameter point")
    c.add_argument("--b", type=float)
    c.add_argument("--d", type=float)

    s = sub.add_parser("sweep", parents=[common], help="blue and black (d, b) curves")
    s.add_argument("--d-grid", default="-1:1:41")
    s.add_argument("--b-tol", type=float, default=1e-3)

    m = sub.add_parser("simulate", parents=[common], help="seeded trajectories and labels")
    m.add_argument("--b", type=float)
    m.add_argument("--d", type=float)
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--horizon", type=float, default=thomas.SIM_HORIZON)
    m.add_argument("--n", dest="n_traj", type=int, default=20)
    m.add_argument("--step", type=float, default=thomas.SIM_STEP)
    return ap


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    fields = RunConfig.__dataclass_fields__
    kw = {k: v for k, v in vars(ns).items() if k in fields}
    return RunConfig(**kw).validate()


def _join_grid_value(argv: list[str]) -> list[str]:
    """Rewrite ``--d-grid -1:1:41`` as ``--d-grid=-1:1:41`` so a leading minus
    is not mistaken for an option."""
    out = []
    it = iter(argv)
    for arg in it:
        if arg == "--d-grid":
            arg = f"--d-grid={next(it, '')}"
        out.append(arg)
    return out


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    ns = build_parser().parse_args(_join_grid_value(argv))
    logging.basicConfig(level=logging.DEBUG if ns.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(ns)
        return COMMANDS[cfg.command](cfg)
    except (ConfigError, ModelError, thomas.ParameterError, NonFiniteStateError,
            OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
