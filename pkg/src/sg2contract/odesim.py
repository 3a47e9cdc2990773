"""Fixed-step RK4 simulation, trajectory classification and empirical L2 gains.

States may carry leading batch axes: ``x0`` of shape ``(k, n)`` integrates
``k`` independent trajectories in lock-step, which is how the sweeps get
their parallelism without a process pool.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.integrate import trapezoid

CONVERGED = "converged"
OSCILLATORY = "oscillatory"
UNDECIDED = "undecided"

SPEED_TOL = 1e-6
DRIFT_TOL = 1e-6
AMPLITUDE_TOL = 1e-3
TAIL_FRACTION = 0.1
SUSTAIN_RATIO = 0.9


class NonFiniteStateError(FloatingPointError):
    def __init__(self, t: float, step: int):
        self.t, self.step = t, step
        super().__init__(f"non-finite state at t={t:.6g} (step {step})")


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # (len(times), *state_shape)
    h: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError("step h must be positive")

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    @property
    def batched(self) -> bool:
        return self.states.ndim == 3

    def member(self, k: int) -> "Trajectory":
        """Trajectory ``k`` of a batched run."""
        meta = dict(self.meta)
        meta["member"] = k
        return Trajectory(self.times, self.states[:, k], self.h, meta)

    def to_csv(self, path) -> Path:
        """Write ``t, x1, ..., xn`` rows (single trajectory only)."""
        if self.states.ndim != 2:
            raise ValueError("to_csv expects an unbatched vector trajectory")
        path = Path(path)
        n = self.states.shape[1]
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t"] + [f"x{i + 1}" for i in range(n)])
            for t, x in zip(self.times, self.states):
                w.writerow([f"{t:.10g}"] + [f"{v:.12g}" for v in x])
        return path


def _skew(X):
    return 0.5 * (X - np.swapaxes(X, -1, -2))


def integrate(f: Callable, x0, h: float = 1e-3, T: float = 1.0, record_every: int = 1,
              time_dependent: bool = False, antisymmetrize: bool = False,
              meta: dict | None = None) -> Trajectory:
    """Classic RK4 with fixed step ``h`` up to ``T``.

    ``f(x)`` (or ``f(t, x)`` when ``time_dependent``) must accept any leading
    batch axes.  With ``antisymmetrize`` the state is a square matrix that is
    projected back onto skew matrices after every step.
    """
    if not h > 0:
        raise ValueError("step h must be positive")
    if not np.isfinite(T) or T < 0:
        raise ValueError("horizon T must be finite and nonnegative")
    steps = int(round(T / h))
    if abs(steps * h - T) > 1e-9 * max(1.0, T):
        raise ValueError(f"T={T} is not a multiple of h={h}")
    record_every = max(1, int(record_every))
    g = f if time_dependent else (lambda t, x: f(x))

    x = np.array(x0, dtype=float)
    if antisymmetrize:
        x = _skew(x)
    times = [0.0]
    states = [x.copy()]
    t = 0.0
    for s in range(1, steps + 1):
        k1 = g(t, x)
        k2 = g(t + 0.5 * h, x + 0.5 * h * k1)
        k3 = g(t + 0.5 * h, x + 0.5 * h * k2)
        k4 = g(t + h, x + h * k3)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if antisymmetrize:
            x = _skew(x)
        t = s * h
        if not np.all(np.isfinite(x)):
            raise NonFiniteStateError(t, s)
        if s % record_every == 0 or s == steps:
            times.append(t)
            states.append(x.copy())
    info = {"h": h, "T": T, "x0": np.asarray(x0, dtype=float).tolist()}
    info.update(meta or {})
    return Trajectory(np.array(times), np.array(states), h, info)


@dataclass
class Classification:
    kind: str
    equilibrium: np.ndarray | None
    tail_amplitude: float
    tail_speed: float
    drift: float

    def to_dict(self) -> dict:
        return {"kind": self.kind,
                "equilibrium": None if self.equilibrium is None else self.equilibrium.tolist(),
                "tail_amplitude": self.tail_amplitude,
                "tail_speed": self.tail_speed,
                "drift": self.drift}


def _tail(traj: Trajectory, fraction: float) -> np.ndarray:
    t_end = traj.times[-1]
    mask = traj.times >= t_end * (1.0 - fraction) - 1e-12
    return traj.states[mask]


def classify(traj: Trajectory, f: Callable, fraction: float = TAIL_FRACTION) -> Classification:
    """Label a single trajectory from the final ``fraction`` of its horizon.

    * converged: max speed ``|f(x)|`` and max distance to the final state
      both below 1e-6 over the tail
    * oscillatory: half peak-to-peak amplitude above 1e-3, and not decaying
      (the last half of the tail keeps 90% of the amplitude)
    * undecided: anything else
    """
    if traj.states.ndim != 2:
        raise ValueError("classify expects an unbatched trajectory; use classify_batch")
    tail = _tail(traj, fraction)
    speed = float(np.max(np.linalg.norm(f(tail), axis=-1)))
    drift = float(np.max(np.linalg.norm(tail - tail[-1], axis=-1)))
    amp = float(0.5 * np.max(np.ptp(tail, axis=0)))
    if speed < SPEED_TOL and drift < DRIFT_TOL:
        return Classification(CONVERGED, tail[-1].copy(), amp, speed, drift)
    if amp > AMPLITUDE_TOL:
        late = tail[len(tail) // 2:]
        late_amp = float(0.5 * np.max(np.ptp(late, axis=0)))
        if late_amp >= SUSTAIN_RATIO * amp:
            return Classification(OSCILLATORY, None, amp, speed, drift)
    return Classification(UNDECIDED, None, amp, speed, drift)


def classify_batch(traj: Trajectory, f: Callable, fraction: float = TAIL_FRACTION) -> list[Classification]:
    if traj.states.ndim == 2:
        return [classify(traj, f, fraction)]
    return [classify(traj.member(k), f, fraction) for k in range(traj.states.shape[1])]


def _as_path(M):
    if callable(M):
        return M
    M = np.asarray(M, dtype=float)
    return lambda t: M


def empirical_l2_gain(A_path, B_path, u: Callable, T: float, h: float = 1e-3) -> float:
    """``sqrt(int |delta|^2 / int |u|^2)`` for ``delta' = A delta + B u``, ``delta(0) = 0``.

    ``A_path``/``B_path`` are matrices or callables of ``t``.  Any valid L2
    gain bound is at least this ratio.
    """
    A, B = _as_path(A_path), _as_path(B_path)
    m = np.asarray(A(0.0)).shape[0]

    def rhs(t, x):
        return A(t) @ x + B(t) @ np.atleast_1d(u(t))

    traj = integrate(rhs, np.zeros(m), h=h, T=T, time_dependent=True)
    u_vals = np.array([np.atleast_1d(u(t)) for t in traj.times])
    u_energy = trapezoid(np.sum(u_vals ** 2, axis=-1), traj.times)
    if not u_energy > 1e-300:
        raise ValueError("input has zero energy")
    x_energy = trapezoid(np.sum(traj.states ** 2, axis=-1), traj.times)
    return float(np.sqrt(x_energy / u_energy))
