"""Gain matrices, the spectral-radius test and certification reports.

Pairs ``i < j`` are indexed lexicographically: (0,1), (0,2), ..., (N-2,N-1).
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from scipy.sparse.csgraph import connected_components

from .gains import (
    GainTable,
    InterconnectionModel,
    compute_gain_table,
)
from .sdp import IndeterminateError

EPS_RHO = 1e-9


class InfiniteGainError(ValueError):
    def __init__(self, channels):
        self.channels = list(channels)
        super().__init__("infinite gain on " + ", ".join(self.channels))


def pair_list(N: int) -> list[tuple[int, int]]:
    return list(combinations(range(N), 2))


@dataclass
class GainMatrices:
    Gamma: np.ndarray
    Delta: np.ndarray
    Upsilon: np.ndarray
    pairs: list

    @property
    def composite(self) -> np.ndarray:
        return composite(self.Delta, self.Upsilon, self.Gamma)

    @property
    def loop(self) -> np.ndarray:
        return self.Upsilon @ self.Delta + self.Gamma


def _other(pair, shared):
    a, b = pair
    return b if a == shared else a


def assemble(table: GainTable, R_ij: dict | None = None, R_i: dict | None = None,
             allow_partial: bool = False) -> GainMatrices:
    """Build ``Gamma``, ``Delta``, ``Upsilon`` with entries ``R * gain^2``.

    Missing channels count as zero gain (used for lower bounds on the loop
    gain while a table is still being filled).
    """
    R_ij = table.R_ij if R_ij is None else R_ij
    R_i = table.R_i if R_i is None else R_i
    bad = [c.label() for c in table.infinite_channels()]
    if bad and not allow_partial:
        raise InfiniteGainError(bad)
    N = table.N
    pairs = pair_list(N)
    P = len(pairs)
    Gamma = np.zeros((P, P))
    Delta = np.zeros((N, P))
    Upsilon = np.zeros((P, N))

    def sq(g):
        return g * g if np.isfinite(g) else 0.0

    for r, (i, j) in enumerate(pairs):
        for c, (l, m) in enumerate(pairs):
            if (i, j) == (l, m):
                continue
            shared = {i, j} & {l, m}
            if not shared:
                continue
            assert len(shared) == 1
            if i in (l, m):
                k = _other((l, m), i)
                Gamma[r, c] = R_ij.get((i, j), 0) * sq(table.gamma_ki(i, j, k))
            else:
                k = _other((l, m), j)
                Gamma[r, c] = R_ij.get((i, j), 0) * sq(table.gamma_kj(i, j, k))
        Upsilon[r, i] = R_ij.get((i, j), 0) * sq(table.eta1(i, j))
        Upsilon[r, j] = R_ij.get((i, j), 0) * sq(table.eta2(i, j))
    for i in range(N):
        for c, (l, m) in enumerate(pairs):
            if l == i:
                Delta[i, c] = R_i.get(i, 0) * sq(table.delta(i, m))
            elif m == i:
                Delta[i, c] = R_i.get(i, 0) * sq(table.delta(i, l))
    return GainMatrices(Gamma, Delta, Upsilon, pairs)


def composite(Delta, Upsilon, Gamma) -> np.ndarray:
    """``G = [[0, Delta], [Upsilon, Gamma]]``."""
    N = Delta.shape[0]
    return np.block([[np.zeros((N, N)), Delta], [Upsilon, Gamma]])


def power_iteration(M, iters: int = 20000, tol: float = 1e-13, seed: int = 0) -> float:
    """Perron root of a nonnegative irreducible matrix.

    Iterates on ``(I + M)`` so periodic (imprimitive) matrices converge too.
    """
    M = np.asarray(M, dtype=float)
    n = M.shape[0]
    S = np.eye(n) + M
    x = np.random.default_rng(seed).random(n) + 1.0
    x /= x.sum()
    lam = 0.0
    for _ in range(iters):
        y = S @ x
        lam_new = y.sum() / x.sum()
        x = y / y.sum()
        if abs(lam_new - lam) <= tol * max(1.0, lam_new):
            lam = lam_new
            break
        lam = lam_new
    return lam - 1.0


def is_irreducible(M) -> bool:
    M = np.asarray(M)
    if M.shape[0] == 1:
        return True
    ncomp, _ = connected_components(M > 0, directed=True, connection="strong")
    return ncomp == 1


def spectral_radius(M, check: bool = False) -> float:
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        return 0.0
    if np.any(M < 0):
        raise ValueError("spectral_radius expects a nonnegative matrix")
    rho = float(np.max(np.abs(np.linalg.eigvals(M))))
    if check and is_irreducible(M):
        alt = power_iteration(M)
        if abs(alt - rho) > 1e-6 * max(1.0, rho):
            raise ArithmeticError(f"eigensolver {rho} vs power iteration {alt}")
    return rho


def equivalence_check(Delta, Upsilon, Gamma) -> tuple[bool, bool, bool]:
    """The three equivalent small-gain conditions.

    1. rho(Upsilon Delta + Gamma) < 1
    2. rho(G) < 1 for the composite G
    3. rho(Gamma) < 1 and rho(Delta (I - Gamma)^-1 Upsilon) < 1
    """
    Delta, Upsilon, Gamma = (np.asarray(x, dtype=float) for x in (Delta, Upsilon, Gamma))
    c1 = spectral_radius(Upsilon @ Delta + Gamma) < 1
    c2 = spectral_radius(composite(Delta, Upsilon, Gamma)) < 1
    c3 = False
    if spectral_radius(Gamma) < 1:
        inner = Delta @ np.linalg.solve(np.eye(len(Gamma)) - Gamma, Upsilon)
        c3 = spectral_radius(np.clip(inner, 0.0, None)) < 1
    return c1, c2, c3


@dataclass
class CertificationReport:
    verdict: str  # "certified" | "not_certified" | "indeterminate"
    rho: float
    rho_composite: float
    matrices: GainMatrices | None
    table: GainTable | None
    diagnostics: list = field(default_factory=list)
    seconds: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def certified(self) -> bool:
        return self.verdict == "certified"

    def to_dict(self) -> dict:
        out = {"verdict": self.verdict,
               "rho": _num(self.rho),
               "rho_composite": _num(self.rho_composite),
               "diagnostics": list(self.diagnostics),
               "meta": self.meta}
        if self.table is not None:
            out["checksum"] = self.table.checksum
            out["complete"] = self.table.complete
            out["R_ij"] = {f"{i + 1},{j + 1}": r for (i, j), r in sorted(self.table.R_ij.items())}
            out["R_i"] = {str(i + 1): r for i, r in sorted(self.table.R_i.items())}
            out["channels"] = [
                {"channel": c.label(), "gain": _num(c.gain), "gain_lo": _num(c.gain_lo),
                 "structural_zero": c.structural_zero, "vertices": c.n_vertices,
                 "margin": _num(c.margin)}
                for _, c in sorted(self.table.channels.items())]
        if self.matrices is not None:
            out["pairs"] = [[i + 1, j + 1] for i, j in self.matrices.pairs]
            out["Gamma"] = self.matrices.Gamma.tolist()
            out["Delta"] = self.matrices.Delta.tolist()
            out["Upsilon"] = self.matrices.Upsilon.tolist()
        return out

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, **kw)


def _num(x):
    x = float(x)
    if np.isnan(x):
        return None
    if np.isinf(x):
        return "inf"
    return x


def _lower_bound_exceeded(table: GainTable) -> bool:
    if table.infinite_channels():
        return True
    mats = assemble(table, allow_partial=True)
    return spectral_radius(mats.loop) >= 1 - EPS_RHO


def certify_model(model: InterconnectionModel, tol: float = 1e-3, method: str = "direct",
                  workers: int = 1, fail_fast: bool = False) -> CertificationReport:
    """Gain table -> gain matrices -> spectral-radius verdict.

    With ``fail_fast`` the table is filled sequentially and abandoned as soon
    as an infinite gain appears or the partial loop gain (missing channels at
    zero, a lower bound by monotonicity) already reaches one.
    """
    t0 = time.perf_counter()
    try:
        table = compute_gain_table(model, tol=tol, method=method,
                                   workers=1 if fail_fast else workers,
                                   stop_when=_lower_bound_exceeded if fail_fast else None)
    except IndeterminateError as exc:
        return CertificationReport("indeterminate", float("nan"), float("nan"), None, None,
                                   [f"solver: {exc}"], time.perf_counter() - t0)
    diags = [f"{c.label()}: gain not certified (LMIs infeasible up to GAMMA_MAX)"
             for c in table.infinite_channels()]
    mats = assemble(table, allow_partial=True)
    rho = spectral_radius(mats.loop)
    rho_g = spectral_radius(mats.composite)
    if not table.complete:
        diags.append("stopped early: partial gains already violate the small-gain condition")
    ok = table.complete and not diags and rho < 1 - EPS_RHO
    if table.complete and not table.infinite_channels() and not ok:
        diags.append(f"rho(Upsilon Delta + Gamma) = {rho:.6g} >= 1")
    return CertificationReport("certified" if ok else "not_certified", rho, rho_g,
                               mats, table, diags, time.perf_counter() - t0,
                               {"model": model.name, "checksum": model.checksum()})
