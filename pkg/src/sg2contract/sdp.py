"""L2-gain LMIs over matrix polytopes.

For vertices ``(A_q, B_q)`` a value ``gamma`` upper-bounds the L2 gain from
``u`` to ``delta`` of ``delta' = A(t) delta + B(t) u`` if some ``P = P^T > 0``
satisfies, at every vertex,

    [[A_q^T P + P A_q + I, P B_q],
     [B_q^T P,            -gamma^2 I]]  <=  0.

Acceptance of a certificate never relies on solver status: every returned
``P`` is re-checked vertex by vertex with a symmetric eigensolver.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from cvxopt import matrix, solvers

log = logging.getLogger(__name__)

GAMMA_MAX = 1e6
EPS_FEAS = 1e-7
EPS_P = 1e-9

# solver-side bounds on P; verification only uses EPS_P
_P_FLOOR = 1e-8
_P_TRACE_CAP = 1e8


class IndeterminateError(RuntimeError):
    """The conic solver neither produced a verified certificate nor a clean verdict."""


@dataclass
class ChannelLmiProblem:
    A: list
    B: list
    gamma2: float | None = None

    def __post_init__(self):
        self.A = [np.atleast_2d(np.asarray(a, dtype=float)) for a in self.A]
        m = self.A[0].shape[0] if self.A else 0
        if not self.A:
            raise ValueError("need at least one vertex")
        if self.B is None:
            self.B = [np.zeros((m, 0)) for _ in self.A]
        self.B = [np.asarray(b, dtype=float).reshape(m, -1) for b in self.B]
        if len(self.B) != len(self.A):
            raise ValueError("A and B vertex lists differ in length")
        p = self.B[0].shape[1]
        for a, b in zip(self.A, self.B):
            if a.shape != (m, m) or b.shape != (m, p):
                raise ValueError("all vertices must share dimensions")

    @property
    def m(self) -> int:
        return self.A[0].shape[0]

    @property
    def p(self) -> int:
        return self.B[0].shape[1]

    @property
    def input_is_zero(self) -> bool:
        return all(not np.any(b) for b in self.B)


@dataclass
class LmiCertificate:
    P: np.ndarray | None
    gamma: float
    margin: float = float("nan")
    gamma_lo: float = 0.0
    solves: int = 0
    notes: list = field(default_factory=list)

    @property
    def infinite(self) -> bool:
        return not np.isfinite(self.gamma)


def lmi_block(A, B, P, gamma2) -> np.ndarray:
    m, p = B.shape
    top = np.hstack([A.T @ P + P @ A + np.eye(m), P @ B])
    bottom = np.hstack([B.T @ P, -gamma2 * np.eye(p)])
    return np.vstack([top, bottom])


def certificate_margin(problem: ChannelLmiProblem, P, gamma2) -> float:
    """Largest eigenvalue over all vertex LMI blocks (should be <= 0)."""
    P = 0.5 * (P + P.T)
    return max(np.linalg.eigvalsh(lmi_block(a, b, P, gamma2))[-1]
               for a, b in zip(problem.A, problem.B))


def verify(problem: ChannelLmiProblem, P, gamma2, eps_feas=EPS_FEAS) -> tuple[bool, float]:
    if P is None or not np.all(np.isfinite(P)):
        return False, float("inf")
    if np.abs(P - P.T).max() > 1e-9 * max(1.0, np.abs(P).max()):
        return False, float("inf")
    P = 0.5 * (P + P.T)
    if np.linalg.eigvalsh(P)[0] < EPS_P:
        return False, float("inf")
    margin = certificate_margin(problem, P, gamma2)
    return margin <= eps_feas, margin


def _compress(B: np.ndarray) -> np.ndarray:
    """Factor with ``Bc @ Bc.T == B @ B.T`` and full column rank.

    Each vertex LMI depends on ``B`` only through ``B B^T`` (Schur complement),
    so the solver can work with the smaller factor.
    """
    if B.shape[1] == 0 or not np.any(B):
        return B[:, :0]
    U, s, _ = np.linalg.svd(B, full_matrices=False)
    r = int(np.sum(s > 1e-12 * s[0]))
    return U[:, :r] * s[:r]


def _sym_basis(m: int) -> np.ndarray:
    iu = np.triu_indices(m)
    E = np.zeros((len(iu[0]), m, m))
    k = np.arange(len(iu[0]))
    E[k, iu[0], iu[1]] = 1.0
    E[k, iu[1], iu[0]] = 1.0
    return E


def _unpack_P(x, m: int) -> np.ndarray:
    iu = np.triu_indices(m)
    P = np.zeros((m, m))
    P[iu] = x
    return P + np.triu(P, 1).T


def _vertex_coefficients(E, A, Bc) -> np.ndarray:
    """Columns: column-major vec of the LMI block generated by each basis element."""
    nv, m, _ = E.shape
    r = Bc.shape[1]
    F = np.zeros((nv, m + r, m + r))
    AtE = np.einsum("ji,vjk->vik", A, E)
    F[:, :m, :m] = AtE + AtE.transpose(0, 2, 1)
    if r:
        EB = E @ Bc
        F[:, :m, m:] = EB
        F[:, m:, :m] = EB.transpose(0, 2, 1)
    return F.reshape(nv, -1).T


class CvxoptBackend:
    """Interior-point reference backend built on ``cvxopt.solvers.sdp``."""

    options = {"show_progress": False, "maxiters": 100,
               "abstol": 1e-9, "reltol": 1e-8, "feastol": 1e-9}

    def _common(self, problem):
        m = problem.m
        E = _sym_basis(m)
        Bc = [_compress(b) for b in problem.B]
        return m, E, Bc

    def _p_bounds(self, E, extra: int):
        nv, m, _ = E.shape
        floor = -E.reshape(nv, -1).T
        Gs = [np.hstack([floor, np.zeros((m * m, extra))])]
        hs = [-_P_FLOOR * np.eye(m)]
        return Gs, hs

    def _solve(self, c, Gl, hl, Gs, hs):
        opts = dict(self.options)
        try:
            sol = solvers.sdp(matrix(c), Gl=matrix(Gl), hl=matrix(hl),
                              Gs=[matrix(g) for g in Gs], hs=[matrix(h) for h in hs],
                              options=opts)
        except (ArithmeticError, ValueError) as exc:
            # cvxopt can break down on problems sitting right at the boundary
            log.debug("cvxopt failure: %s", exc)
            return "error", None
        x = None if sol["x"] is None else np.array(sol["x"]).ravel()
        return sol["status"], x

    def margin(self, problem: ChannelLmiProblem, gamma2: float):
        """Solve ``min s`` s.t. every vertex block ``<= s I`` (``s >= -1``).

        The sign of ``s`` decides feasibility; its size is only meaningful
        for the rescaled blocks.
        """
        m, E, Bc = self._common(problem)
        nv = len(E)
        Gs, hs = self._p_bounds(E, 1)
        # congruence with diag(I, I/gamma): corner becomes -I, B becomes B/gamma
        scale = 1.0 / np.sqrt(gamma2)
        for a, bc in zip(problem.A, Bc):
            r = bc.shape[1]
            k = m + r
            coef = _vertex_coefficients(E, a, bc * scale)
            Gs.append(np.hstack([coef, -np.eye(k).reshape(-1, 1)]))
            F0 = np.eye(k)
            F0[m:, m:] *= -1.0
            hs.append(-F0)
        trace = np.array([np.trace(e) for e in E])
        Gl = np.array([np.r_[np.zeros(nv), -1.0], np.r_[trace, 0.0]])
        hl = np.array([1.0, _P_TRACE_CAP])
        c = np.r_[np.zeros(nv), 1.0]
        status, x = self._solve(c, Gl, hl, Gs, hs)
        if x is None:
            return status, None, float("nan")
        return status, _unpack_P(x[:nv], m), float(x[-1])

    def min_gamma2(self, problem: ChannelLmiProblem, cap: float | None = None):
        """Solve ``min t`` s.t. every vertex block with ``-t I`` in the corner ``<= 0``.

        ``t`` is bounded by ``cap`` (default ``GAMMA_MAX**2``).  A loose cap
        costs interior-point iterations, so callers try a small one first.
        """
        m, E, Bc = self._common(problem)
        nv = len(E)
        Gs, hs = self._p_bounds(E, 1)
        for a, bc in zip(problem.A, Bc):
            r = bc.shape[1]
            k = m + r
            tcol = np.zeros((k, k))
            tcol[m:, m:] = -np.eye(r)
            Gs.append(np.hstack([_vertex_coefficients(E, a, bc), tcol.reshape(-1, 1)]))
            h = np.zeros((k, k))
            h[:m, :m] = -np.eye(m)
            hs.append(h)
        Gl = np.array([np.r_[np.zeros(nv), 1.0]])
        hl = np.array([GAMMA_MAX ** 2 if cap is None else cap])
        c = np.r_[np.zeros(nv), 1.0]
        status, x = self._solve(c, Gl, hl, Gs, hs)
        if x is None:
            return status, None, float("nan")
        return status, _unpack_P(x[:nv], m), float(x[-1])


_DEFAULT_BACKEND = CvxoptBackend()


def feasibility(problem: ChannelLmiProblem, gamma2: float | None = None,
                backend=None, eps_feas: float = EPS_FEAS):
    """Return ``(feasible, certificate)``; the certificate is ``None`` when infeasible.

    Raises ``IndeterminateError`` if the solver neither converged nor produced
    a verifiable ``P``.
    """
    gamma2 = problem.gamma2 if gamma2 is None else gamma2
    if gamma2 is None or gamma2 <= 0:
        raise ValueError("feasibility needs gamma^2 > 0")
    backend = backend or _DEFAULT_BACKEND
    status, P, s = backend.margin(problem, gamma2)
    ok, margin = verify(problem, P, gamma2, eps_feas)
    if ok:
        return True, LmiCertificate(P, float(np.sqrt(gamma2)), margin, solves=1)
    if status == "optimal" or (np.isfinite(s) and s > 1e-6):
        return False, None
    if not problem.input_is_zero:
        # second opinion from the other formulation: its P works for any gamma^2 >= t
        status, P, t = backend.min_gamma2(problem)
        ok, margin = verify(problem, P, gamma2, eps_feas)
        if ok:
            return True, LmiCertificate(P, float(np.sqrt(gamma2)), margin, solves=2)
        if status == "optimal" and t > gamma2 * (1 + 1e-6):
            return False, None
    raise IndeterminateError(f"solver status {status!r}, margin estimate {s:.3g}")


def _stability(problem: ChannelLmiProblem, backend) -> LmiCertificate:
    stab = ChannelLmiProblem(problem.A, None)
    ok, cert = feasibility(stab, 1.0, backend)
    if ok:
        cert.gamma = 0.0
        return cert
    return LmiCertificate(None, float("inf"), solves=1, notes=["state family not certified stable"])


def _bisect(problem, lo, hi, hi_cert, tol, backend) -> LmiCertificate:
    solves = 0
    while hi - lo > tol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        ok, cert = feasibility(problem, mid * mid, backend)
        solves += 1
        if ok:
            hi, hi_cert = mid, cert
        else:
            lo = mid
    hi_cert.gamma, hi_cert.gamma_lo = hi, lo
    hi_cert.solves += solves
    return hi_cert


def minimize_gain(A, B, tol: float = 1e-3, method: str = "direct", backend=None) -> LmiCertificate:
    """Smallest certified L2-gain bound for the polytope with vertices ``(A[q], B[q])``.

    The result brackets the LMI optimum: the LMIs hold (verified) at ``gamma``
    and fail at ``gamma_lo`` with ``gamma - gamma_lo <= tol * max(1, gamma)``.
    A certificate with ``gamma = inf`` means the LMIs fail even at ``GAMMA_MAX``.

    ``method="bisection"`` runs a plain bisection on the feasibility oracle.
    ``method="direct"`` first solves for the optimal ``gamma^2`` in one SDP and
    then checks the bracket around it, falling back to bisection if the check
    fails.
    """
    backend = backend or _DEFAULT_BACKEND
    problem = ChannelLmiProblem(A, B)
    if problem.input_is_zero:
        return _stability(problem, backend)

    if method == "direct":
        cert = _direct(problem, tol, backend)
        if cert is not None:
            return cert
        log.debug("direct gain search failed its bracket check; bisecting")
    elif method != "bisection":
        raise ValueError(f"unknown method {method!r}")

    ok, top = feasibility(problem, GAMMA_MAX ** 2, backend)
    if not ok:
        return LmiCertificate(None, float("inf"), gamma_lo=GAMMA_MAX, solves=1)
    lo, hi, hi_cert, solves = 0.0, GAMMA_MAX, top, 1
    g = 1.0
    ok, cert = feasibility(problem, g * g, backend)
    solves += 1
    if ok:
        hi, hi_cert = g, cert
        while hi > tol:
            g = 0.5 * hi
            ok, cert = feasibility(problem, g * g, backend)
            solves += 1
            if not ok:
                lo = g
                break
            hi, hi_cert = g, cert
    else:
        lo = g
        while True:
            g = 2.0 * lo
            if g >= GAMMA_MAX:
                break
            ok, cert = feasibility(problem, g * g, backend)
            solves += 1
            if ok:
                hi, hi_cert = g, cert
                break
            lo = g
    hi_cert.solves = solves
    return _bisect(problem, lo, hi, hi_cert, tol, backend)


_FIRST_CAP = 1e4


def _direct(problem, tol, backend) -> LmiCertificate | None:
    status, P, t = backend.min_gamma2(problem, _FIRST_CAP)
    solves = 1
    if status != "optimal" or P is None or t > 0.99 * _FIRST_CAP:
        status, P, t = backend.min_gamma2(problem)
        solves += 1
    if status != "optimal" or P is None:
        ok, _ = feasibility(problem, GAMMA_MAX ** 2, backend)
        if not ok:
            return LmiCertificate(None, float("inf"), gamma_lo=GAMMA_MAX, solves=solves + 1)
        return None
    g_opt = float(np.sqrt(max(t, 0.0)))
    hi = g_opt * (1.0 + 0.5 * tol) + 0.25 * tol * min(1.0, g_opt) + 1e-12
    ok, margin = verify(problem, P, hi * hi)
    cert = LmiCertificate(P, hi, margin) if ok else None
    for _ in range(4):
        if cert is not None:
            break
        ok, cert = feasibility(problem, hi * hi, backend)
        solves += 1
        if not ok:
            cert = None
            hi += 0.25 * tol * max(1.0, hi)
    if cert is None:
        return None
    cert.gamma = hi
    cert.gamma_lo = max(0.0, hi - tol * max(1.0, hi))
    cert.gamma_lo = min(cert.gamma_lo, g_opt * (1.0 - 1e-9))
    cert.solves += solves
    return cert


def rescale_family(gains, R: int) -> list:
    """Scale single-channel gains to a joint family: each gain times ``sqrt(R)``."""
    if R < 1:
        raise ValueError("R must be >= 1")
    return [float(np.sqrt(R)) * float(g) for g in gains]


def joint_gain_check(A, B_channels, gammas, backend=None) -> bool:
    """Check one multi-channel LMI (a single ``P`` for all channels) at given gains.

    ``B_channels[k]`` is the vertex list of channel ``k``.  Only a feasibility
    check; no Pareto optimisation over the gains is attempted.
    """
    backend = backend or _DEFAULT_BACKEND
    keep = [k for k, Bk in enumerate(B_channels) if any(np.any(b) for b in Bk)]
    if any(gammas[k] <= 0 for k in keep):
        return False
    B_channels = [B_channels[k] for k in keep]
    gammas = [gammas[k] for k in keep]
    if not keep:
        return _stability(ChannelLmiProblem(A, None), backend).gamma == 0.0
    B_stacked = [np.hstack([np.asarray(Bk[q], float) for Bk in B_channels])
                 for q in range(len(A))]
    # scale each channel by 1/gamma_k so the corner becomes -I
    scale = np.concatenate([np.full(np.asarray(Bk[0]).shape[1], 1.0 / g)
                            for Bk, g in zip(B_channels, gammas)])
    scaled = ChannelLmiProblem(A, [b * scale for b in B_stacked])
    ok, _ = feasibility(scaled, 1.0, backend)
    return ok
