"""Three Thomas systems coupled in a ring.

    x1' = -b x1 + sin x2 - d x4     x4' = -a x4 + sin x5 - d x7     x7' = -a x7 + sin x8 - d x1
    x2' = -b x2 + sin x3            x5' = -a x5 + sin x6            x8' = -a x8 + sin x9
    x3' = -b x3 + sin x1            x6' = -a x6 + sin x4            x9' = -a x9 + sin x7

State indices below are 0-based (``x[0]`` is ``x1``).
"""
from __future__ import annotations

import itertools
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .decomposition import BlockPartition, PartitionedMatrix
from .gains import InterconnectionModel
from .odesim import classify_batch, integrate
from .smallgain import CertificationReport, certify_model

log = logging.getLogger(__name__)

A_DEFAULT = 2.0
PARTITION = BlockPartition((3, 3, 3))
B_RANGE = (0.05, 2.0)

# (row, col) of the cosine entries: row i depends on cos(x_col)
_COS_ENTRIES = [(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3), (6, 7), (7, 8), (8, 6)]
# c_i = cos x_i sits at the entry whose column is i
_COS_SLOT = {col: (row, col) for row, col in _COS_ENTRIES}
_RING = [(0, 3), (3, 6), (6, 0)]


class ParameterError(ValueError):
    pass


@dataclass(frozen=True)
class ThomasParams:
    b: float
    d: float
    a: float = A_DEFAULT

    def __post_init__(self):
        if not self.b > 0 or not self.a > 0:
            raise ParameterError(f"need a, b > 0 (got a={self.a}, b={self.b})")
        if not -1.0 <= self.d <= 1.0:
            raise ParameterError(f"coupling d={self.d} outside [-1, 1]")

    @property
    def denominator(self) -> float:
        """``1 - (|d|/b)(|d|/a)^2``; the invariant box exists only when positive."""
        e = abs(self.d)
        return 1.0 - (e / self.b) * (e / self.a) ** 2

    @property
    def diagonal(self) -> np.ndarray:
        return np.array([self.b] * 3 + [self.a] * 6)


def vector_field(params: ThomasParams):
    b, d = params.b, params.d
    diag = params.diagonal
    nxt = np.array([1, 2, 0, 4, 5, 3, 7, 8, 6])
    ring_src = np.array([3, 6, 0])

    def f(x):
        x = np.asarray(x, dtype=float)
        dx = -diag * x + np.sin(x[..., nxt])
        dx[..., [0, 3, 6]] -= d * x[..., ring_src]
        return dx

    return f


def stacked_vector_field(params_list):
    """Field for states of shape ``(P, k, 9)``: slab ``p`` uses ``params_list[p]``."""
    diag = np.array([p.diagonal for p in params_list])[:, None, :]
    d = np.array([p.d for p in params_list])[:, None, None]
    nxt = np.array([1, 2, 0, 4, 5, 3, 7, 8, 6])
    ring_src = np.array([3, 6, 0])

    def f(x):
        dx = -diag * x + np.sin(x[..., nxt])
        dx[..., [0, 3, 6]] -= d * x[..., ring_src]
        return dx

    return f


def jacobian(params: ThomasParams, c) -> PartitionedMatrix:
    """Jacobian for given cosines ``c[i] = cos(x_i)``."""
    c = np.asarray(c, dtype=float)
    J = np.diag(-params.diagonal)
    for row, col in _COS_ENTRIES:
        J[row, col] = c[col]
    for row, col in _RING:
        J[row, col] = -params.d
    return PartitionedMatrix(PARTITION, J)


def jacobian_at(params: ThomasParams, x) -> np.ndarray:
    return jacobian(params, np.cos(x)).matrix


def jacobian_at_origin(params: ThomasParams) -> np.ndarray:
    return jacobian(params, np.ones(9)).matrix


@dataclass(frozen=True)
class InvariantBox:
    bounds: np.ndarray

    def contains(self, x, tol: float = 0.0) -> np.ndarray:
        return np.all(np.abs(x) <= self.bounds + tol, axis=-1)

    def sample(self, rng, k: int) -> np.ndarray:
        return rng.uniform(-1.0, 1.0, size=(k, 9)) * self.bounds

    def sample_boundary(self, rng, k: int) -> np.ndarray:
        """Uniform points pushed onto a random face of the box."""
        x = self.sample(rng, k)
        face = rng.integers(0, 9, size=k)
        sign = rng.choice([-1.0, 1.0], size=k)
        x[np.arange(k), face] = sign * self.bounds[face]
        return x


def invariant_bounds(params: ThomasParams, printed_x7: bool = False) -> np.ndarray:
    """Bounds ``X_1..X_9`` of the forward-invariant box.

    ``X_1, X_4, X_7`` solve ``b X1 = 1 + |d| X4``, ``a X4 = 1 + |d| X7``,
    ``a X7 = 1 + |d| X1``.  ``printed_x7=True`` uses
    ``(1 + |d|/b + |d|^2/(ab)) / (b den)`` instead of the solution
    ``(...) / (a den)``; unless ``b = a`` that value does not satisfy the
    face conditions above and is kept only for comparison.
    """
    a, b, e = params.a, params.b, abs(params.d)
    den = params.denominator
    if den <= 0:
        raise ParameterError(
            f"invariant box undefined: 1 - (|d|/b)(|d|/a)^2 = {den:.4g} <= 0 "
            f"(b={b}, d={params.d})")
    X1 = (1 + e / a + (e / a) ** 2) / (b * den)
    X4 = (1 + e / a + e * e / (a * b)) / (a * den)
    X7 = (1 + e / b + e * e / (a * b)) / ((b if printed_x7 else a) * den)
    return np.array([X1, 1 / b, 1 / b, X4, 1 / a, 1 / a, X7, 1 / a, 1 / a])


def invariant_box(params: ThomasParams, printed_x7: bool = False) -> InvariantBox:
    return InvariantBox(invariant_bounds(params, printed_x7))


def cos_intervals(params: ThomasParams, box: InvariantBox | None = None):
    """Interval hull ``[lo, hi]`` of ``cos x_i`` over the box.

    ``cos`` is decreasing on ``[0, pi]``; bounds beyond ``pi`` fall back to
    ``[-1, 1]`` with a warning.
    """
    box = box or invariant_box(params)
    X = box.bounds
    lo = np.where(X <= np.pi, np.cos(np.minimum(X, np.pi)), -1.0)
    wide = np.flatnonzero(X > np.pi)
    if wide.size:
        warnings.warn(f"bounds {[f'X{i + 1}' for i in wide]} exceed pi at b={params.b}, "
                      f"d={params.d}; using cos in [-1, 1]", RuntimeWarning, stacklevel=2)
    return lo, np.ones(9)


def vertex_hulls(params: ThomasParams, box: InvariantBox | None = None) -> InterconnectionModel:
    """All ``2^9`` Jacobian vertices over the cosine interval hull."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        lo, hi = cos_intervals(params, box)
    verts = [jacobian(params, np.where(np.array(bits, bool), hi, lo)).matrix
             for bits in itertools.product((0, 1), repeat=9)]
    name = f"thomas(b={params.b:g},d={params.d:g},a={params.a:g})"
    return InterconnectionModel(PARTITION, np.array(verts), name=name)


def certify(params: ThomasParams, tol: float = 1e-3, method: str = "direct",
            workers: int = 1, fail_fast: bool = False) -> CertificationReport:
    meta = {"b": params.b, "d": params.d, "a": params.a}
    if params.denominator <= 0:
        return CertificationReport("not_certified", float("nan"), float("nan"), None, None,
                                   ["invariant box undefined (denominator <= 0)"], meta=meta)
    box = invariant_box(params)
    diags = [f"X{i + 1} = {x:.4g} > pi: cosine widened to [-1, 1]"
             for i, x in enumerate(box.bounds) if x > np.pi]
    report = certify_model(vertex_hulls(params, box), tol=tol, method=method,
                           workers=workers, fail_fast=fail_fast)
    report.diagnostics = diags + report.diagnostics
    report.meta.update(meta)
    report.meta["box"] = box.bounds.tolist()
    return report


def is_certified(b: float, d: float, a: float = A_DEFAULT, **kw) -> bool:
    try:
        params = ThomasParams(b, d, a)
    except ParameterError:
        return False
    kw.setdefault("fail_fast", True)
    return certify(params, **kw).certified


# -- (d, b) curves ----------------------------------------------------------

@dataclass
class CurvePoint:
    d: float
    b: float | None
    flags: list = field(default_factory=list)
    evaluations: int = 0


def blue_curve(d_grid, b_tol: float = 1e-3, b_range=B_RANGE, scan_points: int = 8,
               a: float = A_DEFAULT, **certify_kw) -> list[CurvePoint]:
    """Smallest certified ``b`` per ``d``, by coarse scan then bisection.

    The coarse scan doubles as the per-slice monotonicity check; a slice that
    is not monotone is rescanned on a fine grid and flagged.
    """
    out = []
    lo_b, hi_b = b_range
    for d in d_grid:
        d = float(d)
        calls = 0

        def ok(b):
            nonlocal calls
            calls += 1
            return is_certified(b, d, a, **certify_kw)

        grid = np.linspace(lo_b, hi_b, scan_points)
        flags_ = [ok(b) for b in grid]
        if not any(flags_):
            out.append(CurvePoint(d, None, ["not certified anywhere in range"], calls))
            continue
        first = flags_.index(True)
        if not all(flags_[first:]):
            out.append(_fine_scan(d, ok, lo_b, hi_b, b_tol, calls))
            continue
        if first == 0:
            out.append(CurvePoint(d, lo_b, ["certified at range floor"], calls))
            continue
        lo, hi = grid[first - 1], grid[first]
        while hi - lo > b_tol:
            mid = 0.5 * (lo + hi)
            if ok(mid):
                hi = mid
            else:
                lo = mid
        out.append(CurvePoint(d, float(hi), [], calls))
    return out


def _fine_scan(d, ok, lo_b, hi_b, b_tol, calls) -> CurvePoint:
    step = max(b_tol, (hi_b - lo_b) / 400)
    grid = np.arange(hi_b, lo_b - 1e-12, -step)
    b_min = None
    for b in grid:
        calls += 1
        if not ok(b):
            break
        b_min = float(b)
    return CurvePoint(d, b_min, ["non-monotone slice: fine grid scan"], calls)


def max_pair_sum(params: ThomasParams) -> float:
    """``max_{i<j} Re(lambda_i + lambda_j)`` for the Jacobian at the origin.

    This is the spectral abscissa of the second additive compound there.
    """
    lam = np.sort(np.linalg.eigvals(jacobian_at_origin(params)).real)[::-1]
    return float(lam[0] + lam[1])


def black_curve(d_grid, b_range=B_RANGE, tol: float = 1e-9, a: float = A_DEFAULT,
                scan_points: int = 400) -> list[CurvePoint]:
    """Largest ``b`` at which the compound Jacobian at the origin is not Hurwitz."""
    out = []
    lo_b, hi_b = b_range
    for d in d_grid:
        d = float(d)

        def f(b):
            return max_pair_sum(ThomasParams(b, d, a))

        grid = np.linspace(lo_b, hi_b, scan_points)
        vals = np.array([f(b) for b in grid])
        nonneg = np.flatnonzero(vals >= 0)
        if nonneg.size == 0:
            out.append(CurvePoint(d, None, ["compound Jacobian Hurwitz on whole range"]))
            continue
        last = nonneg[-1]
        if last == len(grid) - 1:
            out.append(CurvePoint(d, None, ["no crossing below range ceiling"]))
            continue
        lo, hi = grid[last], grid[last + 1]
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if f(mid) >= 0:
                lo = mid
            else:
                hi = mid
        out.append(CurvePoint(d, float(0.5 * (lo + hi))))
    return out


def charpoly_gap(params: ThomasParams, lam, sign: float = 1.0, shift: float = 1.0) -> np.ndarray:
    """``det(lam I - J(0)) - [prod_i det(lam I - J_ii(0)) + sign d^3 (lam + shift b)^2 (lam + shift a)^4]``.

    ``sign=+1, shift=+1`` is the variant that matches the characteristic
    polynomial (the ring coupling enters through a 3-cycle and the
    complementary minors of each block).
    """
    J = jacobian_at_origin(params)
    pm = PartitionedMatrix(PARTITION, J)
    lam = np.atleast_1d(np.asarray(lam, dtype=complex))
    b, a, d = params.b, params.a, params.d
    out = []
    for z in lam:
        full = np.linalg.det(z * np.eye(9) - J)
        prod = np.prod([np.linalg.det(z * np.eye(3) - pm.block(i, i)) for i in range(3)])
        corr = sign * d ** 3 * (z + shift * b) ** 2 * (z + shift * a) ** 4
        out.append(full - (prod + corr))
    return np.array(out)


def pin_charpoly_variant(params: ThomasParams, lam) -> tuple[float, float]:
    """Pick the ``(sign, shift)`` pair with the smallest characteristic-polynomial gap."""
    variants = [(s, t) for s in (1.0, -1.0) for t in (1.0, -1.0)]
    errs = [np.abs(charpoly_gap(params, lam, s, t)).max() for s, t in variants]
    return variants[int(np.argmin(errs))]


# -- simulation ------------------------------------------------------------

SIM_STEP = 1e-2
SIM_HORIZON = 500.0


def simulate(params: ThomasParams, n_traj: int = 20, seed: int = 0, T: float = SIM_HORIZON,
             h: float = SIM_STEP, record_every: int = 10, boundary: bool = False):
    """Integrate ``n_traj`` seeded initial conditions from the invariant box.

    Returns ``(trajectory, classifications)``; the trajectory is batched.
    """
    box = invariant_box(params)
    rng = np.random.default_rng(seed)
    x0 = box.sample_boundary(rng, n_traj) if boundary else box.sample(rng, n_traj)
    f = vector_field(params)
    traj = integrate(f, x0, h=h, T=T, record_every=record_every,
                     meta={"model": "thomas", "b": params.b, "d": params.d, "a": params.a,
                           "seed": seed})
    return traj, classify_batch(traj, f)
