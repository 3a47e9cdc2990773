"""Per-channel L2 gains of the decomposed second additive compound system.

A model is a list of *joint* vertices of the Jacobian polytope.  Each channel
only depends on a few blocks, so its LMI uses the distinct projections of
the joint vertices onto those blocks; compound and Kronecker-sum maps are
affine, so mapping vertices keeps the hull.
"""
from __future__ import annotations

import hashlib
import json
import logging
import time
from collections import OrderedDict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .compound import additive_compound_2, kron_sum
from .decomposition import (
    B_operator,
    BlockPartition,
    G1_operator,
    G2_operator,
    H_ki_operator,
    H_kj_operator,
    PartitionedMatrix,
    third_indices,
)
from .sdp import minimize_gain

log = logging.getLogger(__name__)

# channel kinds and the indices they carry
DELTA, ETA1, ETA2, GAMMA_KJ, GAMMA_KI = "delta", "eta1", "eta2", "gamma_kj", "gamma_ki"
STAB_DIAG, STAB_PAIR = "stab_diag", "stab_pair"


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class InterconnectionModel:
    partition: BlockPartition
    vertices: np.ndarray
    name: str = "model"

    def __post_init__(self):
        V = np.asarray(self.vertices, dtype=float)
        if V.ndim == 2:
            V = V[None]
        n = self.partition.n
        if V.ndim != 3 or V.shape[1:] != (n, n) or len(V) < 1:
            raise ModelError(f"vertices must have shape (Q, {n}, {n}), got {V.shape}")
        if not np.all(np.isfinite(V)):
            raise ModelError("vertices contain non-finite entries")
        V.setflags(write=False)
        object.__setattr__(self, "vertices", V)

    @property
    def N(self) -> int:
        return self.partition.N

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    def vertex(self, q: int) -> PartitionedMatrix:
        return PartitionedMatrix(self.partition, self.vertices[q])

    def block_vertices(self, i: int, j: int) -> np.ndarray:
        p = self.partition
        return self.vertices[:, p.slice(i), p.slice(j)]

    def structural_zero(self, i: int, j: int) -> bool:
        return not np.any(self.block_vertices(i, j))

    def family(self, blocks) -> list[tuple[np.ndarray, ...]]:
        """Distinct joint values of the listed blocks, in a deterministic order."""
        parts = [self.block_vertices(i, j) for i, j in blocks]
        flat = np.concatenate([b.reshape(len(b), -1) for b in parts], axis=1)
        uniq = np.unique(flat, axis=0)
        out = []
        for row in uniq:
            vals, pos = [], 0
            for b in parts:
                size = b.shape[1] * b.shape[2]
                vals.append(row[pos:pos + size].reshape(b.shape[1:]))
                pos += size
            out.append(tuple(vals))
        return out

    def checksum(self) -> str:
        h = hashlib.sha256()
        h.update(np.asarray(self.partition.dims, dtype=np.int64).tobytes())
        h.update(np.ascontiguousarray(self.vertices).tobytes())
        return h.hexdigest()[:16]

    # model.json: {"partition": [n_i], "vertices": [{"blocks": {"i,j": [[...]]}}]}
    # with 1-based block indices; missing blocks are zero.
    @classmethod
    def from_dict(cls, data: dict, name: str = "model") -> "InterconnectionModel":
        try:
            part = BlockPartition(tuple(data["partition"]))
            raw = data["vertices"]
        except (KeyError, TypeError, ValueError) as exc:
            raise ModelError(f"model needs a valid 'partition' and 'vertices': {exc}") from exc
        if not raw:
            raise ModelError("model has no vertices")
        V = np.zeros((len(raw), part.n, part.n))
        for q, vert in enumerate(raw):
            for key, mat in vert.get("blocks", {}).items():
                try:
                    i, j = (int(s) - 1 for s in key.split(","))
                except ValueError as exc:
                    raise ModelError(f"bad block key {key!r}") from exc
                if not (0 <= i < part.N and 0 <= j < part.N):
                    raise ModelError(f"block key {key!r} out of range")
                try:
                    M = np.asarray(mat, dtype=float)
                except (TypeError, ValueError) as exc:
                    raise ModelError(f"block {key} is not a numeric matrix") from exc
                if M.shape != (part.dims[i], part.dims[j]):
                    raise ModelError(f"block {key} has shape {M.shape}, "
                                     f"expected {(part.dims[i], part.dims[j])}")
                V[q, part.slice(i), part.slice(j)] = M
        return cls(part, V, name=data.get("name", name))

    @classmethod
    def from_json(cls, path) -> "InterconnectionModel":
        path = Path(path)
        with path.open() as fh:
            return cls.from_dict(json.load(fh), name=path.stem)

    def to_dict(self) -> dict:
        p = self.partition
        verts = []
        for V in self.vertices:
            blocks = {}
            for i in range(p.N):
                for j in range(p.N):
                    blk = V[p.slice(i), p.slice(j)]
                    if np.any(blk):
                        blocks[f"{i + 1},{j + 1}"] = blk.tolist()
            verts.append({"blocks": blocks})
        return {"name": self.name, "partition": list(p.dims), "vertices": verts}


def channel_keys(model: InterconnectionModel) -> list[tuple]:
    """All gain channels, diagonal-equation channels first."""
    part = model.partition
    N = part.N
    keys = []
    for i in range(N):
        if part.has_diagonal(i):
            keys += [(DELTA, i, k) for k in range(N) if k != i]
    for i, j in part.pairs():
        if part.has_diagonal(i):
            keys.append((ETA1, i, j))
        if part.has_diagonal(j):
            keys.append((ETA2, i, j))
        for k in third_indices(N, i, j):
            keys += [(GAMMA_KJ, i, j, k), (GAMMA_KI, i, j, k)]
    return keys


def channel_subsystem(key) -> tuple:
    kind = key[0]
    if kind in (DELTA, STAB_DIAG):
        return (key[1],)
    return (key[1], key[2])


def channel_family(model: InterconnectionModel, key) -> tuple[list, list]:
    """State and input vertex lists ``(A_q, B_q)`` of one channel."""
    kind = key[0]
    dims = model.partition.dims
    if kind == DELTA:
        _, i, k = key
        fam = model.family([(i, i), (i, k)])
        return ([additive_compound_2(a) for a, _ in fam],
                [B_operator(c, i, k) for _, c in fam])
    if kind == STAB_DIAG:
        (_, i) = key
        return [additive_compound_2(a) for (a,) in model.family([(i, i)])], None
    i, j = key[1], key[2]
    if kind == STAB_PAIR:
        return [kron_sum(a, b) for a, b in model.family([(i, i), (j, j)])], None
    if kind == ETA1:
        coupling, op = (j, i), G1_operator
    elif kind == ETA2:
        coupling, op = (i, j), G2_operator
    elif kind == GAMMA_KJ:
        k = key[3]
        coupling = (i, k)
        op = lambda A_ik: H_kj_operator(A_ik, dims[j], j, k)  # noqa: E731
    elif kind == GAMMA_KI:
        k = key[3]
        coupling = (j, k)
        op = lambda A_jk: H_ki_operator(A_jk, dims[i], i, k)  # noqa: E731
    else:
        raise ValueError(f"unknown channel kind {kind!r}")
    fam = model.family([(i, i), (j, j), coupling])
    return [kron_sum(a, b) for a, b, _ in fam], [op(c) for _, _, c in fam]


def channel_is_structural_zero(model: InterconnectionModel, key) -> bool:
    _, B = channel_family(model, key)
    return B is None or all(not np.any(b) for b in B)


def count_R(model: InterconnectionModel) -> tuple[dict, dict]:
    """Number of structurally nonzero inputs per diagonal and off-diagonal equation."""
    part = model.partition
    R_i = {i: 0 for i in range(part.N)}
    R_ij = {p: 0 for p in part.pairs()}
    for key in channel_keys(model):
        if channel_is_structural_zero(model, key):
            continue
        sub = channel_subsystem(key)
        if len(sub) == 1:
            R_i[sub[0]] += 1
        else:
            R_ij[sub] += 1
    return R_ij, R_i


@dataclass
class ChannelGain:
    key: tuple
    gain: float
    gain_lo: float = 0.0
    structural_zero: bool = False
    P: np.ndarray | None = None
    margin: float = float("nan")
    n_vertices: int = 0
    solves: int = 0
    seconds: float = 0.0

    @property
    def finite(self) -> bool:
        return bool(np.isfinite(self.gain))

    def label(self) -> str:
        kind, *idx = self.key
        return f"{kind}[{','.join(str(i + 1) for i in idx)}]"


@dataclass
class GainTable:
    N: int
    channels: dict = field(default_factory=dict)
    R_ij: dict = field(default_factory=dict)
    R_i: dict = field(default_factory=dict)
    checksum: str = ""
    complete: bool = True

    def gain(self, *key) -> float:
        ch = self.channels.get(tuple(key))
        return 0.0 if ch is None else ch.gain

    def delta(self, i, k) -> float:
        return self.gain(DELTA, i, k)

    def eta1(self, i, j) -> float:
        return self.gain(ETA1, i, j)

    def eta2(self, i, j) -> float:
        return self.gain(ETA2, i, j)

    def gamma_kj(self, i, j, k) -> float:
        return self.gain(GAMMA_KJ, i, j, k)

    def gamma_ki(self, i, j, k) -> float:
        return self.gain(GAMMA_KI, i, j, k)

    def infinite_channels(self) -> list[ChannelGain]:
        return [c for c in self.channels.values() if not c.finite]


def solve_channel(model: InterconnectionModel, key, tol: float = 1e-3,
                  method: str = "direct") -> ChannelGain:
    t0 = time.perf_counter()
    A, B = channel_family(model, key)
    zero = B is None or all(not np.any(b) for b in B)
    if zero and key[0] not in (STAB_DIAG, STAB_PAIR):
        return ChannelGain(key, 0.0, structural_zero=True, n_vertices=len(A))
    cert = minimize_gain(A, B, tol=tol, method=method)
    return ChannelGain(key, cert.gamma, cert.gamma_lo, False, cert.P, cert.margin,
                       len(A), cert.solves, time.perf_counter() - t0)


def delta_gain(model, i, k, **kw) -> ChannelGain:
    if not model.partition.has_diagonal(i) or k == i:
        raise ValueError("delta gain needs n_i >= 2 and k != i")
    return solve_channel(model, (DELTA, i, k), **kw)


def eta_gains(model, i, j, **kw) -> tuple[ChannelGain | None, ChannelGain | None]:
    if not i < j:
        raise ValueError("eta gains need i < j")
    part = model.partition
    g1 = solve_channel(model, (ETA1, i, j), **kw) if part.has_diagonal(i) else None
    g2 = solve_channel(model, (ETA2, i, j), **kw) if part.has_diagonal(j) else None
    return g1, g2


def gamma_gains(model, i, j, k, **kw) -> tuple[ChannelGain, ChannelGain]:
    if not i < j or k in (i, j):
        raise ValueError("gamma gains need i < j and k outside {i, j}")
    return (solve_channel(model, (GAMMA_KJ, i, j, k), **kw),
            solve_channel(model, (GAMMA_KI, i, j, k), **kw))


def _stability_keys(model, nonzero_subsystems) -> list[tuple]:
    """Subsystems with no nonzero input still need their own state family certified."""
    part = model.partition
    keys = [(STAB_DIAG, i) for i in range(part.N)
            if part.has_diagonal(i) and (i,) not in nonzero_subsystems]
    keys += [(STAB_PAIR, i, j) for i, j in part.pairs() if (i, j) not in nonzero_subsystems]
    return keys


_CACHE: OrderedDict = OrderedDict()
_CACHE_SIZE = 256


def _solve_star(args):
    return solve_channel(*args)


def compute_gain_table(model: InterconnectionModel, tol: float = 1e-3,
                       method: str = "direct", workers: int = 1,
                       stop_when=None, use_cache: bool = True) -> GainTable:
    """Solve every channel of ``model``.

    ``stop_when(table)`` is called after each sequential solve; returning True
    stops early and marks the table incomplete (used for fail-fast sweeps).
    """
    cache_key = (model.checksum(), tol, method)
    if use_cache and cache_key in _CACHE:
        _CACHE.move_to_end(cache_key)
        return _CACHE[cache_key]

    R_ij, R_i = count_R(model)
    table = GainTable(model.N, R_ij=R_ij, R_i=R_i, checksum=model.checksum())
    keys = channel_keys(model)
    nonzero = {channel_subsystem(k) for k in keys if not channel_is_structural_zero(model, k)}
    stab = _stability_keys(model, nonzero)
    # cheap, likely-binding checks first: diagonal families before pair families
    ordered = ([k for k in stab if k[0] == STAB_DIAG] + [k for k in keys if k[0] == DELTA]
               + [k for k in stab if k[0] == STAB_PAIR] + [k for k in keys if k[0] != DELTA])

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_solve_star, [(model, k, tol, method) for k in ordered]))
        for res in results:
            table.channels[res.key] = res
    else:
        for k in ordered:
            res = solve_channel(model, k, tol, method)
            table.channels[k] = res
            log.debug("%s gain=%.6g (%d vertices, %.2fs)", res.label(), res.gain,
                      res.n_vertices, res.seconds)
            if stop_when is not None and len(table.channels) < len(ordered) and stop_when(table):
                table.complete = False
                break

    if use_cache and table.complete:
        _CACHE[cache_key] = table
        if len(_CACHE) > _CACHE_SIZE:
            _CACHE.popitem(last=False)
    return table
