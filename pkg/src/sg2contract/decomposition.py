"""Block decomposition of the second additive compound equation.

For a partition ``n = n_1 + ... + n_N`` of the state, the skew-symmetric
solution ``X`` of ``X' = A X + X A^T`` splits into diagonal blocks ``X_ii``
(tracked through ``skew_vec``) and upper off-diagonal blocks ``X_ij``,
``i < j`` (tracked through row ``vec``).  The operators built here describe
how these pieces drive each other:

* ``B[i, k]``       input of ``vec(X_ki)`` / ``vec(X_ik)`` into ``skew_vec(X_ii)``
* ``G1[i, j]``      input of ``skew_vec(X_ii)`` into ``vec(X_ij)``
* ``G2[i, j]``      input of ``skew_vec(X_jj)`` into ``vec(X_ij)``
* ``H_kj[i, j, k]`` input of ``vec(X_kj)`` / ``vec(X_jk)`` into ``vec(X_ij)``
* ``H_ki[i, j, k]`` input of ``vec(X_ki)`` / ``vec(X_ik)`` into ``vec(X_ij)``

All block indices are 0-based.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations

import numpy as np

from .compound import (
    _build_L,
    _build_M,
    _build_Q,
    additive_compound_2,
    kron_sum,
    pair_index,
)


@dataclass(frozen=True)
class BlockPartition:
    dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if not dims or any(d < 1 for d in dims):
            raise ValueError(f"block dimensions must be >= 1, got {self.dims}")
        object.__setattr__(self, "dims", dims)

    @property
    def N(self) -> int:
        return len(self.dims)

    @property
    def n(self) -> int:
        return sum(self.dims)

    @cached_property
    def offsets(self) -> tuple[int, ...]:
        return tuple(int(o) for o in np.concatenate([[0], np.cumsum(self.dims)[:-1]]))

    def slice(self, i: int) -> slice:
        return slice(self.offsets[i], self.offsets[i] + self.dims[i])

    def has_diagonal(self, i: int) -> bool:
        """Whether block ``i`` carries a ``skew_vec(X_ii)`` coordinate (``n_i >= 2``)."""
        return self.dims[i] >= 2

    def pairs(self) -> list[tuple[int, int]]:
        """Block pairs ``i < j`` in lexicographic order."""
        return list(combinations(range(self.N), 2))


@dataclass(frozen=True)
class PartitionedMatrix:
    partition: BlockPartition
    matrix: np.ndarray

    def __post_init__(self):
        A = np.asarray(self.matrix, dtype=float)
        n = self.partition.n
        if A.shape != (n, n):
            raise ValueError(f"matrix shape {A.shape} does not match partition size {n}")
        object.__setattr__(self, "matrix", A)

    def block(self, i: int, j: int) -> np.ndarray:
        p = self.partition
        return self.matrix[p.slice(i), p.slice(j)]


# Single-operator formulas.  Each takes only the blocks it depends on, so the
# gain computations can map polytope vertices through them one at a time.

def B_operator(A_ik: np.ndarray, i: int, k: int) -> np.ndarray:
    """Coupling of ``vec(X_ki)`` (k < i) or ``vec(X_ik)`` (k > i) into ``skew_vec(X_ii)``."""
    n_i, n_k = A_ik.shape
    if n_i < 2:
        raise ValueError(f"block {i} has dimension {n_i} < 2: no diagonal coordinate")
    I = np.eye(n_i)
    L = _build_L(n_i)
    if k < i:
        # vec(X_ki^T) = Q_{n_k, n_i} vec(X_ki) since X_ki is n_k x n_i
        return L @ (np.kron(A_ik, I) - np.kron(I, A_ik) @ _build_Q(n_k, n_i))
    if k > i:
        return L @ (np.kron(I, A_ik) - np.kron(A_ik, I) @ _build_Q(n_i, n_k))
    raise ValueError("B_ik needs k != i")


def G1_operator(A_ji: np.ndarray) -> np.ndarray:
    n_j, n_i = A_ji.shape
    return np.kron(np.eye(n_i), A_ji) @ _build_M(n_i)


def G2_operator(A_ij: np.ndarray) -> np.ndarray:
    n_i, n_j = A_ij.shape
    return np.kron(A_ij, np.eye(n_j)) @ _build_M(n_j)


def H_kj_operator(A_ik: np.ndarray, n_j: int, j: int, k: int) -> np.ndarray:
    n_k = A_ik.shape[1]
    if k < j:
        return np.kron(A_ik, np.eye(n_j))
    return -np.kron(A_ik, np.eye(n_j)) @ _build_Q(n_j, n_k)


def H_ki_operator(A_jk: np.ndarray, n_i: int, i: int, k: int) -> np.ndarray:
    n_k = A_jk.shape[1]
    if k > i:
        return np.kron(np.eye(n_i), A_jk)
    return -np.kron(np.eye(n_i), A_jk) @ _build_Q(n_k, n_i)


@dataclass
class InterconnectionOperators:
    partition: BlockPartition
    B: dict = field(default_factory=dict)
    G1: dict = field(default_factory=dict)
    G2: dict = field(default_factory=dict)
    H_kj: dict = field(default_factory=dict)
    H_ki: dict = field(default_factory=dict)


def third_indices(N: int, i: int, j: int) -> list[int]:
    return [k for k in range(N) if k not in (i, j)]


def build_operators(A: PartitionedMatrix) -> InterconnectionOperators:
    part = A.partition
    N, dims = part.N, part.dims
    ops = InterconnectionOperators(part)
    for i in range(N):
        if not part.has_diagonal(i):
            continue
        for k in range(N):
            if k != i:
                ops.B[i, k] = B_operator(A.block(i, k), i, k)
    for i, j in part.pairs():
        if part.has_diagonal(i):
            ops.G1[i, j] = G1_operator(A.block(j, i))
        if part.has_diagonal(j):
            ops.G2[i, j] = G2_operator(A.block(i, j))
        for k in third_indices(N, i, j):
            ops.H_kj[i, j, k] = H_kj_operator(A.block(i, k), dims[j], j, k)
            ops.H_ki[i, j, k] = H_ki_operator(A.block(j, k), dims[i], i, k)
    return ops


def stacked_layout(part: BlockPartition):
    """Coordinate ranges of the stacked vector and its map to ``skew_vec`` order.

    Returns ``(diag, off, perm)`` where ``diag[i]`` / ``off[i, j]`` are slices
    into the stacked vector ``[skew_vec(X_11), ..., skew_vec(X_NN),
    vec(X_12), ..., vec(X_(N-1)N)]`` and ``perm[s]`` is the 0-based position
    of stacked coordinate ``s`` inside ``skew_vec(X)``.
    """
    n = part.n
    diag, off, perm = {}, {}, []
    for i in range(part.N):
        if not part.has_diagonal(i):
            continue
        start = len(perm)
        o, d = part.offsets[i], part.dims[i]
        for p in range(d):
            for q in range(p + 1, d):
                perm.append(pair_index(o + p + 1, o + q + 1, n) - 1)
        diag[i] = slice(start, len(perm))
    for i, j in part.pairs():
        start = len(perm)
        oi, oj = part.offsets[i], part.offsets[j]
        for p in range(part.dims[i]):
            for q in range(part.dims[j]):
                perm.append(pair_index(oi + p + 1, oj + q + 1, n) - 1)
        off[i, j] = slice(start, len(perm))
    return diag, off, np.array(perm, dtype=int)


def _pair(a: int, b: int) -> tuple[int, int]:
    return (a, b) if a < b else (b, a)


def assemble_block_generator(A: PartitionedMatrix) -> tuple[np.ndarray, np.ndarray]:
    """Generator ``T`` of the stacked coordinates and the permutation ``perm``.

    Contract: ``A2[np.ix_(perm, perm)] == T`` with ``A2 = additive_compound_2(A)``.
    """
    part = A.partition
    N = part.N
    ops = build_operators(A)
    diag, off, perm = stacked_layout(part)
    T = np.zeros((len(perm), len(perm)))
    for i, rows in diag.items():
        T[rows, rows] = additive_compound_2(A.block(i, i))
        for k in range(N):
            if k != i:
                T[rows, off[_pair(i, k)]] = ops.B[i, k]
    for (i, j), rows in off.items():
        T[rows, rows] = kron_sum(A.block(i, i), A.block(j, j))
        if (i, j) in ops.G1:
            T[rows, diag[i]] = ops.G1[i, j]
        if (i, j) in ops.G2:
            T[rows, diag[j]] = ops.G2[i, j]
        for k in third_indices(N, i, j):
            T[rows, off[_pair(k, j)]] += ops.H_kj[i, j, k]
            T[rows, off[_pair(k, i)]] += ops.H_ki[i, j, k]
    return T, perm


def permutation_matrix(perm: np.ndarray) -> np.ndarray:
    P = np.zeros((len(perm), len(perm)))
    P[np.arange(len(perm)), perm] = 1.0
    return P
