"""Second additive compounds, Kronecker products/sums and the vectorisations
that link the skew-symmetric matrix ODE ``X' = A X + X A^T`` to the compound
ODE ``v' = A^[2] v``.

Conventions
-----------
``vec`` is *row* vectorisation (``X.ravel()`` in C order).  ``skew_vec`` lists
the strict upper triangle row by row: ``x12, x13, ..., x1n, x23, ..., x(n-1)n``.
Index formulas are written with 1-based math and converted on storage.
"""
from __future__ import annotations

from functools import lru_cache
from math import comb

import numpy as np


def n_choose_2(n: int) -> int:
    return comb(n, 2)


def _square(A: np.ndarray, name: str = "A") -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"{name} must be square, got shape {A.shape}")
    return A


def kron(A, B) -> np.ndarray:
    """Kronecker product, entry ``(i*rB + k, j*cB + l) = A[i, j] * B[k, l]``."""
    return np.kron(np.atleast_2d(np.asarray(A, dtype=float)),
                   np.atleast_2d(np.asarray(B, dtype=float)))


def kron_sum(A, B) -> np.ndarray:
    """Kronecker sum ``A (+) B = A (x) I_m + I_n (x) B``."""
    A = _square(A, "A")
    B = _square(B, "B")
    n, m = A.shape[0], B.shape[0]
    return np.kron(A, np.eye(m)) + np.kron(np.eye(n), B)


def pair_index(i: int, j: int, n: int) -> int:
    """1-based position ``k(i, j)`` of ``x_ij`` (``i != j``) inside ``skew_vec``."""
    return abs(i - j) + comb(n, 2) - comb(n + 1 - min(i, j), 2)


@lru_cache(maxsize=None)
def _build_M(n: int) -> np.ndarray:
    """``M_n`` with ``vec(X) = M_n skew_vec(X)`` for skew ``X``; shape ``n^2 x C(n,2)``."""
    if n < 2:
        raise ValueError("build_M needs n >= 2")
    M = np.zeros((n * n, comb(n, 2)))
    for i in range(1, n + 1):
        for j in range(1, n + 1):
            if i != j:
                M[(i - 1) * n + j - 1, pair_index(i, j, n) - 1] = np.sign(j - i)
    return M


@lru_cache(maxsize=None)
def _build_L(n: int) -> np.ndarray:
    """``L_n`` with ``skew_vec(X) = L_n vec(X)``; shape ``C(n,2) x n^2``."""
    if n < 2:
        raise ValueError("build_L needs n >= 2")
    L = np.zeros((comb(n, 2), n * n))
    for i in range(1, n + 1):
        for j in range(i + 1, n + 1):
            L[pair_index(i, j, n) - 1, (i - 1) * n + j - 1] = 1.0
    return L


@lru_cache(maxsize=None)
def _build_Q(p: int, q: int) -> np.ndarray:
    """Permutation with ``vec(X.T) = Q vec(X)`` for ``X`` of shape ``p x q``."""
    if p < 1 or q < 1:
        raise ValueError("build_Q needs p, q >= 1")
    Q = np.zeros((p * q, p * q))
    for h in range(1, p + 1):
        for k in range(1, q + 1):
            Q[(k - 1) * p + h - 1, (h - 1) * q + k - 1] = 1.0
    return Q


def build_M(n: int) -> np.ndarray:
    return _build_M(n).copy()


def build_L(n: int) -> np.ndarray:
    return _build_L(n).copy()


def build_Q(p: int, q: int) -> np.ndarray:
    return _build_Q(p, q).copy()


def vec(X) -> np.ndarray:
    return np.asarray(X, dtype=float).ravel()


def antisymmetrize(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    return 0.5 * (X - X.T)


def skew_vec(X) -> np.ndarray:
    X = _square(X, "X")
    return X[np.triu_indices(X.shape[0], k=1)]


def skew_unvec(v, n: int) -> np.ndarray:
    v = np.asarray(v, dtype=float).ravel()
    if v.size != comb(n, 2):
        raise ValueError(f"expected {comb(n, 2)} entries for n={n}, got {v.size}")
    X = np.zeros((n, n))
    X[np.triu_indices(n, k=1)] = v
    return X - X.T


def additive_compound_2(A) -> np.ndarray:
    """Second additive compound ``A^[2] = L_n (A (+) A) M_n``.

    Its eigenvalues are the pairwise sums ``lambda_i + lambda_j`` (``i < j``).
    """
    A = _square(A)
    n = A.shape[0]
    if n < 2:
        raise ValueError("second additive compound needs n >= 2")
    return _build_L(n) @ kron_sum(A, A) @ _build_M(n)
