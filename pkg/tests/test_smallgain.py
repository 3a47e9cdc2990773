import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sg2contract.decomposition import BlockPartition
from sg2contract.gains import DELTA, ETA1, ETA2, GAMMA_KI, GAMMA_KJ, ChannelGain, GainTable, InterconnectionModel
from sg2contract.smallgain import (
    InfiniteGainError,
    assemble,
    certify_model,
    composite,
    equivalence_check,
    is_irreducible,
    pair_list,
    power_iteration,
    spectral_radius,
)


def rho(M):
    return float(np.max(np.abs(np.linalg.eigvals(M)))) if M.size else 0.0


def straddling_triple(rng, margin=1e-10):
    """Random nonnegative (Delta, Upsilon, Gamma) scaled to sit near rho = 1."""
    N = int(rng.integers(2, 6))
    P = int(rng.integers(1, 8))
    masks = [rng.random(s) < 0.6 for s in [(N, P), (P, N), (P, P)]]
    D0, U0, G0 = (rng.random(m.shape) * m for m in masks)

    def r(s):
        return rho(s * U0 @ (s * D0) + s * G0)

    if r(1e6) < 1:
        return None
    lo, hi = 0.0, 1e6
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if r(mid) < 1 else (lo, mid)
    s = hi * np.exp(rng.uniform(-0.3, 0.3))
    D, U, G = s * D0, s * U0, s * G0
    vals = [rho(U @ D + G), rho(composite(D, U, G)), rho(G)]
    if vals[2] < 1:
        vals.append(rho(D @ np.linalg.solve(np.eye(P) - G, U)))
    if any(abs(v - 1) < margin for v in vals):
        return None
    return D, U, G


def test_equivalent_conditions_500_triples():
    rng = np.random.default_rng(11)
    done = below = 0
    while done < 500:
        t = straddling_triple(rng)
        if t is None:
            continue
        c1, c2, c3 = equivalence_check(*t)
        assert c1 == c2 == c3
        done += 1
        below += c1
    assert 50 < below < 450  # actually straddles


def test_geometric_series():
    """rho(G) < 1 iff sum G^k converges; (I - G)^-1 is then nonnegative."""
    rng = np.random.default_rng(12)
    for _ in range(50):
        G = rng.random((4, 4)) * (rng.random((4, 4)) < 0.7)
        G *= rng.uniform(0.2, 1.8) / max(rho(G), 1e-12)
        if abs(rho(G) - 1) < 1e-6:
            continue
        if rho(G) < 1:
            S, term = np.eye(4), np.eye(4)
            for _ in range(5000):
                term = term @ G
                S += term
            np.testing.assert_allclose(S, np.linalg.inv(np.eye(4) - G), rtol=1e-6, atol=1e-9)
            assert np.all(np.linalg.inv(np.eye(4) - G) >= -1e-12)
        else:
            # terms do not vanish: ||G^k|| >= rho^k >= 1
            assert np.linalg.norm(np.linalg.matrix_power(G, 200), 2) >= 1.0


@settings(max_examples=100)
@given(st.integers(0, 2**32 - 1), st.integers(2, 6))
def test_spectral_radius_is_monotone(seed, n):
    rng = np.random.default_rng(seed)
    M = rng.random((n, n)) * (rng.random((n, n)) < 0.5)
    bigger = M + rng.random((n, n)) * (rng.random((n, n)) < 0.3)
    assert spectral_radius(bigger) >= spectral_radius(M) - 1e-12


@settings(max_examples=100)
@given(st.integers(0, 2**32 - 1), st.integers(1, 7))
def test_power_iteration_matches_eigensolver(seed, n):
    rng = np.random.default_rng(seed)
    M = rng.random((n, n)) + np.roll(np.eye(n), 1, axis=1)  # cycle keeps it irreducible
    assert is_irreducible(M)
    assert power_iteration(M) == pytest.approx(rho(M), rel=1e-8)
    spectral_radius(M, check=True)


def test_power_iteration_on_periodic_matrix():
    C = np.roll(np.eye(3), 1, axis=1)  # permutation: eigenvalues on the unit circle
    assert power_iteration(2 * C) == pytest.approx(2.0, rel=1e-10)


def test_reducible_and_negative():
    assert not is_irreducible(np.array([[1.0, 1.0], [0.0, 1.0]]))
    with pytest.raises(ValueError):
        spectral_radius(np.array([[-1.0]]))
    assert spectral_radius(np.zeros((0, 0))) == 0.0


def ring_table(g=0.5, R=2):
    """Synthetic gain table with every channel of a 3-block model set to g."""
    t = GainTable(3, R_ij={p: R for p in pair_list(3)}, R_i={i: R for i in range(3)})
    for i in range(3):
        for k in range(3):
            if k != i:
                t.channels[DELTA, i, k] = ChannelGain((DELTA, i, k), g)
    for i, j in pair_list(3):
        t.channels[ETA1, i, j] = ChannelGain((ETA1, i, j), g)
        t.channels[ETA2, i, j] = ChannelGain((ETA2, i, j), g)
        k = 3 - i - j
        t.channels[GAMMA_KJ, i, j, k] = ChannelGain((GAMMA_KJ, i, j, k), g)
        t.channels[GAMMA_KI, i, j, k] = ChannelGain((GAMMA_KI, i, j, k), g)
    return t


def test_assemble_layout():
    t = ring_table(g=1.0, R=1)
    t.channels[DELTA, 0, 2] = ChannelGain((DELTA, 0, 2), 3.0)
    t.channels[GAMMA_KJ, 0, 1, 2] = ChannelGain((GAMMA_KJ, 0, 1, 2), 2.0)
    t.channels[GAMMA_KI, 0, 1, 2] = ChannelGain((GAMMA_KI, 0, 1, 2), 5.0)
    m = assemble(t)
    pairs = m.pairs
    assert pairs == [(0, 1), (0, 2), (1, 2)]
    # Delta[i, pair containing i and k] = R_i delta_ik^2
    assert m.Delta[0, pairs.index((0, 2))] == 9.0
    assert m.Delta[0, pairs.index((1, 2))] == 0.0
    # row (i,j) = (0,1): column (1,2) is the (k,j) input, column (0,2) the (k,i) input
    r = pairs.index((0, 1))
    assert m.Gamma[r, pairs.index((1, 2))] == 4.0
    assert m.Gamma[r, pairs.index((0, 2))] == 25.0
    assert np.all(np.diag(m.Gamma) == 0)
    assert m.Upsilon[r].tolist() == [1.0, 1.0, 0.0]


def test_assemble_scaling_with_R():
    m1, m2 = assemble(ring_table(0.5, 1)), assemble(ring_table(0.5, 2))
    np.testing.assert_allclose(m2.Gamma, 2 * m1.Gamma)
    np.testing.assert_allclose(m2.loop, m2.Upsilon @ m2.Delta + m2.Gamma)


def test_infinite_gain_rejected():
    t = ring_table()
    t.channels[DELTA, 1, 0] = ChannelGain((DELTA, 1, 0), float("inf"))
    with pytest.raises(InfiniteGainError, match=r"delta\[2,1\]"):
        assemble(t)
    partial = assemble(t, allow_partial=True)
    assert partial.Delta[1, 0] == 0.0


def test_certify_simple_models():
    # block-diagonal stable model with weak coupling certifies, strong coupling does not
    def model(c):
        A = -2.0 * np.eye(4) + c * np.array([[0, 0, 1, 0], [0, 0, 0, 1], [1, 0, 0, 0], [0, 1, 0, 0.0]])
        return InterconnectionModel(BlockPartition((2, 2)), A[None], name=f"c{c}")

    weak = certify_model(model(0.1))
    assert weak.certified and weak.rho < 1
    strong = certify_model(model(5.0))
    assert not strong.certified
    blob = json.loads(weak.to_json())
    assert blob["verdict"] == "certified"
    assert blob["pairs"] == [[1, 2]]


def test_fail_fast_stops_early():
    A = -0.5 * np.eye(6)
    A[0:2, 2:4] = 3 * np.ones((2, 2))
    A[2:4, 4:6] = 3 * np.ones((2, 2))
    A[4:6, 0:2] = 3 * np.ones((2, 2))
    m = InterconnectionModel(BlockPartition((2, 2, 2)), A[None], name="hot")
    rep = certify_model(m, fail_fast=True)
    assert not rep.certified
    assert not rep.table.complete or rep.table.infinite_channels()
