"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``python -m pytest tests/test_acceptance.py -v`` (or
``python tests/test_acceptance.py``); the summary lines appear under
"acceptance criteria" at the end of the pytest output.
"""
import time
import warnings

import numpy as np
import pytest
from conftest import D_GRID_9, hinf_sweep, random_stable, record

from sg2contract.compound import additive_compound_2, antisymmetrize, skew_vec
from sg2contract.decomposition import BlockPartition, PartitionedMatrix, assemble_block_generator
from sg2contract.odesim import CONVERGED, OSCILLATORY, classify_batch, empirical_l2_gain, integrate
from sg2contract.sdp import minimize_gain
from sg2contract.smallgain import equivalence_check
from sg2contract.thomas import (
    ThomasParams,
    black_curve,
    blue_curve,
    invariant_box,
    is_certified,
    simulate,
    stacked_vector_field,
    vector_field,
)
from test_smallgain import straddling_triple


def _random_partitioned(rng, n_max):
    n = int(rng.integers(2, n_max + 1))
    k = int(rng.integers(1, n + 1))
    cuts = np.sort(rng.choice(np.arange(1, n), size=k - 1, replace=False)) if k > 1 else []
    dims = tuple(int(x) for x in np.diff([0, *cuts, n]))
    return PartitionedMatrix(BlockPartition(dims), rng.standard_normal((n, n)))


def test_criterion_1_permutation_oracle():
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(200):
        A = _random_partitioned(rng, 8)
        T, perm = assemble_block_generator(A)
        A2 = additive_compound_2(A.matrix)
        worst = max(worst, float(np.abs(A2[np.ix_(perm, perm)] - T).max()))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-12 and elapsed < 10.0
    record(1, ok, f"200 instances, max |P A2 P^T - T| = {worst:.1e} (<= 1e-12), {elapsed:.2f}s (< 10s)")
    assert ok


def test_criterion_2_skew_ode_vs_compound_ode():
    rng = np.random.default_rng(102)
    worst = 0.0
    for _ in range(50):
        n = int(rng.integers(2, 7))
        A = rng.standard_normal((n, n))
        X0 = antisymmetrize(rng.standard_normal((n, n)))
        C = additive_compound_2(A)
        X = integrate(lambda X: A @ X + X @ A.T, X0, h=1e-3, T=1.0, antisymmetrize=True,
                      record_every=10)
        y = integrate(lambda y: C @ y, skew_vec(X0), h=1e-3, T=1.0, record_every=10)
        err = max(np.abs(skew_vec(Xk) - yk).max() for Xk, yk in zip(X.states, y.states))
        worst = max(worst, err / max(1.0, np.abs(y.states).max()))
    ok = worst <= 1e-6
    record(2, ok, f"50 systems, max relative trajectory gap on [0,1] = {worst:.1e} (<= 1e-6)")
    assert ok


def test_criterion_3_gain_oracle():
    rng = np.random.default_rng(103)
    worst_rel, worst_emp = 0.0, 0.0
    for _ in range(50):
        m = int(rng.integers(1, 7))
        p = int(rng.integers(1, 4))
        A, B = random_stable(rng, m), rng.standard_normal((m, p))
        ref = hinf_sweep(A, B)
        gamma = minimize_gain([A], [B]).gamma
        worst_rel = max(worst_rel, abs(gamma - ref) / ref)
        w = rng.uniform(0, 2.0, (4, p))
        ph = rng.uniform(0, 2 * np.pi, (4, p))
        amp = rng.standard_normal((4, p))
        ratio = empirical_l2_gain(A, B, lambda t: np.sum(amp * np.sin(w * t + ph), axis=0),
                                  T=30.0, h=1e-2)
        worst_emp = max(worst_emp, ratio / gamma)
    ok = worst_rel <= 0.01 and worst_emp <= 1.0
    record(3, ok, f"50 systems, max |gamma - H_inf sweep|/H_inf = {worst_rel:.1e} (<= 1e-2), "
                  f"max empirical/certified = {worst_emp:.3f} (<= 1)")
    assert ok


def test_criterion_4_equivalent_conditions():
    rng = np.random.default_rng(104)
    done = disagree = below = 0
    while done < 500:
        t = straddling_triple(rng, margin=1e-10)
        if t is None:
            continue
        c1, c2, c3 = equivalence_check(*t)
        disagree += not (c1 == c2 == c3)
        below += c1
        done += 1
    ok = disagree == 0 and 0 < below < 500
    record(4, ok, f"500 triples ({below} with rho < 1), disagreements = {disagree}")
    assert ok


def test_criterion_5_d0_threshold():
    t0 = time.perf_counter()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        [pt] = blue_curve([0.0])
    elapsed = time.perf_counter() - t0
    ok = pt.b is not None and abs(pt.b - 0.442) <= 0.02 and elapsed < 300
    record(5, ok, f"d=0 certification boundary b_min = {pt.b:.4f} (0.442 +- 0.02), {elapsed:.1f}s (< 300s)")
    assert ok


def test_criterion_6_black_curve(blue_curve_9):
    [zero] = black_curve([0.0])
    black = black_curve(D_GRID_9)
    gaps = [(pb.b - pk.b) if pb.b is not None and pk.b is not None else -np.inf
            for pb, pk in zip(blue_curve_9, black)]
    ok = abs(zero.b - 0.25) <= 1e-3 and min(gaps) >= 0
    record(6, ok, f"black(d=0) = {zero.b:.6f} (0.25 +- 1e-3); min over 9 d of blue - black = "
                  f"{min(gaps):.4f} (>= 0)")
    assert ok


@pytest.fixture(scope="module")
def spot_runs():
    out = {}
    for b, d in [(0.4, 0.6), (0.3, 0.6)]:
        out[b, d] = simulate(ThomasParams(b, d), n_traj=20, seed=0)
    return out


def test_criterion_7_simulation_spot_values(spot_runs):
    kinds_conv = [c.kind for c in spot_runs[0.4, 0.6][1]]
    kinds_osc = [c.kind for c in spot_runs[0.3, 0.6][1]]
    n_conv = kinds_conv.count(CONVERGED)
    n_osc = kinds_osc.count(OSCILLATORY)
    ok = n_conv == 20 and n_osc >= 1
    record(7, ok, f"(b=0.4, d=0.6): {n_conv}/20 converged; (b=0.3, d=0.6): {n_osc}/20 oscillatory (>= 1)")
    assert ok


@pytest.fixture(scope="module")
def soundness_points(blue_curve_9):
    pts = [(float(p.d), round(p.b + 0.05, 6)) for p in blue_curve_9 if p.b is not None]
    pts.append((0.0, 1.2))
    return pts[:10]


def test_criterion_8_soundness_sweep(soundness_points):
    params = [ThomasParams(b, d) for d, b in soundness_points]
    certified = [is_certified(p.b, p.d) for p in params]
    rng = np.random.default_rng(108)
    x0 = np.stack([invariant_box(p).sample(rng, 50) for p in params])
    tr = integrate(stacked_vector_field(params), x0, h=1e-2, T=500.0, record_every=10)
    bad = []
    for k, p in enumerate(params):
        f = vector_field(p)
        member = type(tr)(tr.times, tr.states[:, k], tr.h)
        kinds = [c.kind for c in classify_batch(member, f)]
        bad += [(p.d, p.b, kinds.index(x)) for x in kinds if x != CONVERGED][:1]
    ok = len(params) == 10 and all(certified) and not bad
    record(8, ok, f"{sum(certified)}/10 points certified, 500 trajectories, "
                  f"counterexamples = {len(bad)}")
    assert ok, bad


def test_criterion_9_invariant_box():
    settings = [(0.5, 1.0), (0.3, 0.6), (1.2, -0.8)]
    worst = -np.inf
    for i, (b, d) in enumerate(settings):
        p = ThomasParams(b, d)
        assert p.denominator > 0
        box = invariant_box(p)
        x0 = box.sample_boundary(np.random.default_rng(109 + i), 100)
        tr = integrate(vector_field(p), x0, h=1e-2, T=100.0)
        worst = max(worst, float((np.abs(tr.states) - box.bounds).max()))
    ok = worst <= 1e-9
    record(9, ok, f"3 settings x 100 boundary starts, T=100: max excursion beyond box = {worst:.1e}")
    assert ok


def test_step_halving_on_spot_runs(spot_runs):
    """Endpoint states move by < 1e-6 when h is halved."""
    for (b, d), (traj, _) in spot_runs.items():
        p = ThomasParams(b, d)
        x0 = traj.states[0]
        fine = integrate(vector_field(p), x0, h=5e-3, T=500.0, record_every=1000)
        assert np.abs(fine.final - traj.final).max() < 1e-6


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
