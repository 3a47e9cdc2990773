import json

import numpy as np
import pytest
from conftest import hinf_sweep, random_stable

from sg2contract.compound import additive_compound_2
from sg2contract.decomposition import BlockPartition
from sg2contract.gains import (
    DELTA,
    ETA1,
    ETA2,
    GAMMA_KI,
    GAMMA_KJ,
    InterconnectionModel,
    ModelError,
    channel_family,
    channel_keys,
    compute_gain_table,
    count_R,
    delta_gain,
    eta_gains,
    gamma_gains,
)
from sg2contract.thomas import ThomasParams, vertex_hulls


def single(partition, A, name="m"):
    return InterconnectionModel(BlockPartition(partition), np.asarray(A)[None], name=name)


@pytest.fixture(scope="module")
def thomas_model():
    return vertex_hulls(ThomasParams(1.0, 0.5))


def test_json_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    V = rng.standard_normal((3, 5, 5))
    V[:, 0:2, 2:5] = 0.0
    m = InterconnectionModel(BlockPartition((2, 3)), V, name="rt")
    path = tmp_path / "model.json"
    path.write_text(json.dumps(m.to_dict()))
    back = InterconnectionModel.from_json(path)
    np.testing.assert_array_equal(back.vertices, m.vertices)
    assert back.checksum() == m.checksum()
    assert "1,2" not in m.to_dict()["vertices"][0]["blocks"]


@pytest.mark.parametrize("data", [
    {"vertices": []},
    {"partition": [2], "vertices": []},
    {"partition": [2], "vertices": [{"blocks": {"1,1": [[1, 2, 3]]}}]},
    {"partition": [2], "vertices": [{"blocks": {"1,3": [[1, 0], [0, 1]]}}]},
    {"partition": [2], "vertices": [{"blocks": {"a": [[1, 0], [0, 1]]}}]},
    {"partition": [0], "vertices": [{"blocks": {}}]},
])
def test_malformed_models(data):
    with pytest.raises(ModelError):
        InterconnectionModel.from_dict(data)


def test_vertices_are_read_only(thomas_model):
    with pytest.raises(ValueError):
        thomas_model.vertices[0, 0, 0] = 1.0


def test_thomas_family_sizes(thomas_model):
    assert thomas_model.n_vertices == 512
    A, B = channel_family(thomas_model, (DELTA, 0, 1))
    assert len(A) == 8 and len(B) == 8
    A, B = channel_family(thomas_model, (ETA2, 0, 1))
    assert len(A) == 64
    # compounds of the projected vertices are the vertices of the compound hull
    assert any(np.allclose(a, additive_compound_2(thomas_model.vertex(0).block(0, 0)))
               for a in channel_family(thomas_model, (DELTA, 0, 1))[0])


def test_ring_structural_zeros(thomas_model):
    """Only couplings x1<-x4, x4<-x7, x7<-x1 exist, so most channels are zero."""
    table = compute_gain_table(thomas_model)
    nonzero = sorted(k for k, c in table.channels.items() if not c.structural_zero and k[0] in
                     (DELTA, ETA1, ETA2, GAMMA_KJ, GAMMA_KI))
    assert nonzero == sorted([
        (DELTA, 0, 1), (DELTA, 1, 2), (DELTA, 2, 0),
        (ETA2, 0, 1), (ETA1, 0, 2), (ETA2, 1, 2),
        (GAMMA_KI, 0, 1, 2), (GAMMA_KJ, 0, 2, 1), (GAMMA_KI, 1, 2, 0)])
    for k, c in table.channels.items():
        if c.structural_zero:
            assert c.gain == 0.0 and c.solves == 0
        else:
            assert 0 < c.gain < np.inf
    R_ij, R_i = count_R(thomas_model)
    assert R_i == {0: 1, 1: 1, 2: 1}
    assert R_ij == {(0, 1): 2, (0, 2): 2, (1, 2): 2}


def test_decoupled_has_no_inputs():
    m = vertex_hulls(ThomasParams(1.2, 0.0))
    R_ij, R_i = count_R(m)
    assert not any(R_ij.values()) and not any(R_i.values())


def test_delta_gain_decreases_in_b():
    gains = [delta_gain(vertex_hulls(ThomasParams(b, 0.5)), 0, 1).gain for b in (0.8, 1.0, 1.5)]
    assert all(np.isfinite(gains)) and gains[0] > gains[1] > gains[2] > 0


def test_delta_scalar_block():
    """n_i = 2: the compound of the diagonal block is the scalar a11 + a22."""
    A = np.array([[-1.0, 0.5, 0.3],
                  [0.2, -2.0, -0.4],
                  [0.1, 0.0, -1.0]])
    m = single((2, 1), A)
    s = A[0, 0] + A[1, 1]
    A_ik = A[0:2, 2:3]
    # skew_vec of the 2x2 block is x12; its input is a_{1k} X_{2k} - a_{2k} X_{1k}
    b = np.array([[-A_ik[1, 0], A_ik[0, 0]]])
    expected = np.linalg.norm(b) / abs(s)
    g = delta_gain(m, 0, 1).gain
    assert expected <= g <= expected * (1 + 1e-3) + 1e-3


def test_eta_and_gamma_match_frequency_sweep():
    rng = np.random.default_rng(4)
    A = random_stable(rng, 5, 1.0)
    m = single((2, 2, 1), A)
    for key in [(ETA1, 0, 1), (ETA2, 0, 1), (GAMMA_KJ, 0, 1, 2), (GAMMA_KI, 0, 2, 1)]:
        [Am], [Bm] = channel_family(m, key)
        ref = hinf_sweep(Am, Bm)
        if key[0] == ETA1:
            g = eta_gains(m, 0, 1)[0].gain
        elif key[0] == ETA2:
            g = eta_gains(m, 0, 1)[1].gain
        elif key[0] == GAMMA_KJ:
            g = gamma_gains(m, 0, 1, 2)[0].gain
        else:
            g = gamma_gains(m, 0, 2, 1)[1].gain
        assert abs(g - ref) <= 0.01 * ref


def test_argument_checks(thomas_model):
    with pytest.raises(ValueError):
        delta_gain(thomas_model, 0, 0)
    with pytest.raises(ValueError):
        eta_gains(thomas_model, 1, 0)
    with pytest.raises(ValueError):
        gamma_gains(thomas_model, 0, 1, 1)


def test_channel_keys_cover_all_equations():
    keys = channel_keys(single((2, 1, 3), -np.eye(6)))
    deltas = [k for k in keys if k[0] == DELTA]
    assert deltas == [(DELTA, 0, 1), (DELTA, 0, 2), (DELTA, 2, 0), (DELTA, 2, 1)]
    assert (ETA1, 0, 1) in keys and (ETA2, 0, 1) not in keys


def test_parallel_table_matches_serial(thomas_model):
    serial = compute_gain_table(thomas_model, use_cache=False)
    parallel = compute_gain_table(thomas_model, workers=2, use_cache=False)
    for k, c in serial.channels.items():
        assert parallel.channels[k].gain == pytest.approx(c.gain, rel=1e-9)
