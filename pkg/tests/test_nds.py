import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hosnn.errors import BadMagicError, ConfigError, CorruptFileError, TopologyError, VersionError
from hosnn.network import DenseLayer, Network, forward
from hosnn.nds import extract_nds, load_nds, nds_to_dict, residual_check, save_nds


def small_net(seed=0, sizes=(4, 6, 3)):
    return Network.init(list(sizes), np.random.default_rng(seed), gain=4.0)


def test_single_sample_is_its_own_trace():
    net = small_net()
    x = np.random.default_rng(1).uniform(size=(1, 4))
    nds = extract_nds(net, x, horizon=5)
    trace, _ = forward(net, x, horizon=5)
    for ref, lt in zip(nds.layers, trace.layers):
        assert np.array_equal(ref, lt.u[:, 0, :])
    assert nds.sample_count == 1 and nds.source_checkpoint_id == net.fingerprint()


def test_duplicate_sample_is_idempotent():
    net = small_net()
    x = np.random.default_rng(1).uniform(size=(1, 4))
    one = extract_nds(net, x)
    two = extract_nds(net, np.vstack([x, x]))
    assert two.allclose(one, rtol=1e-12, atol=1e-15)


def test_two_samples_hand_unrolled():
    # one neuron, weight 1, tau_m = 5: u grows by (x - u) / 5 and never reaches 1
    net = Network([DenseLayer([[1.0]], 0.0)])
    xs = [0.5, 0.25]
    traces = []
    for x in xs:
        u, tr = 0.0, []
        for _ in range(3):
            u = u + (x - u) / 5
            tr.append(u)
        traces.append(tr)
    expected = [(p + q) / 2 for p, q in zip(*traces)]
    nds = extract_nds(net, np.array(xs)[:, None], horizon=3)
    np.testing.assert_allclose(nds.layers[0][:, 0], expected, rtol=1e-15)


def test_empty_dataset_rejected():
    with pytest.raises(ConfigError):
        extract_nds(small_net(), np.zeros((0, 4)))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 40), st.integers(1, 7), st.integers(1, 5))
def test_streaming_equals_batch_and_order_free(seed, n, batch, shards):
    rng = np.random.default_rng(seed)
    net = small_net(seed)
    x = rng.uniform(size=(n, 4))
    trace, _ = forward(net, x, horizon=5)
    streamed = extract_nds(net, x, batch_size=batch, shards=shards)
    permuted = extract_nds(net, x[rng.permutation(n)], batch_size=batch)
    for ref, a, b, lt in zip(trace.layers, streamed.layers, permuted.layers, trace.layers):
        full = lt.u.mean(axis=1)
        np.testing.assert_allclose(a, full, rtol=1e-12, atol=1e-14)
        np.testing.assert_allclose(b, full, rtol=1e-12, atol=1e-14)
        assert np.all(np.isfinite(a)) and np.all(np.abs(a) <= np.abs(lt.u).max() + 1e-12)
    assert streamed.sample_count == n


def test_storage_is_n_by_t():
    nds = extract_nds(small_net(sizes=(4, 7, 3)), np.ones((3, 4)), horizon=6)
    assert [l.shape for l in nds.layers] == [(6, 7), (6, 3)]


def test_round_trip(tmp_path):
    net = small_net()
    nds = extract_nds(net, np.random.default_rng(2).uniform(size=(9, 4)))
    path = tmp_path / "nds.json"
    save_nds(nds, path)
    back = load_nds(path, net, 5)
    assert back.allclose(nds) and back.sample_count == 9 and back.sizes == nds.sizes


def test_load_errors(tmp_path):
    net = small_net()
    nds = extract_nds(net, np.ones((2, 4)))
    path = tmp_path / "nds.json"
    save_nds(nds, path)
    with pytest.raises(TopologyError):
        load_nds(path, small_net(sizes=(4, 5, 3)))
    with pytest.raises(TopologyError):
        load_nds(path, net, horizon=4)
    bad = tmp_path / "bad.json"
    bad.write_text(path.read_text()[: len(path.read_text()) // 2])
    with pytest.raises(CorruptFileError):
        load_nds(bad)
    import json

    doc = nds_to_dict(nds)
    bad.write_text(json.dumps({**doc, "version": 2}))
    with pytest.raises(VersionError):
        load_nds(bad)
    bad.write_text(json.dumps({**doc, "magic": "X"}))
    with pytest.raises(BadMagicError):
        load_nds(bad)
    bad.write_text(json.dumps({**doc, "sizes": [4, 6, 2]}))
    with pytest.raises(CorruptFileError):
        load_nds(bad)


def test_residual_check_reports_per_layer():
    net = small_net()
    x = np.random.default_rng(3).uniform(size=(20, 4))
    nds = extract_nds(net, x)
    rep = residual_check(nds, net, x)
    assert len(rep["layers"]) == 2
    for layer, n in zip(rep["layers"], (6, 3)):
        assert layer["residual"].shape == (5, n)
        assert np.isfinite(layer["rms"]) and layer["rms"] >= 0
