import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hosnn.data import synth_blobs
from hosnn.dynamics import FIRE_THEN_UPDATE, UPDATE_THEN_FIRE
from hosnn.errors import ConfigError, DivergenceError, TopologyError
from hosnn.network import DenseLayer, ForwardMode, Network, forward
from hosnn.nds import extract_nds
from hosnn.training import (
    Adam,
    AdversarialTraining,
    TrainConfig,
    backward,
    cosine_lr,
    loss_and_grad,
    softmax_xent,
    train,
    write_metrics_csv,
)

from oracles import max_fd_error, near_threshold, rel_err, torch_gradients


def random_case(seed, sizes=(4, 5, 3), horizon=4, order=UPDATE_THEN_FIRE, kind="talif"):
    rng = np.random.default_rng(seed)
    net = Network.init(list(sizes), rng, gain=rng.uniform(2, 5), threshold_order=order)
    for layer in net.layers:
        layer.theta[:] = rng.uniform(0, 2, layer.n_out)
    nds = extract_nds(net, rng.uniform(size=(8, sizes[0])), horizon)
    mode = {"talif": ForwardMode.talif(nds), "frozen": ForwardMode.frozen(nds), "lif": ForwardMode.lif()}[kind]
    x = rng.uniform(size=(3, sizes[0]))
    y = rng.integers(0, sizes[-1], size=3)
    return net, x, y, mode


def test_softmax_xent_gradient():
    logits = np.array([[1.0, 2.0, 0.5], [0.0, 0.0, 0.0]])
    loss, g = softmax_xent(logits, [1, 2], scale=2.0)
    h = 1e-6
    for idx in np.ndindex(logits.shape):
        up, down = logits.copy(), logits.copy()
        up[idx] += h
        down[idx] -= h
        fd = (softmax_xent(up, [1, 2], 2.0)[0] - softmax_xent(down, [1, 2], 2.0)[0]) / (2 * h)
        assert g[idx] == pytest.approx(fd, rel=1e-6, abs=1e-9)
    assert loss == pytest.approx(np.mean([-np.log(np.exp(4) / (np.exp(2) + np.exp(4) + np.exp(1))), np.log(3)]))


@pytest.mark.parametrize("order", [UPDATE_THEN_FIRE, FIRE_THEN_UPDATE])
@pytest.mark.parametrize("kind", ["talif", "frozen", "lif"])
def test_backward_matches_finite_differences_on_soft_forward(order, kind):
    net, x, y, mode = random_case(11, order=order, kind=kind)
    assert max_fd_error(net, x, y, mode, 4) < 1e-3


def test_hand_network_finite_differences():
    # 2-2-2, T=3, h=1e-4
    net = Network([DenseLayer([[2.0, 1.5], [-0.5, 3.0]], [0.4, 0.9]), DenseLayer([[4.0, -1.0], [1.0, 5.0]], [1.2, 0.2])])
    nds = extract_nds(net, np.array([[0.2, 0.8], [0.9, 0.1]]), horizon=3)
    x = np.array([[0.9, 0.6]])
    assert not near_threshold(net, x, ForwardMode.talif(nds), 3)
    assert max_fd_error(net, x, [1], ForwardMode.talif(nds), 3, h=1e-4) < 1e-3


@pytest.mark.parametrize("order", [UPDATE_THEN_FIRE, FIRE_THEN_UPDATE])
@pytest.mark.parametrize("kind", ["talif", "frozen", "lif"])
def test_backward_matches_torch_autograd_on_hard_forward(order, kind):
    pytest.importorskip("torch")
    for seed in range(5):
        net, x, y, mode = random_case(seed, sizes=(6, 7, 4), horizon=5, order=order, kind=kind)
        loss, _, g = loss_and_grad(net, x, y, mode, 5, input_grad=True)
        tw, tt, tx, tloss = torch_gradients(net, x, y, mode, 5)
        assert loss == pytest.approx(tloss, rel=1e-12)
        for a, b in zip(g.weights, tw):
            assert rel_err(a, b, floor=1e-10).max() < 1e-9
        for a, b in zip(g.theta, tt):
            assert rel_err(a, b, floor=1e-10).max() < 1e-9
        assert rel_err(g.inputs, tx, floor=1e-10).max() < 1e-9


def test_zero_weight_network_has_no_hidden_signal():
    net = Network([DenseLayer(np.zeros((3, 2)), 0.0), DenseLayer(np.zeros((2, 3)), 0.0)])
    _, _, g = loss_and_grad(net, np.ones((2, 2)), [0, 1], input_grad=True)
    assert np.all(g.weights[0] == 0) and np.all(g.weights[1] == 0) and np.all(g.inputs == 0)


def test_theta_gradient_zero_outside_adaptive_mode():
    for kind in ("lif", "frozen"):
        net, x, y, mode = random_case(3, kind=kind)
        _, _, g = loss_and_grad(net, x, y, mode, 4)
        assert all(np.all(t == 0) for t in g.theta)
    net, x, y, mode = random_case(3, kind="talif")
    _, _, g = loss_and_grad(net, x, y, mode, 4)
    assert any(np.any(t != 0) for t in g.theta)


def test_backward_rejects_mismatched_trace():
    net, x, y, mode = random_case(0)
    trace, _ = forward(net, x, mode, 4)
    other = Network.init([4, 6, 3], np.random.default_rng(0))
    with pytest.raises(TopologyError):
        backward(other, trace, y, mode)
    with pytest.raises(ConfigError):
        backward(net, trace, y, ForwardMode.lif())


def test_cosine_schedule_endpoints():
    assert cosine_lr(0, 100, 5e-4) == 5e-4
    assert cosine_lr(100, 100, 5e-4) <= 1e-3 * 5e-4
    assert cosine_lr(50, 100, 1.0) == pytest.approx(0.5)
    values = [cosine_lr(s, 30, 1.0) for s in range(31)]
    assert all(a >= b for a, b in zip(values, values[1:]))


def test_adam_first_step_is_lr_times_sign():
    p = np.array([1.0, -2.0, 3.0])
    opt = Adam([p])
    opt.step([np.array([0.5, -3.0, 0.0])], [0.1])
    np.testing.assert_allclose(p, [0.9, -1.9, 3.0], atol=1e-7)


def test_config_validation():
    with pytest.raises(ConfigError):
        TrainConfig(lr=0)
    with pytest.raises(ConfigError):
        TrainConfig(theta_lr_ratio=1.5)
    with pytest.raises(ConfigError):
        AdversarialTraining(eps=-1)


def smoke_set(seed=0):
    return synth_blobs(2, 100, 20, separation=4.0, seed=seed)


def test_smoke_benchmark_reaches_95_percent():
    ds = smoke_set()
    net = Network.init([20, 32, 2], np.random.default_rng(0))
    _, metrics = train(net, ds, TrainConfig(lr=2e-2, epochs=50, seed=0))
    assert max(r["accuracy"] for r in metrics) >= 0.95


def test_zero_epochs_returns_equal_net():
    net = Network.init([20, 8, 2], np.random.default_rng(0))
    out, metrics = train(net, smoke_set(), TrainConfig(epochs=0))
    assert out.fingerprint() == net.fingerprint() and metrics == []
    assert out is not net


def test_training_is_deterministic(tmp_path):
    ds = smoke_set()
    net = Network.init([20, 8, 2], np.random.default_rng(0))
    cfg = TrainConfig(lr=1e-2, epochs=3, seed=4, adversarial=AdversarialTraining(eps=4 / 255))
    a, ma = train(net, ds, cfg)
    b, mb = train(net, ds, cfg)
    assert ma == mb and a.fingerprint() == b.fingerprint()
    write_metrics_csv(ma, tmp_path / "a.csv")
    write_metrics_csv(mb, tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert (tmp_path / "a.csv").read_text().splitlines()[0] == "epoch,split,loss,accuracy,lr"


def test_theta_stays_non_negative():
    ds = smoke_set()
    net = Network.init([20, 8, 2], np.random.default_rng(1), theta=1e-3)
    nds = extract_nds(net, ds)
    trained, _ = train(net, ds, TrainConfig(lr=5e-2, theta_lr_ratio=1.0, epochs=3), mode=ForwardMode.talif(nds))
    assert all(np.all(l.theta >= 0) for l in trained.layers)
    assert any(np.any(l.theta == 0) for l in trained.layers)  # the clamp was exercised


def test_small_lr_loss_non_increasing():
    ds = smoke_set()
    net = Network.init([20, 16, 2], np.random.default_rng(2))
    opt_net = net.copy()
    opt = Adam([l.weights for l in opt_net.layers])
    losses = []
    for _ in range(6):
        loss, _, g = loss_and_grad(opt_net, ds.x, ds.y)
        losses.append(loss)
        opt.step(g.weights, [1e-5] * len(g.weights))
    assert all(b <= a for a, b in zip(losses, losses[1:]))


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_detected():
    ds = smoke_set()
    net = Network.init([20, 4, 2], np.random.default_rng(0))
    with pytest.raises(DivergenceError):
        train(net, ds, TrainConfig(epochs=1, readout_scale=float("inf")))


def test_adversarial_mix_flag():
    ds = smoke_set()
    net = Network.init([20, 8, 2], np.random.default_rng(0))
    clean, _ = train(net, ds, TrainConfig(lr=1e-2, epochs=1, seed=0))
    none_mixed, _ = train(net, ds, TrainConfig(lr=1e-2, epochs=1, seed=0, adversarial=AdversarialTraining(mix=0.0)))
    half, _ = train(net, ds, TrainConfig(lr=1e-2, epochs=1, seed=0, adversarial=AdversarialTraining(eps=8 / 255, mix=0.5)))
    assert clean.fingerprint() == none_mixed.fingerprint() != half.fingerprint()


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 100_000), st.sampled_from([UPDATE_THEN_FIRE, FIRE_THEN_UPDATE]))
def test_gradient_check_property(seed, order):
    rng = np.random.default_rng(seed)
    sizes = (int(rng.integers(2, 6)), int(rng.integers(2, 7)), int(rng.integers(2, 5)))
    horizon = int(rng.integers(1, 5))
    net, x, y, mode = random_case(seed, sizes, horizon, order)
    if near_threshold(net, x, mode, horizon):
        return
    assert max_fd_error(net, x, y, mode, horizon) < 1e-3
