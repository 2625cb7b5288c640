"""Backpropagation through time for the unrolled spiking network.

Per layer and step the forward graph is::

    I_t = W a_in[t]
    m_t = u_{t-1} + (dt/tau_m) (-u_{t-1} + R I_t)          pre-reset potential
    v_t = v_{t-1} + dt theta (u_{t-1} - u*_{t-1})            adaptive modes only
    s_t = H(m_t - vf_t)                                      vf_t = v_t, or v_{t-1}
    u_t = m_t - s_t vf_t                                     subtractive reset
    a_t = a_{t-1} + (dt/tau_s) (-a_{t-1} + s_t / dt)

The loss is softmax cross-entropy on ``scale * sum_t a_L[t]``, averaged
over the batch. In the backward pass ``ds/dm`` is the logistic surrogate
derivative and ``ds/dvf = -ds/dm``. The reset edge keeps both of its terms,
``du/dm = 1 - vf ds/dm`` and ``du/dvf = -s + vf ds/dm``: the hard spike
passes straight through and the surrogate supplies the slope.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from hosnn.dynamics import UPDATE_THEN_FIRE, surrogate_spike
from hosnn.errors import ConfigError, DivergenceError, TopologyError
from hosnn.network import ForwardMode, ModeKind, Network, NetworkTrace, forward


@dataclass
class GradientBundle:
    weights: list
    theta: list
    inputs: Optional[np.ndarray] = None  # [batch, n_in] (constant-input encoding)
    inputs_per_step: Optional[np.ndarray] = None  # [T, batch, n_in]


def softmax_xent(logits: np.ndarray, labels, scale: float = 1.0):
    """Mean cross-entropy and its gradient w.r.t. the (unscaled) logits."""
    labels = np.atleast_1d(np.asarray(labels, dtype=int))
    z = scale * logits
    z = z - z.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    b = len(labels)
    loss = -logp[np.arange(b), labels].mean()
    grad = np.exp(logp)
    grad[np.arange(b), labels] -= 1.0
    return float(loss), grad * (scale / b)


def backward(
    net: Network,
    trace: NetworkTrace,
    target_label,
    mode: Optional[ForwardMode] = None,
    readout_scale: float = 1.0,
    surrogate: bool = True,
    input_grad: bool = False,
) -> GradientBundle:
    """Reverse-time recursion through a recorded forward pass.

    ``surrogate=False`` uses the exact derivative of the hard step (zero
    almost everywhere); it exists so the rest of the chain can be checked
    against finite differences of the true forward map. On a soft trace
    the surrogate is the exact derivative either way.
    """
    mode = trace.mode if mode is None else mode
    if mode.kind is not trace.mode.kind:
        raise ConfigError("backward mode differs from the recorded forward mode")
    if len(trace.layers) != len(net.layers) or any(
        lt.u.shape[2] != layer.n_out for lt, layer in zip(trace.layers, net.layers)
    ):
        raise TopologyError("trace does not match network")
    horizon, batch = trace.horizon, trace.batch_size
    dt = net.dt
    adaptive = mode.adaptive
    update_first = net.threshold_order == UPDATE_THEN_FIRE
    logits = sum(trace.layers[-1].a[t] for t in range(horizon))
    _, g_logits = softmax_xent(logits, target_label, readout_scale)

    n_layers = len(net.layers)
    g_w = [np.zeros_like(layer.weights) for layer in net.layers]
    g_theta = [np.zeros_like(layer.theta) for layer in net.layers]
    gu_next = [np.zeros((batch, layer.n_out)) for layer in net.layers]
    ga_next = [np.zeros((batch, layer.n_out)) for layer in net.layers]
    gv_next = [np.zeros((batch, layer.n_out)) for layer in net.layers]
    g_x = np.zeros_like(trace.inputs) if input_grad else None

    for t in reversed(range(horizon)):
        g_above = g_logits
        for li in reversed(range(n_layers)):
            layer, lt = net.layers[li], trace.layers[li]
            p = layer.params
            k_m, k_s = dt / p.tau_m, dt / p.tau_s
            v, s = lt.v_th[t], lt.s[t]
            if surrogate or trace.soft:
                slope = surrogate_spike(lt.u_pre[t], v)[1]
            else:
                slope = 0.0
            ga = g_above + ga_next[li]
            gu = gu_next[li]
            gs = (k_s / dt) * ga - v * gu
            gm = gu + slope * gs
            gu_prev = (1.0 - k_m) * gm
            if adaptive:
                g_vfire = -s * gu - slope * gs
                if update_first:
                    gv = gv_next[li] + g_vfire
                    gv_next[li] = gv
                else:
                    gv = gv_next[li]
                    gv_next[li] = gv + g_vfire
                if t > 0:
                    g_theta[li] += dt * np.sum(gv * lt.error[t - 1], axis=0)
                    gu_prev = gu_prev + dt * layer.theta * gv
            gu_next[li] = gu_prev
            ga_next[li] = (1.0 - k_s) * ga
            g_current = (k_m * p.resistance) * gm
            drive = trace.inputs[t] if li == 0 else trace.layers[li - 1].a[t]
            g_w[li] += g_current.T @ drive
            g_above = g_current @ layer.weights
        if input_grad:
            g_x[t] = g_above

    bundle = GradientBundle(g_w, g_theta)
    if input_grad:
        bundle.inputs_per_step = g_x
        bundle.inputs = g_x.sum(axis=0)
    return bundle


def loss_and_grad(net, x, y, mode=ForwardMode(), horizon=5, readout_scale=1.0, input_grad=False, soft=False, surrogate=True):
    trace, logits = forward(net, x, mode, horizon, soft=soft)
    loss, _ = softmax_xent(logits, y, readout_scale)
    grads = backward(net, trace, y, mode, readout_scale, surrogate=surrogate, input_grad=input_grad)
    return loss, logits, grads


# -- optimisation ------------------------------------------------------------


def cosine_lr(step: float, total: float, base: float) -> float:
    """Cosine annealing from ``base`` at step 0 to 0 at ``total``."""
    if total <= 0:
        return base
    return 0.5 * base * (1.0 + math.cos(math.pi * min(step, total) / total))


class Adam:
    def __init__(self, params, betas=(0.9, 0.999), eps=1e-8):
        self.params = params
        self.b1, self.b2 = betas
        self.eps = eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads, lrs):
        """In-place update; ``lrs`` gives one learning rate per parameter."""
        self.t += 1
        c1 = 1.0 - self.b1 ** self.t
        c2 = 1.0 - self.b2 ** self.t
        for p, g, m, v, lr in zip(self.params, grads, self.m, self.v, lrs):
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * g * g
            p -= lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


@dataclass
class AdversarialTraining:
    eps: float = 2 / 255
    family: str = "fgsm"
    mix: float = 1.0  # fraction of every batch replaced by adversarial samples

    def __post_init__(self):
        if self.eps < 0:
            raise ConfigError("adversarial eps must be >= 0")
        if not 0.0 <= self.mix <= 1.0:
            raise ConfigError("mix must lie in [0, 1]")
        if self.family.lower() != "fgsm":
            raise ConfigError("only FGSM adversarial training is supported")


@dataclass
class TrainConfig:
    lr: float = 5e-4
    theta_lr_ratio: float = 0.1
    betas: tuple = (0.9, 0.999)
    batch_size: int = 64
    epochs: int = 10
    seed: int = 0
    horizon: int = 5
    readout_scale: float = 1.0
    adversarial: Optional[AdversarialTraining] = None

    def __post_init__(self):
        if not self.lr > 0:
            raise ConfigError("lr must be positive")
        if not 0.0 <= self.theta_lr_ratio <= 1.0:
            raise ConfigError("theta_lr_ratio must lie in [0, 1]")
        if self.batch_size < 1 or self.epochs < 0:
            raise ConfigError("batch_size must be >= 1 and epochs >= 0")


def evaluate_accuracy(net, x, y, mode=ForwardMode(), horizon=5, batch_size=500, readout_scale=1.0):
    """Returns (mean loss, accuracy in [0, 1])."""
    losses, correct = 0.0, 0
    for start in range(0, len(x), batch_size):
        xb, yb = x[start:start + batch_size], y[start:start + batch_size]
        _, logits = forward(net, xb, mode, horizon, record=False)
        losses += softmax_xent(logits, yb, readout_scale)[0] * len(yb)
        correct += int(np.sum(logits.argmax(axis=1) == yb))
    return losses / len(x), correct / len(x)


def train(net: Network, dataset, config: TrainConfig, mode: ForwardMode = ForwardMode(), eval_set=None):
    """Minibatch Adam with per-step cosine annealing.

    Returns ``(trained_copy, metrics)`` where ``metrics`` is a list of
    dicts with keys epoch, split, loss, accuracy, lr. The input network is
    never modified.
    """
    from hosnn.attacks import fgsm_examples

    net = net.copy()
    x, y = np.asarray(dataset.x, dtype=float), np.asarray(dataset.y, dtype=int)
    rng = np.random.default_rng(config.seed)
    n_batches = math.ceil(len(x) / config.batch_size)
    total = n_batches * config.epochs
    params = [l.weights for l in net.layers] + [l.theta for l in net.layers]
    opt = Adam(params, betas=config.betas)
    adv = config.adversarial
    metrics = []
    step = 0
    for epoch in range(config.epochs):
        lr_epoch = cosine_lr(step, total, config.lr)
        order = rng.permutation(len(x))
        loss_sum, correct = 0.0, 0
        for b in range(n_batches):
            idx = order[b * config.batch_size:(b + 1) * config.batch_size]
            xb, yb = x[idx], y[idx]
            if adv is not None and adv.eps > 0 and adv.mix > 0:
                n_adv = int(round(adv.mix * len(idx)))
                if n_adv:
                    xb = xb.copy()
                    xb[:n_adv] = fgsm_examples(net, xb[:n_adv], yb[:n_adv], adv.eps, mode, config.horizon, config.readout_scale)
            loss, logits, grads = loss_and_grad(net, xb, yb, mode, config.horizon, config.readout_scale)
            if not math.isfinite(loss):
                raise DivergenceError(f"non-finite loss at epoch {epoch}, batch {b}")
            lr = cosine_lr(step, total, config.lr)
            lrs = [lr] * len(net.layers) + [lr * config.theta_lr_ratio] * len(net.layers)
            opt.step(grads.weights + grads.theta, lrs)
            for layer in net.layers:
                np.maximum(layer.theta, 0.0, out=layer.theta)
            step += 1
            loss_sum += loss * len(idx)
            correct += int(np.sum(logits.argmax(axis=1) == yb))
        metrics.append({"epoch": epoch, "split": "train", "loss": loss_sum / len(x), "accuracy": correct / len(x), "lr": lr_epoch})
        if eval_set is not None:
            ev_loss, ev_acc = evaluate_accuracy(net, eval_set.x, eval_set.y, mode, config.horizon, readout_scale=config.readout_scale)
            metrics.append({"epoch": epoch, "split": "eval", "loss": ev_loss, "accuracy": ev_acc, "lr": lr_epoch})
    return net, metrics


METRIC_FIELDS = ("epoch", "split", "loss", "accuracy", "lr")


def write_metrics_csv(metrics, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=METRIC_FIELDS)
        w.writeheader()
        for row in metrics:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
