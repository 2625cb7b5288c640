"""L-infinity gradient attacks: FGSM, RFGSM, PGD, BIM, and transfer attacks.

Gradients are taken of the same softmax cross-entropy used for training,
through the same reverse-time recursion. Against a TA-LIF network in
``ForwardMode.talif`` the threshold dynamics lie on the differentiation
path, i.e. the attacker sees every ``V_th(t)``.

``sign(0)`` is 0, so a coordinate with zero gradient is left untouched.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from hosnn.errors import ConfigError
from hosnn.network import ForwardMode, Network, forward
from hosnn.training import backward

FAMILIES = ("fgsm", "rfgsm", "pgd", "bim")


@dataclass
class AttackConfig:
    family: str = "pgd"
    eps: float = 8 / 255
    alpha: Optional[float] = None  # defaults to eps / 3
    steps: int = 7
    clip: tuple = (0.0, 1.0)
    random_start: Optional[bool] = None  # defaults to True for pgd and rfgsm
    seed: int = 0

    def __post_init__(self):
        self.family = self.family.lower()
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown attack family {self.family!r}")
        if self.eps < 0:
            raise ConfigError("eps must be >= 0")
        if self.alpha is None:
            self.alpha = self.eps / 3
        if self.family in ("pgd", "bim") and self.eps > 0 and not self.alpha > 0:
            raise ConfigError("alpha must be positive for iterative attacks")
        if self.steps < 1:
            raise ConfigError("steps must be >= 1")
        if self.random_start is None:
            self.random_start = self.family in ("pgd", "rfgsm")
        if self.clip[0] > self.clip[1]:
            raise ConfigError("clip range is empty")


@dataclass
class AdversarialBatch:
    x_adv: np.ndarray
    x: np.ndarray
    y: np.ndarray
    linf: np.ndarray  # per-sample achieved L-inf distance


def input_gradient(net: Network, x, y, mode: ForwardMode = ForwardMode(), horizon: int = 5, readout_scale: float = 1.0, batch_size: int = 500):
    """Per-sample gradient of the cross-entropy w.r.t. the constant input currents.

    Row ``i`` is the gradient of sample ``i``'s own loss, so chunking does
    not change the result.
    """
    x = np.asarray(x, dtype=float)
    squeeze = x.ndim == 1
    xb = np.atleast_2d(x)
    y = np.atleast_1d(np.asarray(y, dtype=int))
    out = np.empty_like(xb)
    for start in range(0, len(xb), batch_size):
        sl = slice(start, start + batch_size)
        trace, _ = forward(net, xb[sl], mode, horizon)
        # backward() differentiates the chunk mean
        out[sl] = backward(net, trace, y[sl], mode, readout_scale, input_grad=True).inputs * len(xb[sl])
    return out[0] if squeeze else out


def _check_inputs(x, clip):
    if np.any(x < clip[0]) or np.any(x > clip[1]):
        raise ConfigError("clean inputs must lie in the clip range")


def _project(x_adv, x, eps, clip):
    return np.clip(np.clip(x_adv, x - eps, x + eps), clip[0], clip[1])


def _batch(x_adv, x, y):
    linf = np.abs(x_adv - x).reshape(len(x), -1).max(axis=1) if x.size else np.zeros(len(x))
    return AdversarialBatch(x_adv, x, y, linf)


def fgsm_examples(net, x, y, eps, mode=ForwardMode(), horizon=5, readout_scale=1.0, clip=(0.0, 1.0)):
    g = input_gradient(net, x, y, mode, horizon, readout_scale)
    return np.clip(x + eps * np.sign(g), clip[0], clip[1])


def fgsm(net, x, y, config: AttackConfig, mode=ForwardMode(), horizon=5, readout_scale=1.0) -> AdversarialBatch:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=int))
    _check_inputs(x, config.clip)
    if config.eps == 0:
        return _batch(x.copy(), x, y)
    return _batch(fgsm_examples(net, x, y, config.eps, mode, horizon, readout_scale, config.clip), x, y)


def pgd(net, x, y, config: AttackConfig, mode=ForwardMode(), horizon=5, readout_scale=1.0) -> AdversarialBatch:
    """``steps`` projected sign-gradient steps of size ``alpha`` inside the eps-ball."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=int))
    _check_inputs(x, config.clip)
    eps, lo, hi = config.eps, config.clip[0], config.clip[1]
    if eps == 0:
        return _batch(x.copy(), x, y)
    x_adv = x.copy()
    if config.random_start:
        rng = np.random.default_rng(config.seed)
        x_adv = np.clip(x + rng.uniform(-eps, eps, size=x.shape), lo, hi)
    for _ in range(config.steps):
        g = input_gradient(net, x_adv, y, mode, horizon, readout_scale)
        x_adv = _project(x_adv + config.alpha * np.sign(g), x, eps, config.clip)
    return _batch(x_adv, x, y)


def bim(net, x, y, config: AttackConfig, mode=ForwardMode(), horizon=5, readout_scale=1.0) -> AdversarialBatch:
    """PGD without a random start."""
    if config.random_start:
        config = AttackConfig(**{**config.__dict__, "random_start": False})
    return pgd(net, x, y, config, mode, horizon, readout_scale)


def rfgsm(net, x, y, config: AttackConfig, mode=ForwardMode(), horizon=5, readout_scale=1.0) -> AdversarialBatch:
    """Random-sign step of eps/2 followed by one gradient-sign step of eps/2."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=int))
    _check_inputs(x, config.clip)
    eps = config.eps
    if eps == 0:
        return _batch(x.copy(), x, y)
    half = eps / 2
    x_adv = x
    if config.random_start:
        rng = np.random.default_rng(config.seed)
        x_adv = np.clip(x + half * np.sign(rng.standard_normal(x.shape)), *config.clip)
    g = input_gradient(net, x_adv, y, mode, horizon, readout_scale)
    return _batch(_project(x_adv + half * np.sign(g), x, eps, config.clip), x, y)


ATTACKS = {"fgsm": fgsm, "rfgsm": rfgsm, "pgd": pgd, "bim": bim}


def run_attack(net, x, y, config: AttackConfig, mode=ForwardMode(), horizon=5, readout_scale=1.0) -> AdversarialBatch:
    return ATTACKS[config.family](net, x, y, config, mode, horizon, readout_scale)


def accuracy(net, x, y, mode=ForwardMode(), horizon=5, batch_size=500) -> float:
    y = np.atleast_1d(np.asarray(y, dtype=int))
    x = np.atleast_2d(x)
    correct = 0
    for start in range(0, len(x), batch_size):
        _, logits = forward(net, x[start:start + batch_size], mode, horizon, record=False)
        correct += int(np.sum(logits.argmax(axis=1) == y[start:start + batch_size]))
    return correct / len(y)


def transfer_attack(
    surrogate_net,
    target_net,
    x,
    y,
    config: AttackConfig,
    surrogate_mode=ForwardMode(),
    target_mode=ForwardMode(),
    horizon=5,
    readout_scale=1.0,
):
    """Craft white-box examples on ``surrogate_net``; return (target accuracy, batch)."""
    batch = run_attack(surrogate_net, x, y, config, surrogate_mode, horizon, readout_scale)
    return accuracy(target_net, batch.x_adv, batch.y, target_mode, horizon), batch
