"""Desk-scale experiment: clean LIF -> NDS -> adversarially trained LIF and HoSNN.

Every model starts from the same seeded initial weights, so the LIF and
HoSNN that get compared differ only in their neurons. The black-box
surrogate is a clean LIF network trained from an independent seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from hosnn.errors import ConfigError
from hosnn.evaluation import Model
from hosnn.nds import Nds, extract_nds
from hosnn.network import ForwardMode, Network
from hosnn.training import AdversarialTraining, TrainConfig, train

TRAIN_MODES = ("frozen", "live")


@dataclass
class DeskConfig:
    hidden: tuple = (128,)
    epochs: int = 15
    lr: float = 5e-3
    batch_size: int = 64
    horizon: int = 5
    theta0: float = 0.5
    train_mode: str = "frozen"  # HoSNN threshold handling during training
    adv_eps_255: int = 2
    gain: float = 3.0
    seed: int = 0
    surrogate_seed_offset: int = 1000

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        if self.train_mode not in TRAIN_MODES:
            raise ConfigError(f"train_mode must be one of {TRAIN_MODES}")
        if self.theta0 < 0 or self.adv_eps_255 < 0:
            raise ConfigError("theta0 and adv_eps_255 must be non-negative")


@dataclass
class DeskModels:
    lif_clean: Model
    lif: Model  # adversarially trained LIF
    hosnn: Model  # adversarially trained HoSNN, live thresholds at inference
    surrogate: Model
    nds: Nds
    metrics: dict = field(default_factory=dict)


def _train_config(cfg: DeskConfig, seed: int, adversarial: bool) -> TrainConfig:
    adv = AdversarialTraining(eps=cfg.adv_eps_255 / 255) if adversarial and cfg.adv_eps_255 > 0 else None
    return TrainConfig(lr=cfg.lr, batch_size=cfg.batch_size, epochs=cfg.epochs, seed=seed, horizon=cfg.horizon, adversarial=adv)


def run_desk(train_set, cfg: DeskConfig) -> DeskModels:
    sizes = [train_set.dim, *cfg.hidden, train_set.class_count]
    base = Network.init(sizes, np.random.default_rng(cfg.seed), gain=cfg.gain)
    lif_clean, m_clean = train(base, train_set, _train_config(cfg, cfg.seed, False))
    nds = extract_nds(lif_clean, train_set, cfg.horizon)
    lif, m_lif = train(base, train_set, _train_config(cfg, cfg.seed, True))

    start = base.copy()
    for layer in start.layers:
        layer.theta[:] = cfg.theta0
    mode = ForwardMode.frozen(nds) if cfg.train_mode == "frozen" else ForwardMode.talif(nds)
    hosnn, m_ho = train(start, train_set, _train_config(cfg, cfg.seed, True), mode=mode)

    s_seed = cfg.seed + cfg.surrogate_seed_offset
    s_base = Network.init(sizes, np.random.default_rng(s_seed), gain=cfg.gain)
    surrogate, m_sur = train(s_base, train_set, _train_config(cfg, s_seed, False))

    return DeskModels(
        lif_clean=Model("lif_clean", lif_clean, ForwardMode.lif()),
        lif=Model("lif", lif, ForwardMode.lif()),
        hosnn=Model("hosnn", hosnn, ForwardMode.talif(nds)),
        surrogate=Model("surrogate", surrogate, ForwardMode.lif()),
        nds=nds,
        metrics={"lif_clean": m_clean, "lif": m_lif, "hosnn": m_ho, "surrogate": m_sur},
    )
