"""Flat ``key = value`` run configuration.

One entry per line, ``#`` starts a comment, keys are dotted names from
``SCHEMA``. Unknown keys and unparsable values raise ``ConfigError``.
Lists are comma separated. ``HOSNN_OUT_DIR`` sets the default
``out_dir``.
"""

from __future__ import annotations

import os
from pathlib import Path

from hosnn.errors import ConfigError

OUT_DIR_ENV = "HOSNN_OUT_DIR"


def _bool(s: str) -> bool:
    low = s.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _ints(s: str) -> tuple:
    return tuple(int(p) for p in s.split(",") if p.strip())


def _floats(s: str) -> tuple:
    return tuple(float(p) for p in s.split(",") if p.strip())


def _strs(s: str) -> tuple:
    return tuple(p.strip() for p in s.split(",") if p.strip())


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(_fmt(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


# key -> (parser, default); a default of None means "unset"
SCHEMA = {
    "seed": (int, 0),
    "out_dir": (str, None),
    "horizon": (int, 5),
    "dataset": (str, "blobs"),  # blobs | fashion:train | fashion:test | idx:IMAGES,LABELS
    "dataset.limit": (int, 0),  # 0 keeps every sample
    "blobs.n_classes": (int, 2),
    "blobs.n_per_class": (int, 100),
    "blobs.dim": (int, 20),
    "blobs.separation": (float, 4.0),
    "net.hidden": (_ints, (32,)),
    "net.gain": (float, 3.0),
    "net.theta0": (float, 0.0),
    "checkpoint": (str, None),
    "nds": (str, None),
    "surrogate": (str, None),
    "train.mode": (str, "lif"),  # lif | frozen | live
    "train.lr": (float, 5e-4),
    "train.epochs": (int, 10),
    "train.batch_size": (int, 64),
    "train.theta_lr_ratio": (float, 0.1),
    "train.adv_eps_255": (int, 0),
    "train.adv_mix": (float, 1.0),
    "attack.family": (str, "pgd"),
    "attack.eps_255": (int, 8),
    "attack.alpha_255": (float, None),  # unset: eps / 3
    "attack.steps": (int, 7),
    "attack.random_start": (_bool, None),  # unset: family convention
    "eval.eps_grid": (_ints, (0, 2, 4, 6, 8, 16, 32, 64)),
    "eval.families": (_strs, ("fgsm", "pgd")),
    "eval.boxes": (_strs, ("white",)),
    "eval.limit": (int, 500),
    "stability.tau_m": (float, 1.0),
    "stability.r": (float, 1.0),
    "stability.theta": (float, 0.0),
    "stability.sigma": (float, 1.0),
    "stability.dt_sim": (float, 1e-3),
    "stability.horizon": (float, 10.0),
    "stability.n_trials": (int, 2000),
    "stability.output_every": (float, 0.1),
    "stability.band_thetas": (_floats, (0.0, 1.0)),
    "stability.band_trials": (int, 1000),
}


class RunConfig:
    """Resolved configuration: schema defaults overlaid by file and overrides."""

    def __init__(self, values=None):
        self._values = {k: d for k, (_, d) in SCHEMA.items()}
        if self._values["out_dir"] is None:
            self._values["out_dir"] = os.environ.get(OUT_DIR_ENV, "hosnn-out")
        for k, v in (values or {}).items():
            self.set(k, v)

    def set(self, key: str, value) -> None:
        if key not in SCHEMA:
            raise ConfigError(f"unknown config key {key!r}")
        parser = SCHEMA[key][0]
        if isinstance(value, str):
            text = value.strip()
            if text == "":
                self._values[key] = None
                return
            try:
                value = parser(text)
            except ValueError as exc:
                raise ConfigError(f"bad value for {key}: {value!r} ({exc})") from None
        self._values[key] = value

    def __getitem__(self, key: str):
        if key not in SCHEMA:
            raise ConfigError(f"unknown config key {key!r}")
        return self._values[key]

    def as_dict(self) -> dict:
        return dict(self._values)

    def dumps(self) -> str:
        lines = []
        for k in sorted(self._values):
            v = self._values[k]
            lines.append(f"{k} = {'' if v is None else _fmt(v)}")
        return "\n".join(lines) + "\n"

    def write(self, path) -> None:
        Path(path).write_text(self.dumps())


def parse_config(text: str) -> dict:
    out = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected 'key = value', got {raw!r}")
        key, value = (p.strip() for p in line.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(f"line {n}: unknown config key {key!r}")
        out[key] = value
    return out


def load_config(path=None, overrides=None) -> RunConfig:
    cfg = RunConfig()
    if path is not None:
        for k, v in parse_config(Path(path).read_text()).items():
            cfg.set(k, v)
    for k, v in (overrides or {}).items():
        cfg.set(k, v)
    return cfg
