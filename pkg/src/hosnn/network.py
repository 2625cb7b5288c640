"""Feed-forward spiking networks of dense LIF / TA-LIF layers.

A network is unrolled over ``T`` timesteps. At every step each layer
receives ``W @ a_prev[t]`` where ``a_prev[t]`` is the post-synaptic current
of the layer below after its own update at the same step (the first layer
sees the encoded input currents). The read-out is the time-summed PSC of
the output layer.

Checkpoint format (JSON, UTF-8)::

    {"magic": "HOSNN-NET", "version": 1, "dt": 1.0,
     "threshold_order": "update_then_fire",
     "layers": [{"weights": [[...]], "theta": [...],
                 "params": {"tau_m": 5.0, "tau_s": 3.0, "v_th0": 1.0,
                            "resistance": 1.0}}, ...]}

Floats are written with ``repr`` precision, so a round trip is lossless.
"""

from __future__ import annotations

import enum
import hashlib
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from hosnn import dynamics
from hosnn.dynamics import NeuronParams, UPDATE_THEN_FIRE, THRESHOLD_ORDERS
from hosnn.errors import (
    BadMagicError,
    ConfigError,
    CorruptFileError,
    NumericDomainError,
    TopologyError,
    VersionError,
)

CHECKPOINT_MAGIC = "HOSNN-NET"
CHECKPOINT_VERSION = 1


@dataclass
class DenseLayer:
    weights: np.ndarray  # [out, in]
    theta: np.ndarray  # [out], >= 0
    params: NeuronParams = field(default_factory=NeuronParams)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.theta = np.broadcast_to(np.asarray(self.theta, dtype=float), (self.weights.shape[0],)).copy()
        if self.weights.ndim != 2:
            raise ConfigError("weights must be a 2-D [out, in] matrix")
        if np.any(self.theta < 0):
            raise ConfigError("theta must be non-negative")

    @property
    def n_in(self) -> int:
        return self.weights.shape[1]

    @property
    def n_out(self) -> int:
        return self.weights.shape[0]


@dataclass
class Network:
    layers: list
    dt: float = 1.0
    threshold_order: str = UPDATE_THEN_FIRE

    def __post_init__(self):
        if not self.layers:
            raise ConfigError("network needs at least one layer")
        for lower, upper in zip(self.layers, self.layers[1:]):
            if upper.n_in != lower.n_out:
                raise TopologyError(f"layer input {upper.n_in} does not match previous output {lower.n_out}")
        if self.threshold_order not in THRESHOLD_ORDERS:
            raise ConfigError(f"unknown threshold order {self.threshold_order!r}")
        if not self.dt > 0:
            raise ConfigError("dt must be positive")

    @classmethod
    def init(
        cls,
        sizes: Sequence[int],
        rng: np.random.Generator,
        params: Optional[NeuronParams] = None,
        theta: float = 0.0,
        gain: float = 3.0,
        **kwargs,
    ) -> "Network":
        """Gaussian init with std ``gain / sqrt(fan_in)``."""
        params = params or NeuronParams()
        layers = [
            DenseLayer(rng.normal(0.0, gain / np.sqrt(n_in), size=(n_out, n_in)), np.full(n_out, theta), params)
            for n_in, n_out in zip(sizes[:-1], sizes[1:])
        ]
        return cls(layers, **kwargs)

    @property
    def sizes(self) -> tuple:
        return (self.layers[0].n_in,) + tuple(layer.n_out for layer in self.layers)

    def copy(self) -> "Network":
        layers = [DenseLayer(l.weights.copy(), l.theta.copy(), l.params) for l in self.layers]
        return replace(self, layers=layers)

    def fingerprint(self) -> str:
        """Content hash of topology, weights, and theta."""
        h = hashlib.sha256(repr(self.sizes).encode())
        for layer in self.layers:
            h.update(np.ascontiguousarray(layer.weights).tobytes())
            h.update(np.ascontiguousarray(layer.theta).tobytes())
        return h.hexdigest()[:16]


class ModeKind(enum.Enum):
    LIF = "lif"
    TALIF = "talif"  # live threshold adaptation
    TALIF_FROZEN = "talif_frozen"  # V_th(t) = V_th(0), error still recorded


@dataclass(frozen=True)
class ForwardMode:
    kind: ModeKind = ModeKind.LIF
    nds: Optional[object] = None

    @classmethod
    def lif(cls):
        return cls(ModeKind.LIF)

    @classmethod
    def talif(cls, nds):
        return cls(ModeKind.TALIF, nds)

    @classmethod
    def frozen(cls, nds):
        return cls(ModeKind.TALIF_FROZEN, nds)

    @property
    def adaptive(self) -> bool:
        return self.kind is ModeKind.TALIF

    def check(self, net: Network, horizon: int):
        if self.kind is ModeKind.LIF:
            return
        if self.nds is None:
            raise ConfigError(f"{self.kind.value} mode requires an NDS")
        self.nds.check_compatible(net, horizon)


@dataclass
class LayerTrace:
    """Per-timestep records of one layer; every array is [T, batch, n]."""

    u: np.ndarray  # post-reset membrane potential
    u_pre: np.ndarray  # pre-reset potential, compared against v_th
    v_th: np.ndarray  # threshold used for the firing comparison
    s: np.ndarray  # spikes (0/1, or soft activations)
    a: np.ndarray  # post-synaptic current
    error: Optional[np.ndarray] = None  # u - nds in TA-LIF modes


@dataclass
class NetworkTrace:
    layers: list
    inputs: np.ndarray  # [T, batch, n_in]
    horizon: int
    mode: ForwardMode
    soft: bool = False

    @property
    def batch_size(self) -> int:
        return self.inputs.shape[1]


def _as_input_sequence(x, horizon: int, n_in: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim == 2:
        x = np.broadcast_to(x, (horizon,) + x.shape)
    if x.ndim != 3 or x.shape[0] != horizon or x.shape[2] != n_in:
        raise TopologyError(f"input of shape {x.shape} incompatible with n_in={n_in}, T={horizon}")
    return x


def forward(
    net: Network,
    input_currents,
    mode: ForwardMode = ForwardMode(),
    horizon: int = 5,
    record: bool = True,
    soft: bool = False,
):
    """Run the network for ``horizon`` steps.

    ``input_currents`` is ``[n_in]``, ``[batch, n_in]`` (held constant over
    time) or ``[T, batch, n_in]``. Returns ``(trace, logits)``; ``trace`` is
    ``None`` when ``record`` is false. ``soft`` replaces hard spikes by the
    logistic surrogate (smooth relaxation used for gradient checks).
    """
    if horizon < 1:
        raise ConfigError("horizon must be >= 1")
    mode.check(net, horizon)
    x = _as_input_sequence(input_currents, horizon, net.sizes[0])
    batch = x.shape[1]
    dt = net.dt
    adaptive = mode.adaptive
    fire_first = net.threshold_order != UPDATE_THEN_FIRE
    nds_layers = mode.nds.layers if mode.nds is not None else None

    states = []
    for layer in net.layers:
        n = layer.n_out
        states.append([np.zeros((batch, n)), np.zeros((batch, n)), np.full((batch, n), layer.params.v_th0)])
    recs = None
    if record:
        recs = [
            {k: np.empty((horizon, batch, layer.n_out)) for k in ("u", "u_pre", "v_th", "s", "a")}
            for layer in net.layers
        ]
    logits = np.zeros((batch, net.sizes[-1]))

    for t in range(horizon):
        drive = x[t]
        for li, layer in enumerate(net.layers):
            u, a, v = states[li]
            current = drive @ layer.weights.T
            u_pre = dynamics.integrate(u, current, layer.params, dt)
            if adaptive:
                prev_nds = nds_layers[li][t - 1] if t > 0 else 0.0
                v_new = dynamics.threshold_update(v, u, prev_nds, layer.theta, dt)
                v_fire = v if fire_first else v_new
            else:
                v_new = v_fire = v
            s, u_new = dynamics.fire(u_pre, v_fire, soft=soft)
            s = np.asarray(s, dtype=float)
            a_new = a + (dt / layer.params.tau_s) * (-a + s / dt)
            states[li] = [u_new, a_new, v_new]
            if record:
                r = recs[li]
                r["u"][t], r["u_pre"][t], r["v_th"][t], r["s"][t], r["a"][t] = u_new, u_pre, v_fire, s, a_new
            drive = a_new
        logits += drive

    if not np.all(np.isfinite(logits)):
        raise NumericDomainError("non-finite network output")
    trace = None
    if record:
        layers = []
        for li, r in enumerate(recs):
            err = None
            if mode.kind is not ModeKind.LIF:
                err = r["u"] - nds_layers[li][:, None, :]
            layers.append(LayerTrace(error=err, **r))
        trace = NetworkTrace(layers, x, horizon, mode, soft)
    return trace, logits


def predict(net: Network, x, mode: ForwardMode = ForwardMode(), horizon: int = 5) -> np.ndarray:
    return forward(net, x, mode, horizon, record=False)[1].argmax(axis=1)


def mem_error_loss(trace: NetworkTrace, nds) -> float:
    """Sum over neurons, timesteps, and batch of 0.5 * (u - u*)^2."""
    if len(trace.layers) != len(nds.layers):
        raise TopologyError("trace and NDS have different depths")
    total = 0.0
    for lt, ref in zip(trace.layers, nds.layers):
        if lt.u.shape[0] != ref.shape[0] or lt.u.shape[2] != ref.shape[1]:
            raise TopologyError(f"trace layer {lt.u.shape} incompatible with NDS layer {ref.shape}")
        total += 0.5 * float(np.sum((lt.u - ref[:, None, :]) ** 2))
    return total


def average_firing_rate(spikes, horizon: int):
    """Spike count over ``horizon``; time is the leading axis."""
    if horizon <= 0:
        raise ConfigError("horizon must be positive")
    return np.sum(np.asarray(spikes, dtype=float), axis=0) / horizon


# -- checkpoints -------------------------------------------------------------


def network_to_dict(net: Network) -> dict:
    return {
        "magic": CHECKPOINT_MAGIC,
        "version": CHECKPOINT_VERSION,
        "dt": net.dt,
        "threshold_order": net.threshold_order,
        "layers": [
            {
                "weights": layer.weights.tolist(),
                "theta": layer.theta.tolist(),
                "params": {
                    "tau_m": layer.params.tau_m,
                    "tau_s": layer.params.tau_s,
                    "v_th0": layer.params.v_th0,
                    "resistance": layer.params.resistance,
                },
            }
            for layer in net.layers
        ],
    }


def network_from_dict(doc: dict) -> Network:
    if not isinstance(doc, dict) or doc.get("magic") != CHECKPOINT_MAGIC:
        raise BadMagicError("not a network checkpoint")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise VersionError(f"unsupported checkpoint version {doc.get('version')!r}")
    try:
        layers = [
            DenseLayer(np.array(l["weights"], dtype=float), np.array(l["theta"], dtype=float), NeuronParams(**l["params"]))
            for l in doc["layers"]
        ]
        return Network(layers, dt=float(doc["dt"]), threshold_order=doc["threshold_order"])
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise CorruptFileError(f"malformed checkpoint: {exc}") from exc


def save_network(net: Network, path) -> None:
    Path(path).write_text(json.dumps(network_to_dict(net)))


def load_network(path) -> Network:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise CorruptFileError(f"{path}: {exc}") from exc
    return network_from_dict(doc)
