"""Neural dynamic signatures: per-neuron mean membrane traces.

The NDS of neuron ``i`` is the mean over a clean dataset of its post-step
membrane potential ``u_i(t|x)`` for ``t = 0..T-1``, taken from a LIF
network. It is stored per layer as a ``[T, n]`` array.

File format (JSON)::

    {"magic": "HOSNN-NDS", "version": 1, "horizon": T, "dt": 1.0,
     "sizes": [n_in, n_1, ...], "sample_count": N,
     "source_checkpoint_id": "...", "layers": [[[...T x n...]], ...]}
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from hosnn.errors import BadMagicError, ConfigError, CorruptFileError, TopologyError, VersionError
from hosnn.network import ForwardMode, Network, average_firing_rate, forward

NDS_MAGIC = "HOSNN-NDS"
NDS_VERSION = 1


@dataclass
class Nds:
    layers: list  # per layer [T, n]
    sample_count: int
    source_checkpoint_id: str
    sizes: tuple
    dt: float = 1.0

    @property
    def horizon(self) -> int:
        return self.layers[0].shape[0]

    def check_compatible(self, net: Network, horizon: Optional[int] = None):
        if tuple(self.sizes) != tuple(net.sizes):
            raise TopologyError(f"NDS topology {tuple(self.sizes)} does not match network {net.sizes}")
        if horizon is not None and horizon != self.horizon:
            raise TopologyError(f"NDS horizon {self.horizon} does not match requested T={horizon}")
        if self.dt != net.dt:
            raise TopologyError(f"NDS dt {self.dt} does not match network dt {net.dt}")

    def allclose(self, other: "Nds", rtol=0.0, atol=0.0) -> bool:
        return len(self.layers) == len(other.layers) and all(
            a.shape == b.shape and np.allclose(a, b, rtol=rtol, atol=atol) for a, b in zip(self.layers, other.layers)
        )


def _inputs(dataset) -> np.ndarray:
    x = getattr(dataset, "x", dataset)
    return np.atleast_2d(np.asarray(x, dtype=float))


def _partial_means(net: Network, x: np.ndarray, horizon: int, batch_size: int):
    """Streaming mean over ``x`` in batches; returns (means, count)."""
    means = [np.zeros((horizon, n)) for n in net.sizes[1:]]
    count = 0
    for start in range(0, len(x), batch_size):
        trace, _ = forward(net, x[start:start + batch_size], ForwardMode.lif(), horizon)
        nb = trace.batch_size
        w = nb / (count + nb)
        for m, lt in zip(means, trace.layers):
            m += (lt.u.mean(axis=1) - m) * w
        count += nb
    return means, count


def _merge(p, q):
    (mp, np_), (mq, nq) = p, q
    n = np_ + nq
    return [a + (b - a) * (nq / n) for a, b in zip(mp, mq)], n


def extract_nds(net: Network, dataset, horizon: int = 5, batch_size: int = 256, shards: int = 1) -> Nds:
    """Mean LIF membrane trace of every neuron over ``dataset``.

    With ``shards > 1`` the data are split into contiguous shards whose
    partial means are combined by a fixed pairwise tree, so the result does
    not depend on how the shards are scheduled.
    """
    x = _inputs(dataset)
    if len(x) == 0:
        raise ConfigError("cannot extract an NDS from an empty dataset")
    pieces = [p for p in np.array_split(x, max(1, min(shards, len(x)))) if len(p)]
    parts = [_partial_means(net, p, horizon, batch_size) for p in pieces]
    while len(parts) > 1:
        merged = [_merge(parts[i], parts[i + 1]) for i in range(0, len(parts) - 1, 2)]
        if len(parts) % 2:
            merged.append(parts[-1])
        parts = merged
    means, count = parts[0]
    return Nds(means, count, net.fingerprint(), net.sizes, net.dt)


def residual_check(nds: Nds, net: Network, dataset, batch_size: int = 256) -> dict:
    """How well the NDS satisfies its mean-field dynamic equation.

    Evaluates, per layer, ``tau_m * du*/dt - (-u* + R I* - tau_m r* V_th)``
    with the dataset-mean input current ``I*`` and the mean firing rate
    ``r*`` (spike count per unit time). Diagnostic only: the rate
    substitution for the spike train is an approximation, so the residual
    is reported, never asserted.
    """
    nds.check_compatible(net)
    x = _inputs(dataset)
    horizon = nds.horizon
    sums_i = [np.zeros((horizon, n)) for n in net.sizes[1:]]
    sums_r = [np.zeros(n) for n in net.sizes[1:]]
    for start in range(0, len(x), batch_size):
        trace, _ = forward(net, x[start:start + batch_size], ForwardMode.lif(), horizon)
        drive = trace.inputs
        for li, (layer, lt) in enumerate(zip(net.layers, trace.layers)):
            sums_i[li] += np.einsum("tbi,oi->to", drive, layer.weights)
            sums_r[li] += average_firing_rate(lt.s, horizon).sum(axis=0) / net.dt
            drive = lt.a
    report = {"layers": []}
    for li, layer in enumerate(net.layers):
        p = layer.params
        i_star = sums_i[li] / len(x)
        r_star = sums_r[li] / len(x)
        u = nds.layers[li]
        u_prev = np.vstack([np.zeros((1, u.shape[1])), u[:-1]])
        lhs = p.tau_m * (u - u_prev) / net.dt
        rhs = -u_prev + p.resistance * i_star - p.tau_m * r_star * p.v_th0
        res = lhs - rhs
        scale = np.sqrt(np.mean(lhs ** 2)) + 1e-12
        report["layers"].append(
            {"residual": res, "rms": float(np.sqrt(np.mean(res ** 2))), "relative_rms": float(np.sqrt(np.mean(res ** 2)) / scale),
             "mean_current": i_star, "mean_rate": r_star}
        )
    return report


# -- io ----------------------------------------------------------------------


def nds_to_dict(nds: Nds) -> dict:
    return {
        "magic": NDS_MAGIC,
        "version": NDS_VERSION,
        "horizon": nds.horizon,
        "dt": nds.dt,
        "sizes": list(nds.sizes),
        "sample_count": nds.sample_count,
        "source_checkpoint_id": nds.source_checkpoint_id,
        "layers": [layer.tolist() for layer in nds.layers],
    }


def nds_from_dict(doc) -> Nds:
    if not isinstance(doc, dict) or doc.get("magic") != NDS_MAGIC:
        raise BadMagicError("not an NDS file")
    if doc.get("version") != NDS_VERSION:
        raise VersionError(f"unsupported NDS version {doc.get('version')!r}")
    try:
        layers = [np.array(l, dtype=float) for l in doc["layers"]]
        sizes = tuple(int(s) for s in doc["sizes"])
        horizon = int(doc["horizon"])
        nds = Nds(layers, int(doc["sample_count"]), str(doc["source_checkpoint_id"]), sizes, float(doc["dt"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptFileError(f"malformed NDS file: {exc}") from exc
    if len(layers) != len(sizes) - 1 or any(l.shape != (horizon, n) for l, n in zip(layers, sizes[1:])):
        raise CorruptFileError("NDS layer arrays disagree with the declared sizes")
    return nds


def save_nds(nds: Nds, path) -> None:
    Path(path).write_text(json.dumps(nds_to_dict(nds)))


def load_nds(path, net: Optional[Network] = None, horizon: Optional[int] = None) -> Nds:
    """Load an NDS; if ``net`` is given, reject it unless the topology matches."""
    try:
        doc = json.loads(Path(path).read_text())
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise CorruptFileError(f"{path}: {exc}") from exc
    nds = nds_from_dict(doc)
    if net is not None:
        nds.check_compatible(net, horizon)
    return nds
