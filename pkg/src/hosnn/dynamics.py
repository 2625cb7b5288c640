"""Discrete-time LIF / TA-LIF neuron updates.

All functions are pure and vectorised: scalars and numpy arrays of matching
shape are both accepted. Integration is explicit forward Euler; with
``dt = 1`` the membrane update reads ``u' = (1 - 1/tau_m) u + I / tau_m``.

The threshold of a TA-LIF neuron follows ``dV_th/dt = theta * (u - u*)``
where ``u*`` is the neural dynamic signature (NDS) value paired with the
pre-update membrane potential.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Union

import numpy as np

from hosnn.errors import ConfigError, NumericDomainError

ArrayLike = Union[float, np.ndarray]

#: slope of the logistic surrogate, sigma(x) = 1 / (1 + exp(-5 x))
SURROGATE_SLOPE = 5.0

UPDATE_THEN_FIRE = "update_then_fire"
FIRE_THEN_UPDATE = "fire_then_update"
THRESHOLD_ORDERS = (UPDATE_THEN_FIRE, FIRE_THEN_UPDATE)


@dataclass(frozen=True)
class NeuronParams:
    """Per-neuron constants. ``theta`` may be a scalar or a per-neuron vector."""

    tau_m: float = 5.0
    tau_s: float = 3.0
    theta: ArrayLike = 0.0
    v_th0: float = 1.0
    resistance: float = 1.0

    def __post_init__(self):
        if not self.tau_m > 0 or not self.tau_s > 0:
            raise ConfigError(f"time constants must be positive, got tau_m={self.tau_m}, tau_s={self.tau_s}")
        if not self.v_th0 > 0:
            raise ConfigError(f"initial threshold must be positive, got {self.v_th0}")
        if np.any(np.asarray(self.theta) < 0):
            raise ConfigError("theta must be non-negative")


@dataclass(frozen=True)
class NeuronState:
    u: ArrayLike = 0.0
    a: ArrayLike = 0.0
    v_th: ArrayLike = 1.0
    spiked: ArrayLike = False

    @classmethod
    def initial(cls, params: NeuronParams, shape=()) -> "NeuronState":
        zeros = np.zeros(shape) if shape else 0.0
        return cls(u=zeros, a=zeros, v_th=zeros + params.v_th0, spiked=np.zeros(shape, bool) if shape else False)


def _check_finite(*values):
    for v in values:
        if not np.all(np.isfinite(v)):
            raise NumericDomainError("non-finite value in neuron update")


def _check_dt(dt):
    if not dt > 0:
        raise ConfigError(f"dt must be positive, got {dt}")


def integrate(u, input_current, params: NeuronParams, dt: float = 1.0):
    """Leaky integration without firing: returns the pre-reset potential."""
    return u + (dt / params.tau_m) * (-u + params.resistance * input_current)


def fire(u_pre, v_th, soft: bool = False):
    """Threshold comparison and subtractive reset.

    Returns ``(spikes, u_post)``. With ``soft=True`` the hard step is
    replaced by the logistic surrogate itself; only used to build a
    smooth relaxation for gradient checking.
    """
    if soft:
        s = surrogate_spike(u_pre, v_th)[0]
    else:
        s = u_pre >= v_th
    return s, u_pre - s * v_th


def threshold_update(v_th, u, nds_value, theta, dt: float = 1.0):
    return v_th + dt * theta * (u - nds_value)


def lif_step(state: NeuronState, input_current, params: NeuronParams, dt: float = 1.0) -> NeuronState:
    _check_dt(dt)
    _check_finite(state.u, state.v_th, input_current)
    u_pre = integrate(state.u, input_current, params, dt)
    spiked, u = fire(u_pre, state.v_th)
    return replace(state, u=u, spiked=spiked)


def talif_step(
    state: NeuronState,
    input_current,
    nds_value,
    params: NeuronParams,
    dt: float = 1.0,
    order: str = UPDATE_THEN_FIRE,
) -> NeuronState:
    """One TA-LIF step.

    The threshold moves by ``dt * theta * (u - nds_value)`` using the
    membrane potential *before* this step's integration. By default the
    firing check uses the updated threshold; ``order=FIRE_THEN_UPDATE``
    compares against the old one and the update takes effect next step.
    """
    _check_dt(dt)
    _check_finite(state.u, state.v_th, input_current, nds_value)
    if order not in THRESHOLD_ORDERS:
        raise ConfigError(f"unknown threshold order {order!r}")
    v_new = threshold_update(state.v_th, state.u, nds_value, params.theta, dt)
    u_pre = integrate(state.u, input_current, params, dt)
    v_fire = v_new if order == UPDATE_THEN_FIRE else state.v_th
    spiked, u = fire(u_pre, v_fire)
    return replace(state, u=u, v_th=v_new, spiked=spiked)


def psc_step(a, spiked, tau_s: float, dt: float = 1.0):
    """Exponential synaptic filter; a spike injects unit area (1/dt over one step)."""
    _check_dt(dt)
    s = np.asarray(spiked, dtype=float) / dt
    out = a + (dt / tau_s) * (-a + s)
    _check_finite(out)
    return out if np.ndim(out) else float(out)


def surrogate_spike(u, v_th):
    """Logistic stand-in for the spike step: returns (activation, derivative)."""
    x = np.asarray(u, dtype=float) - v_th
    # tanh form never overflows for large |x|
    sig = 0.5 * (1.0 + np.tanh(0.5 * SURROGATE_SLOPE * x))
    deriv = SURROGATE_SLOPE * sig * (1.0 - sig)
    if sig.ndim == 0:
        return float(sig), float(deriv)
    return sig, deriv
