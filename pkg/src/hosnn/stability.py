"""Second-order membrane-error dynamics under white-noise forcing.

The error ``e = u - u*`` of a TA-LIF neuron with firing rate ``r`` obeys

    e'' + e' / tau_m + r theta e = F(t),    <F(t1) F(t2)> = sigma^2 delta(t1 - t2)

and ``theta = 0`` gives the LIF case. This module provides the characteristic
roots, an Euler-Maruyama ensemble simulator, the published closed-form
mean-square laws, and the exact variance of the simulated process (used as
an independent oracle for the simulator).
"""

from __future__ import annotations

import cmath
import csv
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from hosnn.errors import ConfigError, NumericDomainError

OVERDAMPED, CRITICAL, UNDERDAMPED = "overdamped", "critical", "underdamped"


class ClosedFormError(ConfigError):
    """Parameters fall outside the regime a closed form covers; use the simulator."""


@dataclass(frozen=True)
class RootReport:
    discriminant: float
    roots: tuple  # (s1, s2) complex
    regime: str
    omega1: Optional[float] = None
    bibo: bool = True


def characteristic_roots(tau_m: float, r: float, theta: float) -> RootReport:
    """Roots of ``tau_m s^2 + s + r tau_m theta = 0``.

    The root nearer zero is computed from Vieta's product so that it keeps
    full relative precision when ``4 r tau_m^2 theta`` is tiny.
    """
    if not (tau_m > 0 and r > 0 and theta > 0):
        raise NumericDomainError("tau_m, r and theta must all be positive")
    disc = 1.0 - 4.0 * r * tau_m * tau_m * theta
    if disc > 0:
        far = (-1.0 - math.sqrt(disc)) / (2.0 * tau_m)
        near = (r * theta) / far
        return RootReport(disc, (complex(near), complex(far)), OVERDAMPED)
    if disc == 0:
        s = -1.0 / (2.0 * tau_m)
        return RootReport(disc, (complex(s), complex(s)), CRITICAL)
    re = -1.0 / (2.0 * tau_m)
    im = math.sqrt(-disc) / (2.0 * tau_m)
    return RootReport(disc, (complex(re, im), complex(re, -im)), UNDERDAMPED, omega1=im)


def analytic_mse_lif(t, tau_m: float, sigma: float):
    """Published LIF law, ``(tau_m^2 sigma^2 / 2) (t - tau_m + tau_m exp(-t / tau_m))``."""
    t = np.asarray(t, dtype=float)
    return 0.5 * tau_m ** 2 * sigma ** 2 * (t - tau_m + tau_m * np.exp(-t / tau_m))


def analytic_mse_talif(t, tau_m: float, r: float, theta: float, sigma: float):
    """Published TA-LIF law; only valid in the underdamped regime."""
    k = r * theta
    w2 = k - 1.0 / (4.0 * tau_m ** 2)
    if not w2 > 0:
        raise ClosedFormError(
            f"r*theta={k} <= 1/(4 tau_m^2): the closed form needs underdamped parameters; use simulate_error_sde"
        )
    w = math.sqrt(w2)
    t = np.asarray(t, dtype=float)
    envelope = np.exp(-t / (2.0 * tau_m)) * (np.cos(w * t) + np.sin(w * t) / (2.0 * w * tau_m))
    return tau_m * sigma ** 2 / (2.0 * k) * (1.0 - envelope)


def _int_exp(c: complex, t):
    """Integral of exp(c s) over [0, t]."""
    if c == 0:
        return t + 0j
    return (np.exp(c * t) - 1.0) / c


def exact_mse(t, tau_m: float, r: float, theta: float, sigma: float):
    """Exact E[e(t)^2] of the SDE started at rest, ``sigma^2 * int_0^t h(s)^2 ds``.

    ``h`` is the impulse response of the left-hand operator. Covers every
    regime, including ``theta = 0``.
    """
    t = np.asarray(t, dtype=float)
    k = r * theta
    disc = 1.0 / tau_m ** 2 - 4.0 * k
    if disc == 0:
        lam = -0.5 / tau_m  # h(s) = s exp(lam s)
        c = 2 * lam
        ect = np.exp(c * t)
        val = ect * (t ** 2 / c - 2 * t / c ** 2 + 2 / c ** 3) - 2 / c ** 3
        return sigma ** 2 * val
    sq = cmath.sqrt(disc)
    s1, s2 = (-1.0 / tau_m + sq) / 2.0, (-1.0 / tau_m - sq) / 2.0
    # h(s) = (exp(s1 s) - exp(s2 s)) / (s1 - s2)
    val = (_int_exp(2 * s1, t) - 2 * _int_exp(s1 + s2, t) + _int_exp(2 * s2, t)) / (s1 - s2) ** 2
    return sigma ** 2 * np.real(val)


@dataclass
class StabilityConfig:
    tau_m: float = 1.0
    r: float = 1.0
    theta: float = 0.0
    sigma: float = 1.0
    dt_sim: float = 1e-3
    horizon: float = 10.0
    n_trials: int = 2000
    seed: int = 0
    output_every: float = 0.1  # spacing of the output grid

    def __post_init__(self):
        if not self.dt_sim > 0 or not self.horizon > 0 or self.n_trials < 1:
            raise ConfigError("dt_sim and horizon must be positive, n_trials >= 1")
        if self.dt_sim >= self.tau_m / 10:
            raise ConfigError(f"dt_sim={self.dt_sim} is too coarse for tau_m={self.tau_m} (need dt_sim < tau_m/10)")
        if self.tau_m <= 0 or self.theta < 0 or self.r < 0 or self.sigma < 0:
            raise ConfigError("tau_m must be positive; r, theta, sigma non-negative")


@dataclass
class SdeResult:
    t: np.ndarray
    mse: np.ndarray  # ensemble mean of e^2 on the grid
    mean: np.ndarray
    samples: Optional[np.ndarray] = None  # [n_trials, len(t)] e on the grid
    config: Optional[StabilityConfig] = None


def simulate_error_sde(config: StabilityConfig, keep_samples: bool = False, refine: int = 1, chunk: int = 1024) -> SdeResult:
    """Euler-Maruyama ensemble for ``(e, e')`` from ``e(0) = e'(0) = 0``.

    Each trial ``i`` draws from its own stream seeded by ``(seed, i)``, so
    results do not depend on the number of trials run alongside it. With
    ``refine > 1`` every step sums ``refine`` unit normals (scaled by
    ``1/sqrt(refine)``); running ``dt`` with ``refine=2`` consumes each
    stream exactly like ``dt/2`` with ``refine=1``, i.e. both see the same
    Brownian path.
    """
    c = config
    n_steps = int(round(c.horizon / c.dt_sim))
    stride = max(1, int(round(c.output_every / c.dt_sim)))
    grid_steps = np.arange(0, n_steps + 1, stride)
    dt = c.dt_sim
    k = c.r * c.theta
    gens = [np.random.default_rng([c.seed, i]) for i in range(c.n_trials)]
    e = np.zeros(c.n_trials)
    v = np.zeros(c.n_trials)
    on_grid = np.zeros((c.n_trials, len(grid_steps)))
    noise_scale = c.sigma * math.sqrt(dt)
    gi = 1  # grid index 0 is t = 0
    step = 0
    while step < n_steps:
        m = min(chunk, n_steps - step)
        draws = np.stack([g.standard_normal(m * refine) for g in gens])
        if refine > 1:
            draws = draws.reshape(c.n_trials, m, refine).sum(axis=2) / math.sqrt(refine)
        for j in range(m):
            e, v = e + dt * v, v + dt * (-v / c.tau_m - k * e) + noise_scale * draws[:, j]
            step += 1
            if gi < len(grid_steps) and step == grid_steps[gi]:
                on_grid[:, gi] = e
                gi += 1
    if not np.all(np.isfinite(on_grid)):
        raise NumericDomainError("SDE integration diverged")
    t = grid_steps * dt
    return SdeResult(t, np.mean(on_grid ** 2, axis=0), on_grid.mean(axis=0), on_grid if keep_samples else None, c)


def write_stability_csv(result: SdeResult, path) -> None:
    """Columns: t, empirical_mse, analytic_mse, n_trials (analytic blank when no closed form applies)."""
    c = result.config
    try:
        analytic = analytic_mse_lif(result.t, c.tau_m, c.sigma) if c.theta == 0 else analytic_mse_talif(result.t, c.tau_m, c.r, c.theta, c.sigma)
    except ClosedFormError:
        analytic = [None] * len(result.t)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "empirical_mse", "analytic_mse", "n_trials"])
        for t, m, a in zip(result.t, result.mse, analytic):
            w.writerow([f"{t:.6g}", repr(float(m)), "" if a is None else repr(float(a)), c.n_trials])


@dataclass
class BandRow:
    t: float
    theta: float
    q05: float
    q50: float
    q95: float
    mse: float


def error_band_report(
    thetas: Sequence[float] = (0.0, 1.0),
    tau_m: float = 1.0,
    r: float = 1.0,
    sigma: float = 1.0,
    horizon: float = 10.0,
    dt_sim: float = 1e-3,
    n_trials: int = 1000,
    seed: int = 0,
    output_every: float = 0.1,
) -> list:
    """Quantile bands (5/50/95 %) of ``e(t)`` for each ``theta``; ``theta=0`` is LIF."""
    rows = []
    for theta in thetas:
        cfg = StabilityConfig(tau_m, r, theta, sigma, dt_sim, horizon, n_trials, seed, output_every)
        res = simulate_error_sde(cfg, keep_samples=True)
        q = np.quantile(res.samples, [0.05, 0.5, 0.95], axis=0)
        rows.extend(BandRow(float(t), theta, float(a), float(b), float(c), float(m)) for t, a, b, c, m in zip(res.t, *q, res.mse))
    return rows


def band_width(rows, theta: float, t: Optional[float] = None) -> float:
    """Width q95 - q05 of the band for ``theta`` at time ``t`` (default: final time)."""
    sel = [r for r in rows if r.theta == theta]
    row = sel[-1] if t is None else min(sel, key=lambda r: abs(r.t - t))
    return row.q95 - row.q05


def write_bands_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "theta", "q05", "q50", "q95", "mse"])
        for r in rows:
            w.writerow([f"{r.t:.6g}", r.theta, repr(r.q05), repr(r.q50), repr(r.q95), repr(r.mse)])
