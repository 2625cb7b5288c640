import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hosnn.dynamics import (
    FIRE_THEN_UPDATE,
    NeuronParams,
    NeuronState,
    lif_step,
    psc_step,
    surrogate_spike,
    talif_step,
)
from hosnn.errors import ConfigError, NumericDomainError

finite = st.floats(-10, 10, allow_nan=False)


def test_params_validation():
    with pytest.raises(ConfigError):
        NeuronParams(tau_m=0)
    with pytest.raises(ConfigError):
        NeuronParams(v_th0=-1)
    with pytest.raises(ConfigError):
        NeuronParams(theta=np.array([0.1, -0.1]))


def test_lif_zero_fixed_point():
    out = lif_step(NeuronState(u=0.0, v_th=1.0), 0.0, NeuronParams(), 1.0)
    assert out.u == 0.0 and not out.spiked


def test_lif_threshold_exactly_reached_fires():
    p = NeuronParams(tau_m=1.0, v_th0=1.0)
    out = lif_step(NeuronState(u=0.0, v_th=1.0), 1.0, p, 1.0)
    assert out.spiked and out.u == 0.0


def test_lif_leak_hand_step():
    out = lif_step(NeuronState(u=0.5, v_th=1.0), 0.0, NeuronParams(tau_m=5.0), 1.0)
    assert out.u == pytest.approx(0.4, abs=1e-15)
    assert not out.spiked


def test_lif_rejects_nonfinite():
    with pytest.raises(NumericDomainError):
        lif_step(NeuronState(), float("nan"), NeuronParams())
    with pytest.raises(ConfigError):
        lif_step(NeuronState(), 0.0, NeuronParams(), dt=0.0)


def test_talif_threshold_update_hand_value():
    p = NeuronParams(theta=1.0)
    out = talif_step(NeuronState(u=1.2, v_th=1.0), 0.0, 1.0, p, 1.0)
    assert out.v_th == pytest.approx(1.2)


def test_talif_zero_error_keeps_threshold():
    p = NeuronParams(theta=3.0)
    out = talif_step(NeuronState(u=0.7, v_th=1.3), 0.4, 0.7, p)
    assert out.v_th == 1.3


def test_talif_fire_order():
    # pre-reset potential 0.8 + 0.2*4 = 1.6: below the raised threshold 1.8, above the old one
    p = NeuronParams(tau_m=5.0, theta=2.0)
    state = NeuronState(u=1.0, v_th=1.0)
    first = talif_step(state, 4.0, 0.6, p)
    assert not first.spiked and first.v_th == pytest.approx(1.8)
    later = talif_step(state, 4.0, 0.6, p, order=FIRE_THEN_UPDATE)
    assert later.spiked and later.u == pytest.approx(0.6) and later.v_th == pytest.approx(1.8)


@given(u=finite, v=st.floats(0.1, 5), i=finite, nds=finite, tau=st.floats(1.5, 20))
def test_theta_zero_degenerates_bitwise(u, v, i, nds, tau):
    p = NeuronParams(tau_m=tau, theta=0.0)
    s = NeuronState(u=u, v_th=v)
    a, b = lif_step(s, i, p), talif_step(s, i, nds, p)
    assert a.u == b.u and a.v_th == b.v_th and bool(a.spiked) == bool(b.spiked)


@given(u=st.floats(-10, 0.99), tau=st.floats(1.01, 50), dt=st.floats(0.01, 1.0))
def test_leak_monotone(u, tau, dt):
    if dt >= tau or abs(u) < 1e-300:
        return
    out = lif_step(NeuronState(u=u, v_th=1.0), 0.0, NeuronParams(tau_m=tau), dt)
    assert not out.spiked
    assert abs(out.u) < abs(u)


@given(u=finite, i=finite, v=st.floats(0.1, 5))
def test_reset_conservation(u, i, v):
    p = NeuronParams(tau_m=5.0)
    pre = u + (1 / 5.0) * (-u + i)
    out = lif_step(NeuronState(u=u, v_th=v), i, p)
    assert out.u == (pre - v if out.spiked else pre)


def test_psc_examples():
    assert psc_step(0.0, False, 3.0, 1.0) == 0.0
    assert psc_step(0.0, True, 3.0, 1.0) == pytest.approx(1 / 3)
    assert psc_step(0.6, False, 3.0, 1.0) == pytest.approx(0.4)


@settings(max_examples=50)
@given(spikes=st.lists(st.booleans(), min_size=1, max_size=50), tau=st.floats(1.1, 10), dt=st.floats(0.05, 1.0))
def test_psc_positivity(spikes, tau, dt):
    a = 0.0
    for s in spikes:
        a = psc_step(a, s, tau, dt)
        assert a >= 0.0


def test_surrogate_values():
    act, der = surrogate_spike(1.0, 1.0)
    assert act == 0.5 and der == 1.25
    act, der = surrogate_spike(1e6, 0.0)
    assert act == 1.0 and der == 0.0
    assert surrogate_spike(1.2, 1.0)[0] == pytest.approx(1 / (1 + math.exp(-1.0)), rel=1e-12)
    assert surrogate_spike(1.2, 1.0)[0] == pytest.approx(0.73106, abs=1e-5)


def test_surrogate_derivative_matches_central_difference():
    # float64 differences lose ~1e-6 relative accuracy in the tails, so the
    # oracle evaluates the logistic at 50 digits
    mp.mp.dps = 50
    h = mp.mpf("1e-20")

    def act(x):
        return 1 / (1 + mp.exp(-5 * x))

    for x in np.linspace(-3, 3, 121):
        fd = (act(mp.mpf(x) + h) - act(mp.mpf(x) - h)) / (2 * h)
        assert surrogate_spike(x, 0.0)[1] == pytest.approx(float(fd), rel=1e-8)


def test_vectorised_state():
    p = NeuronParams()
    s = NeuronState.initial(p, (3,))
    out = lif_step(s, np.array([0.0, 4.0, 10.0]), p)
    np.testing.assert_array_equal(out.spiked, [False, False, True])
