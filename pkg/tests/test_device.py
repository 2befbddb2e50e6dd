import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from memimply.device import (
    DeviceArray,
    DomainError,
    MemristorParams,
    MemristorState,
    UnitWindow,
    integrate_state,
    normalized_state,
    resistance_of_s,
    resistance_of_state,
    state_derivative,
    state_of_resistance,
    switching_time,
    window_off,
    window_on,
)
from memimply.integrator import IntegratorSettings

NOM = MemristorParams()


def test_nominal_parameters():
    assert (NOM.v_on, NOM.v_off, NOM.R_on, NOM.R_off) == (-0.7, 0.01, 10e3, 1e6)
    assert (NOM.k_on, NOM.k_off, NOM.alpha_on, NOM.alpha_off) == (1e7, -0.5, 3, 3)
    assert (NOM.w_on, NOM.w_off, NOM.a_on, NOM.a_off, NOM.w_c) == (3.0, 0.0, 3.0, 0.0, 0.1)


@pytest.mark.parametrize("changes", [
    {"v_on": 0.1}, {"v_off": -0.1}, {"R_on": 2e6}, {"w_on": -1.0},
    {"k_on": -1.0}, {"k_off": 1.0}, {"w_c": 0.0}, {"alpha_on": 2.5},
])
def test_invalid_parameters_rejected(changes):
    with pytest.raises(DomainError):
        NOM.with_changes(**changes)


@pytest.mark.parametrize("w, s", [(0.0, 0.0), (3.0, 1.0), (1.5, 0.5)])
def test_normalized_state(w, s):
    assert normalized_state(NOM, MemristorState(w)) == pytest.approx(s, abs=1e-15)


@pytest.mark.parametrize("s, R", [(0.0, 1e6), (1.0, 10e3), (0.5, 505e3)])
def test_resistance_of_state(s, R):
    assert resistance_of_state(NOM, MemristorState.from_s(NOM, s)) == pytest.approx(R, rel=1e-12)
    assert state_of_resistance(NOM, R) == pytest.approx(s, abs=1e-12)


def test_state_of_resistance_at_minimum_q_resistance():
    assert state_of_resistance(NOM, 101.449e3) == pytest.approx(0.9076, abs=1e-4)


@pytest.mark.parametrize("R", [5e3, 1.1e6, -1.0])
def test_state_of_resistance_out_of_range(R):
    with pytest.raises(DomainError):
        state_of_resistance(NOM, R)


def test_round_trip_resistance():
    for s in np.linspace(0, 1, 100):
        back = state_of_resistance(NOM, resistance_of_s(NOM, s))
        assert back == pytest.approx(s, rel=1e-12, abs=1e-15)


def test_window_values():
    assert abs(window_on(NOM, 0.0) - 1.0) < 1e-10
    assert window_on(NOM, NOM.a_on) == pytest.approx(math.exp(-1), rel=1e-12)
    assert abs(window_off(NOM, 3.0) - 1.0) < 1e-10
    assert window_off(NOM, NOM.a_off) == pytest.approx(math.exp(-1), rel=1e-12)


def test_window_monotonicity():
    ws = np.linspace(NOM.a_off, NOM.a_on, 301)
    on = np.array([window_on(NOM, w) for w in ws])
    off = np.array([window_off(NOM, w) for w in ws])
    assert np.all(np.diff(on) <= 0)
    assert np.all(np.diff(off) >= 0)


def test_state_derivative_examples():
    assert state_derivative(NOM, MemristorState(1.0), -0.5) == 0.0
    assert state_derivative(NOM, MemristorState(0.0), -1.4) == pytest.approx(1e7, rel=1e-10)
    assert state_derivative(NOM, MemristorState(3.0), 0.02) == pytest.approx(-0.5, rel=1e-10)


def _random_params(rng):
    v_on = -rng.uniform(0.2, 1.2)
    v_off = rng.uniform(0.001, 0.5)
    R_on = rng.uniform(1e3, 1e5)
    return NOM.with_changes(v_on=v_on, v_off=v_off, R_on=R_on, R_off=R_on * rng.uniform(2, 200),
                            k_on=rng.uniform(1e5, 1e8), k_off=-rng.uniform(0.01, 10))


def test_dead_zone_sign_and_array_agreement_random():
    rng = np.random.default_rng(1)
    for _ in range(1000):
        p = _random_params(rng)
        w = rng.uniform(p.w_off, p.w_on)
        v = rng.uniform(-2.0, 2.0)
        d = state_derivative(p, MemristorState(w), v)
        if p.v_on < v < p.v_off:
            assert d == 0.0
        if v < p.v_on:
            assert d >= 0.0
        if v > p.v_off:
            assert d <= 0.0
        vz = rng.uniform(p.v_on, p.v_off)
        if p.v_on < vz < p.v_off:
            assert state_derivative(p, MemristorState(w), vz) == 0.0


def test_device_array_matches_scalar_rates():
    rng = np.random.default_rng(2)
    params = [_random_params(rng) for _ in range(50)]
    w = np.array([rng.uniform(p.w_off, p.w_on) for p in params])
    v = rng.uniform(-2, 2, size=50)
    arr = DeviceArray(params)
    got = arr.rate(w, v)
    want = [state_derivative(p, MemristorState(wi), vi) for p, wi, vi in zip(params, w, v)]
    np.testing.assert_allclose(got, want, rtol=1e-12, atol=0)


def test_clamping_random():
    rng = np.random.default_rng(3)
    for _ in range(1000):
        p = _random_params(rng)
        w0 = rng.uniform(p.w_off, p.w_on)
        v = rng.choice([-3.0, 3.0]) * rng.uniform(0.5, 1.0)
        out = integrate_state(p, MemristorState(w0), v, 1e-6, settings=IntegratorSettings(max_step=1e-7))
        assert p.w_off <= out.w <= p.w_on


def test_zero_voltage_keeps_state():
    s = MemristorState(1.234)
    assert integrate_state(NOM, s, 0.0, 1e-3).w == 1.234


def test_reset_drive_decreases_state():
    ws = [3.0]
    for _ in range(3):
        ws.append(integrate_state(NOM, MemristorState(ws[-1]), 1.0, 1e-6).w)
    assert all(b < a for a, b in zip(ws, ws[1:]))


def test_time_varying_drive_matches_reference():
    def v(t):
        return -0.9 - 0.3 * math.sin(2e5 * t)

    # stays clear of the upper bound, so the unclamped reference applies
    got = integrate_state(NOM, MemristorState(0.03), v, 3e-6).w

    def rhs(t, y):
        return [state_derivative(NOM, MemristorState(y[0]), v(t))]

    ref = solve_ivp(rhs, (0, 3e-6), [0.03], method="DOP853", rtol=1e-11, atol=1e-12).y[0, -1]
    assert got == pytest.approx(ref, rel=1e-5)


def test_switching_time_against_reference_solver():
    # the library resolves the crossing by interpolation at rtol 1e-6
    t = switching_time(NOM, -1.0)
    target = 0.99 * 3.0

    def rhs(_, y):
        return [state_derivative(NOM, MemristorState(y[0]), -1.0)]

    def hit(_, y):
        return y[0] - target

    hit.terminal = True
    ref = solve_ivp(rhs, (0, 1e-4), [0.03], method="DOP853", rtol=1e-11, atol=1e-12, events=hit)
    assert t == pytest.approx(ref.t_events[0][0], rel=1e-4)
    assert t == pytest.approx(3.8498e-6, rel=1e-4)


def test_switching_time_scales_with_k_on():
    t1 = switching_time(NOM, -1.0)
    t2 = switching_time(NOM.with_changes(k_on=2e7), -1.0)
    assert t2 == pytest.approx(t1 / 2, rel=1e-3)


def test_no_switching_in_dead_zone():
    assert switching_time(NOM, -0.5, t_max=1e-4) is None


def test_halving_max_step_changes_set_transient_little():
    base = integrate_state(NOM, MemristorState(0.03), -1.0, 15e-6).w
    fine = integrate_state(NOM, MemristorState(0.03), -1.0, 15e-6,
                           settings=IntegratorSettings(max_step=7.5e-9)).w
    assert abs(fine - base) / base < 1e-3


def test_unit_window_is_pluggable():
    d = state_derivative(NOM, MemristorState(2.99), -1.4, window=UnitWindow())
    assert d == pytest.approx(1e7)
