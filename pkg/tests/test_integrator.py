import math

import numpy as np
import pytest

from memimply.integrator import IntegrationError, IntegratorSettings, integrate, integrate_small


def decay(t, y):
    return -1e5 * y


def test_exponential_decay_accuracy():
    res = integrate(decay, np.array([1.0]), 20e-6, settings=IntegratorSettings(atol=1e-12, rtol=1e-10))
    assert res.y[0] == pytest.approx(math.exp(-2.0), rel=1e-8)


def test_array_and_list_versions_agree():
    def rhs_list(t, y):
        return [-1e5 * y[0] + 3e4 * math.sin(1e5 * t), 2e4 * y[0]]

    def rhs_arr(t, y):
        return np.array(rhs_list(t, y))

    a = integrate(rhs_arr, np.array([1.0, 0.0]), 30e-6, lower=np.array([-10.0, -10.0]),
                  upper=np.array([10.0, 10.0]), autonomous=False)
    b = integrate_small(rhs_list, [1.0, 0.0], 30e-6, lower=[-10, -10], upper=[10, 10], autonomous=False)
    np.testing.assert_allclose(a.y, b.y, rtol=1e-12)
    assert a.steps == b.steps


def test_clamp_holds_at_bound():
    res = integrate_small(lambda t, y: [1e6], [0.0], 1e-5, lower=[0.0], upper=[3.0])
    assert res.y[0] == 3.0


def test_zero_rhs_settles():
    res = integrate_small(lambda t, y: [0.0], [1.0], 1.0, lower=[0.0], upper=[3.0])
    assert res.settled and res.y[0] == 1.0


def test_event_time():
    res = integrate_small(lambda t, y: [1e6], [0.0], 1e-5, lower=[0.0], upper=[100.0],
                          event=lambda t, y: y[0] - 2.0)
    assert res.t_event == pytest.approx(2e-6, rel=1e-9)


def test_max_step_respected():
    times = []
    integrate_small(lambda t, y: [1.0], [0.0], 1e-6, lower=[-1.0], upper=[1.0], autonomous=False,
                    observer=lambda t, y: times.append(t))
    assert np.max(np.diff([0.0] + times)) <= 15e-9 * (1 + 1e-12)


def test_max_norm_is_not_diluted_by_idle_states():
    # one moving component among many idle ones: the rms norm accepts larger steps
    def rhs(t, y):
        out = np.zeros_like(y)
        out[0] = -1e6 * y[0] * (1 + math.sin(1e6 * t))
        return out

    y0 = np.zeros(400)
    y0[0] = 1.0
    loose = integrate(rhs, y0, 5e-6, lower=-np.ones(400), upper=2 * np.ones(400), autonomous=False,
                      settings=IntegratorSettings(max_step=1e-6))
    tight = integrate(rhs, y0, 5e-6, lower=-np.ones(400), upper=2 * np.ones(400), autonomous=False,
                      settings=IntegratorSettings(max_step=1e-6, norm="max"))
    assert tight.steps > loose.steps


def test_step_budget_exhaustion_raises():
    with pytest.raises(IntegrationError):
        integrate_small(lambda t, y: [math.sin(1e9 * t)], [0.0], 1e-3, lower=[-1], upper=[1],
                        autonomous=False, settings=IntegratorSettings(max_steps=100))
