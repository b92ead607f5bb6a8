import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from spikesim.errors import NumericError
from spikesim.integrators import OdeSystem, check_dt, euler_step, integrate_fixed, n_steps, rk4_step


def decay(t, y):
    return -y


def test_euler_examples():
    assert float(euler_step(decay, 0.0, 1.0, 0.1)) == pytest.approx(0.9, abs=1e-15)
    assert float(euler_step(lambda t, y: np.zeros_like(y), 0.0, 3.5, 0.7)) == 3.5
    y = integrate_fixed(decay, 1.0, 0.1, 1.0, method="euler")
    assert float(y) == pytest.approx(0.9**10, abs=1e-12)


def test_rk4_examples():
    assert float(rk4_step(lambda t, y: np.zeros_like(y), 0.0, 2.0, 0.3)) == 2.0
    assert float(rk4_step(lambda t, y: np.ones_like(y), 0.0, 0.0, 0.5)) == pytest.approx(0.5, abs=1e-15)
    y = integrate_fixed(decay, 1.0, 0.1, 1.0, method="rk4")
    assert abs(float(y) - math.exp(-1)) < 1e-6


def test_integrate_fixed_tight_rk4():
    y = integrate_fixed(decay, 1.0, 0.01, 1.0, method="rk4")
    assert abs(float(y) - math.exp(-1)) < 1e-9


def test_zero_duration_returns_initial_state():
    y0 = np.array([1.0, -2.0])
    seen = []
    y = integrate_fixed(lambda t, y: -y, y0, 0.1, 0.0, observer=lambda t, y: seen.append(t))
    assert np.array_equal(y, y0)
    assert seen == []


@pytest.mark.parametrize("dt,T", [(0.1, 1.0), (0.3, 1.0), (0.01, 0.5), (0.25, 0.0), (0.7, 2.1)])
def test_observer_called_ceil_t_over_dt_times(dt, T):
    seen = []
    integrate_fixed(decay, 1.0, dt, T, observer=lambda t, y: seen.append(t))
    assert len(seen) == math.ceil(round(T / dt, 9)) == n_steps(T, dt)
    assert seen == sorted(seen)


def test_observer_sees_times_in_order():
    seen = []
    integrate_fixed(decay, 1.0, 0.25, 1.0, observer=lambda t, y: seen.append((t, float(y))))
    assert [t for t, _ in seen] == [0.25, 0.5, 0.75, 1.0]


def _error(method, dt):
    return abs(float(integrate_fixed(decay, 1.0, dt, 1.0, method=method)) - math.exp(-1))


@pytest.mark.parametrize("method,order,shrink", [("euler", 0.9, 1.8), ("rk4", 3.9, 14.0)])
def test_convergence_order(method, order, shrink):
    errs = [_error(method, dt) for dt in (0.1, 0.05, 0.025)]
    orders = [math.log2(a / b) for a, b in zip(errs, errs[1:])]
    assert min(orders) >= order
    assert all(a / b >= shrink for a, b in zip(errs, errs[1:]))


def test_vector_state_and_ode_system():
    sys = OdeSystem(2, lambda t, y: np.array([y[1], -y[0]]))
    y = integrate_fixed(sys, [1.0, 0.0], 0.001, math.pi / 2)
    # rotation by a quarter turn, 1571 steps slightly overshoots pi/2
    T = n_steps(math.pi / 2, 0.001) * 0.001
    assert np.allclose(y, [math.cos(T), -math.sin(T)], atol=1e-9)


def test_non_finite_derivative_reports_component_and_step():
    def f(t, y):
        out = np.zeros_like(y)
        if t >= 0.2:
            out[1] = np.inf
        return out

    with pytest.raises(NumericError) as info:
        integrate_fixed(f, [0.0, 0.0, 0.0], 0.1, 1.0, method="euler")
    assert info.value.component == 1
    assert info.value.step == 2


@pytest.mark.parametrize("dt", [0.0, -0.1, math.nan, math.inf])
def test_bad_dt_rejected(dt):
    with pytest.raises(ValueError):
        check_dt(dt)


def test_dt_cap():
    with pytest.raises(ValueError):
        check_dt(0.5, max_dt=0.25)
    assert check_dt(0.25, max_dt=0.25) == 0.25


def test_unknown_method():
    with pytest.raises(ValueError):
        integrate_fixed(decay, 1.0, 0.1, 1.0, method="midpoint")


@given(st.floats(-10, 10), st.sampled_from([0.01, 0.1, 0.2]), st.sampled_from(["euler", "rk4"]))
def test_deterministic(y0, dt, method):
    a = integrate_fixed(lambda t, y: np.sin(t) - y**3 / 100, y0, dt, 1.0, method=method)
    b = integrate_fixed(lambda t, y: np.sin(t) - y**3 / 100, y0, dt, 1.0, method=method)
    assert a.tobytes() == b.tobytes()
