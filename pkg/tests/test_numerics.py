import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from phasedesync.numerics import (BracketError, InsufficientDataError, IntegrationDivergedError,
                                  find_root_1d, integrate_ode, integrate_sde, trapezoid_integral)


def test_constant_field():
    traj = integrate_ode(lambda x, t: 1.0, 0.0, 0.0, 1.0, 0.1)
    assert traj.final == pytest.approx(1.0, abs=1e-15)
    assert traj.times[-1] == 1.0


def test_exponential():
    traj = integrate_ode(lambda x, t: x, 1.0, 0.0, 1.0, 0.01)
    assert abs(traj.final - math.e) < 1e-8


def test_free_phase_rotation():
    traj = integrate_ode(lambda x, t: 1.0, 0.0, 0.0, 2 * math.pi, 2 * math.pi / 2048)
    assert abs(traj.final - 2 * math.pi) < 1e-10


def test_last_step_shortened():
    traj = integrate_ode(lambda x, t: 1.0, 0.0, 0.0, 1.05, 0.1)
    assert traj.times[-1] == 1.05
    assert traj.times[-2] == pytest.approx(1.0)
    assert traj.final == pytest.approx(1.05)


def test_rk4_order():
    err = [abs(integrate_ode(lambda x, t: x, 1.0, 0.0, 1.0, h).final - math.e)
           for h in (0.1, 0.05)]
    assert err[0] / err[1] >= 15


def test_vector_state():
    # harmonic oscillator; energy conserved to RK4 accuracy
    traj = integrate_ode(lambda x, t: np.array([x[1], -x[0]]), [1.0, 0.0], 0.0, 2 * math.pi, 1e-3)
    np.testing.assert_allclose(traj.final, [1.0, 0.0], atol=1e-10)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_reports_time():
    with pytest.raises(IntegrationDivergedError) as exc:
        integrate_ode(lambda x, t: x * x, 1.0, 0.0, 2.0, 0.01)
    assert 0.9 < exc.value.time < 2.0


def test_sde_zero_noise_is_constant():
    traj = integrate_sde(lambda x, t: 0.0 * x, 0.0, 5.0, 0.0, 1.0, 0.01, seed=1)
    assert np.all(traj.states == 5.0)


def test_sde_same_seed_identical():
    drift = lambda x, t: -x
    a = integrate_sde(drift, 2.0, 0.0, 0.0, 5.0, 0.01, seed=7)
    b = integrate_sde(drift, 2.0, 0.0, 0.0, 5.0, 0.01, seed=7)
    assert np.array_equal(a.states, b.states)
    c = integrate_sde(drift, 2.0, 0.0, 0.0, 5.0, 0.01, seed=8)
    assert not np.array_equal(a.states, c.states)


def test_sde_zero_noise_matches_euler():
    drift = lambda x, t: np.sin(x) - 0.3 * x + t
    traj = integrate_sde(drift, [0.0, 0.0], [0.5, 1.5], 0.0, 2.0, 0.01, seed=3)
    x = np.array([0.5, 1.5])
    for i in range(len(traj.times) - 1):
        assert np.array_equal(traj.states[i], x)
        x = x + (traj.times[i + 1] - traj.times[i]) * drift(x, traj.times[i])
    assert np.array_equal(traj.final, x)


def test_sde_noise_only_on_designated_components():
    traj = integrate_sde(lambda x, t: 0.0 * x, [2.0, 0.0], [0.0, 1.0], 0.0, 1.0, 0.01, seed=0)
    assert np.all(traj.states[:, 1] == 1.0)
    assert np.std(traj.states[:, 0]) > 0


def test_sde_brownian_variance():
    # D = 2 -> noise_scale = sqrt(2D) = 2; Var[x(t1)] = 2 D t1 = 400.
    # 1000 independent paths integrated together as one state vector.
    D, t1 = 2.0, 100.0
    finals = integrate_sde(lambda x, t: 0.0 * x, math.sqrt(2 * D), np.zeros(1000), 0.0, t1, 0.01,
                           seed=2024).final
    assert abs(finals.var(ddof=1) - 2 * D * t1) <= 0.1 * 2 * D * t1


def test_root_linear():
    assert find_root_1d(lambda x: x - 2.0, 0.0, 5.0, 1e-12) == pytest.approx(2.0, abs=1e-12)


def test_root_cos():
    assert abs(find_root_1d(math.cos, 1.0, 2.0, 1e-12) - math.pi / 2) < 1e-10


def test_root_cubic():
    assert abs(find_root_1d(lambda x: x ** 3 - 2, 0.0, 2.0, 1e-12) - 2 ** (1 / 3)) < 1e-9


def test_root_needs_bracket():
    with pytest.raises(BracketError):
        find_root_1d(lambda x: x * x + 1, -1.0, 1.0, 1e-12)


@settings(max_examples=200, deadline=None)
@given(st.floats(-50, 50), st.floats(0.01, 10), st.floats(0.01, 10))
def test_root_postcondition(r, left, right):
    f = lambda x: math.tanh(x - r) * (1 + (x - r) ** 2)
    a, b = r - left, r + right
    tol = 1e-10
    x = find_root_1d(f, a, b, tol)
    assert a <= x <= b
    assert abs(f(x)) <= tol or abs(x - r) <= tol


def test_trapezoid_constant():
    assert trapezoid_integral(np.ones(11), 0.1) == pytest.approx(1.0, abs=1e-14)


def test_trapezoid_affine_exact():
    t = np.linspace(0, 1, 101)
    assert abs(trapezoid_integral(t, 0.01) - 0.5) < 1e-15


def test_trapezoid_sin_squared():
    t = np.linspace(0, 2 * math.pi, 2048)
    assert abs(trapezoid_integral(np.sin(t) ** 2, t[1] - t[0]) - math.pi) < 1e-6


def test_trapezoid_needs_two_samples():
    with pytest.raises(InsufficientDataError):
        trapezoid_integral([1.0], 0.1)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=3, max_size=3), st.integers(256, 4096))
def test_trapezoid_periodic_derivative_telescopes(coef, m):
    t = np.linspace(0, 2 * math.pi, m + 1)
    deriv = sum(c * k * np.cos(k * t) for k, c in enumerate(coef, start=1))
    assert abs(trapezoid_integral(deriv, t[1] - t[0])) <= 1e-10
