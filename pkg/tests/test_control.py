import math

import numpy as np
import pytest

from phasedesync.control import (CannotRescaleError, ControlWaveform, approx_lyapunov, approx_u1,
                                 approx_u2, cost_G, euler_lagrange_flow, lambda_scale,
                                 lyapunov_exponent, rescale_energy, shoot_optimal)
from phasedesync.experiments import input_set
from phasedesync.numerics import integrate_ode, trapezoid_integral
from phasedesync.prc import TWO_PI, SinePRC, SniperPRC, rhh_prc

SIN = SinePRC(0.5)
N = 2048


def small_cos(eps=0.01):
    t = np.linspace(0, TWO_PI, N + 1)
    return ControlWaveform(eps * 0.5 * np.cos(t), TWO_PI / N)


@pytest.fixture(scope="module")
def sin10():
    return shoot_optimal(SIN, 1.0, 10.0)


def test_waveform_energy_cached():
    w = small_cos(1.0)
    assert w.energy == pytest.approx(trapezoid_integral(w.samples ** 2, w.dt), abs=1e-12)
    assert w.period == pytest.approx(TWO_PI)
    assert w(-1.0) == 0.0 and w(10.0) == 0.0
    assert w(w.dt / 2) == pytest.approx(0.5 * (w.samples[0] + w.samples[1]))


def test_waveform_csv_roundtrip(tmp_path):
    w = small_cos(1.0)
    w.to_csv(tmp_path / "u.csv")
    assert (tmp_path / "u.csv").read_text().splitlines()[0] == "t_ms,u"
    back = ControlWaveform.from_csv(tmp_path / "u.csv")
    assert np.array_equal(back.samples, w.samples)
    assert back.dt == pytest.approx(w.dt, rel=1e-12)


def test_lyapunov_zero_input():
    assert lyapunov_exponent(SIN, 1.0, ControlWaveform.zeros(TWO_PI)) == 0.0


def test_lyapunov_small_input():
    # (1/2pi) int eps * 0.25 cos^2 = eps / 8
    assert lyapunov_exponent(SIN, 1.0, small_cos()) == pytest.approx(1.25e-3, rel=0.01)


def test_lyapunov_odd_in_input():
    w = small_cos(0.1)
    lp = lyapunov_exponent(SIN, 1.0, w)
    lm = lyapunov_exponent(SIN, 1.0, w.scaled(-1.0))
    # leading order is linear in u; the remainder is O(u^2)
    assert abs(lp + lm) <= 10 * 0.05 ** 2 * abs(lp)


def test_lyapunov_period_mismatch():
    with pytest.raises(ValueError):
        lyapunov_exponent(SIN, 2.0, small_cos())


def test_cost_examples():
    w = small_cos()
    assert cost_G(SIN, 1.0, ControlWaveform.zeros(TWO_PI), 10.0) == 0.0
    assert cost_G(SIN, 1.0, w, 0.0) == w.energy
    assert cost_G(SIN, 1.0, w, 10.0) == pytest.approx(w.energy - 10 * TWO_PI * 1.25e-3, rel=0.01)


def test_free_flow():
    theta, lam = euler_lagrange_flow(SIN, 1.0, 0.0, 0.0)
    np.testing.assert_allclose(theta.states, theta.times, atol=1e-12)
    assert np.all(lam.states == 0.0)


def test_nonzero_residual_without_costate():
    theta, _ = euler_lagrange_flow(SIN, 1.0, 10.0, 0.0)
    assert abs(theta.final - TWO_PI) > 1e-3


@pytest.mark.parametrize("beta, lam0", [(0.0, 1.3), (3.0, -0.3), (-2.0, 0.4)])
@pytest.mark.parametrize("prc", [SIN, SniperPRC(0.3), rhh_prc()], ids=["sin", "sniper", "rhh"])
def test_flow_conserves_hamiltonian(prc, beta, lam0):
    # the flow is generated by H(theta, lambda) = lambda*omega + (beta Z' + lambda Z)^2 / 4
    omega = 0.7
    if prc is rhh_prc():
        omega, beta = TWO_PI / 11.85, beta / 10
    theta, lam = euler_lagrange_flow(prc, omega, beta, lam0)
    z, dz, _ = prc.derivatives(theta.states)
    H = lam.states * omega + (beta * dz + lam.states * z) ** 2 / 4
    assert np.max(np.abs(H - H[0])) <= 1e-6 * max(1.0, abs(H[0]))


def test_flow_with_zero_beta_is_driven_by_costate():
    # beta = 0: u = lambda Z / 2, so theta' = omega + lambda Z^2 / 2
    omega, c = 0.7, 1.3
    theta, lam = euler_lagrange_flow(SIN, omega, 0.0, c)
    rate = np.gradient(theta.states, theta.times)
    expected = omega + lam.states * SIN(theta.states) ** 2 / 2
    assert np.max(np.abs(rate[1:-1] - expected[1:-1])) < 1e-4


def test_shoot_beta_zero():
    s = shoot_optimal(SIN, 1.0, 0.0)
    assert s.lambda0 == 0.0 and s.lyap == 0.0 and s.cost == 0.0
    assert np.all(s.waveform.samples == 0.0)


def test_shoot_sine_beta10(sin10):
    assert abs(sin10.residual) <= 1e-8
    assert sin10.lyap > 0
    assert sin10.theta_traj.states[0] == 0.0
    summary = sin10.summary()
    assert set(summary) == {"beta", "lambda0", "lyap", "cost", "energy", "residual"}


@pytest.mark.parametrize("prc, omega, beta", [(SIN, 1.0, 10.0), (SniperPRC(0.3), 1.0, 10.0),
                                              (SIN, 1.0, -4.0)])
def test_pointwise_consistency(prc, omega, beta):
    s = shoot_optimal(prc, omega, beta)
    assert abs(s.residual) <= 1e-8
    z, dz, _ = prc.derivatives(s.theta_traj.states)
    u = (beta * dz + s.lambda_traj.states * z) / 2
    assert np.max(np.abs(s.waveform.samples - u)) <= 1e-8


@pytest.mark.parametrize("beta", [1.0, 2.0, 3.0, 4.0])
def test_costate_guess_in_search_interval(beta):
    # the small-input costate at t=0 sets the scale of the search and the sign of the root
    guess = -beta ** 2 * SIN(0.0, 1) ** 2 / 4.0
    scale = lambda_scale(SIN, 1.0, beta)
    assert -scale <= guess <= scale
    assert np.sign(shoot_optimal(SIN, 1.0, beta).lambda0) == np.sign(guess)


@pytest.mark.parametrize("beta", [1.0, 2.5, 5.0])
def test_sign_symmetry(beta):
    lp = shoot_optimal(SIN, 1.0, beta).lyap
    lm = shoot_optimal(SIN, 1.0, -beta).lyap
    assert lp > 0 > lm
    assert abs(abs(lp) - abs(lm)) <= 0.05 * abs(lp)


def test_optimality_against_approximations(sin10):
    e = sin10.waveform.energy
    for w in (approx_u1(SIN, 1.0, 10.0), approx_u2(SIN, 1.0, 10.0)):
        assert sin10.cost <= cost_G(SIN, 1.0, rescale_energy(w, e), 10.0)


def test_u1_values():
    assert approx_u1(SIN, 1.0, 10.0).samples[0] == 2.5
    assert approx_u1(SniperPRC(0.3), 1.0, 10.0).samples[0] == 0.0
    assert approx_u1(SIN, 1.0, 10.0).energy == pytest.approx(6.25 * math.pi, abs=1e-6)


def test_u2_values():
    w = approx_u2(SIN, 1.0, 10.0, n_steps=8)
    assert w.samples[0] == 2.5
    assert abs(w.samples[2]) < 1e-15
    assert w.samples[1] == pytest.approx(1.21534, abs=1e-5)


def test_rescale():
    w = ControlWaveform(np.full(5, 2.0), 0.5)
    assert w.energy == pytest.approx(8.0)
    np.testing.assert_allclose(rescale_energy(w, 2.0).samples, 1.0, rtol=1e-15)
    assert np.array_equal(rescale_energy(w, w.energy).samples, w.samples)
    with pytest.raises(CannotRescaleError):
        rescale_energy(ControlWaveform.zeros(1.0, 4), 1.0)


def test_rescale_pipeline(sin10):
    r = rescale_energy(approx_u1(SIN, 1.0, 10.0), sin10.waveform.energy)
    assert r.energy == pytest.approx(sin10.waveform.energy, rel=1e-10)


@pytest.mark.parametrize("name, prc, omega, beta",
                         [("sin", SIN, 1.0, 10.0), ("sniper", SniperPRC(0.3), 1.0, 10.0)])
def test_pipeline_energies_equal(name, prc, omega, beta):
    _, waves = input_set(prc, omega, beta)
    e = [w.energy for w in waves.values()]
    assert max(e) - min(e) <= 1e-8 * max(e)


def test_approx_lyapunov():
    assert approx_lyapunov(SIN, 1.0, 0.0) == 0.0
    assert approx_lyapunov(SIN, 1.0, 10.0) == pytest.approx(0.625, abs=1e-6)
    base = approx_lyapunov(SIN, 1.0, 10.0)
    for c in (-5.0, 5.0):
        assert abs(approx_lyapunov(SIN, 1.0, 10.0, c=c) - base) < 1e-10


@pytest.mark.parametrize("prc", [SIN, SniperPRC(0.3), rhh_prc()], ids=["sin", "sniper", "rhh"])
def test_vanishing_integral(prc):
    s = np.linspace(0, TWO_PI, N + 1)
    assert abs(trapezoid_integral(prc(s, 1) * prc(s), s[1] - s[0])) <= 1e-10
