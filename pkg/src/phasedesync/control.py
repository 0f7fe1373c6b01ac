"""Energy-optimal chaotic desynchronization inputs and their PRC-only approximations.

The optimal input over one period minimizes

    G[u] = int_0^T u^2 dt - beta * int_0^T Z'(theta) u dt

subject to d(theta)/dt = omega + Z(theta) u and theta(0) = 0, theta(T) = 2 pi.
Its Euler-Lagrange system in (theta, lambda) is solved here by single
shooting on lambda(0).  The two approximations need no boundary value solve:

    u1(t) = (beta/2) Z'(omega t)
    u2(t) = (beta/2) Z'(omega t) - (beta^2 / 8 omega) Z'(omega t)^2 Z(omega t)

Negative beta gives the synchronizing counterpart with no other change.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from .numerics import (BracketError, IntegrationDivergedError, Trajectory, find_root_1d,
                       integrate_ode, trapezoid_integral)
from .prc import TWO_PI, PhaseModelParams, PhaseResponseCurve, simulate_phase

log = logging.getLogger(__name__)

N_STEPS = 2048


class ShootingError(RuntimeError):
    def __init__(self, message: str, probes=None, residuals=None):
        super().__init__(message)
        self.probes = probes
        self.residuals = residuals


class CannotRescaleError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ControlWaveform:
    """Samples ``u(j*dt)``, j = 0..n, covering one period ``T = n*dt``.

    Calling the waveform interpolates linearly and returns 0 outside [0, T].
    """

    samples: np.ndarray
    dt: float
    energy: float = field(init=False)

    def __post_init__(self):
        samples = np.array(self.samples, dtype=float)
        if samples.ndim != 1 or samples.size < 2:
            raise ValueError("a waveform needs at least two samples")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        samples.flags.writeable = False
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "energy", trapezoid_integral(samples ** 2, self.dt))

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.samples.size)

    @property
    def period(self) -> float:
        return self.dt * (self.samples.size - 1)

    def __call__(self, t):
        return np.interp(t, self.times, self.samples, left=0.0, right=0.0)

    def scaled(self, factor: float) -> "ControlWaveform":
        return ControlWaveform(self.samples * factor, self.dt)

    @classmethod
    def zeros(cls, period: float, n_steps: int = N_STEPS) -> "ControlWaveform":
        return cls(np.zeros(n_steps + 1), period / n_steps)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t_ms", "u"])
            for t, u in zip(self.times, self.samples):
                w.writerow([repr(float(t)), repr(float(u))])

    @classmethod
    def from_csv(cls, path) -> "ControlWaveform":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        t = data[:, 0]
        dt = (t[-1] - t[0]) / (len(t) - 1)
        if not np.allclose(np.diff(t), dt, rtol=1e-9, atol=1e-12):
            raise ValueError(f"{path}: waveform grid is not uniform")
        return cls(data[:, 1], dt)


def _grid(omega: float, n_steps: int):
    T = TWO_PI / omega
    return T, T / n_steps, np.linspace(0.0, T, n_steps + 1)


def lyapunov_exponent(prc: PhaseResponseCurve, omega: float, waveform: ControlWaveform) -> float:
    """Finite-time Lyapunov exponent over one period, along the driven phase trajectory."""
    T = TWO_PI / omega
    if abs(waveform.period - T) > 1e-9 * T:
        raise ValueError(f"waveform period {waveform.period} differs from 2pi/omega = {T}")
    traj = simulate_phase(prc, PhaseModelParams(omega), waveform, 0.0, T, waveform.dt)
    integrand = prc(traj.states, 1) * waveform.samples
    return trapezoid_integral(integrand, waveform.dt) / T


def cost_G(prc: PhaseResponseCurve, omega: float, waveform: ControlWaveform, beta: float) -> float:
    T = TWO_PI / omega
    return waveform.energy - beta * T * lyapunov_exponent(prc, omega, waveform)


def _el_field(prc, omega, beta):
    def field(x, t):
        theta, lam = x[0], x[1]
        z, dz, d2z = prc.derivatives(theta)
        g = beta * dz + lam * z
        return np.stack([z * g / 2.0 + omega, -g * (beta * d2z + lam * dz) / 2.0])
    return field


def euler_lagrange_flow(prc: PhaseResponseCurve, omega: float, beta: float, lambda0,
                        dt: float | None = None, check_finite: bool = True):
    """Integrate the Euler-Lagrange system from ``(theta, lambda) = (0, lambda0)`` over one period.

    ``lambda0`` may be an array, in which case all costates are integrated
    together and the trajectories carry a trailing batch axis.
    """
    T = TWO_PI / omega
    dt = T / N_STEPS if dt is None else dt
    lam0 = np.asarray(lambda0, dtype=float)
    x0 = np.stack([np.zeros_like(lam0), lam0])
    traj = integrate_ode(_el_field(prc, omega, beta), x0, 0.0, T, dt, check_finite=check_finite)
    return (Trajectory(traj.times, traj.states[:, 0]),
            Trajectory(traj.times, traj.states[:, 1]))


@dataclass(frozen=True, eq=False)
class BVPSolution:
    beta: float
    lambda0: float
    theta_traj: Trajectory
    lambda_traj: Trajectory
    waveform: ControlWaveform
    lyap: float
    cost: float

    @property
    def residual(self) -> float:
        return float(self.theta_traj.final - TWO_PI)

    def summary(self) -> dict:
        return {"beta": self.beta, "lambda0": self.lambda0, "lyap": self.lyap,
                "cost": self.cost, "energy": self.waveform.energy,
                "residual": self.residual}


def _solution(prc, omega, beta, lambda0, dt) -> BVPSolution:
    theta, lam = euler_lagrange_flow(prc, omega, beta, lambda0, dt)
    z, dz, _ = prc.derivatives(theta.states)
    wave = ControlWaveform((beta * dz + lam.states * z) / 2.0, dt)
    lyap = lyapunov_exponent(prc, omega, wave)
    cost = wave.energy - beta * (TWO_PI / omega) * lyap
    return BVPSolution(beta=float(beta), lambda0=float(lambda0), theta_traj=theta,
                       lambda_traj=lam, waveform=wave, lyap=lyap, cost=cost)


def _residuals(prc, omega, beta, probes, dt):
    # some probes may blow up; they come back as inf/nan and are skipped
    with np.errstate(all="ignore"):
        theta, _ = euler_lagrange_flow(prc, omega, beta, probes, dt, check_finite=False)
    return theta.final - TWO_PI


def _brackets(probes, res):
    out = []
    for i in range(len(probes) - 1):
        r0, r1 = res[i], res[i + 1]
        if np.isfinite(r0) and np.isfinite(r1) and r0 * r1 <= 0:
            out.append((probes[i], probes[i + 1]))
    return out


def _roots(prc, omega, beta, probes, dt, tol):
    res = _residuals(prc, omega, beta, probes, dt)

    def r(lam0):
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                theta, _ = euler_lagrange_flow(prc, omega, beta, lam0, dt)
        except IntegrationDivergedError:
            return np.nan
        return float(theta.final - TWO_PI)

    roots = []
    for a, b in _brackets(probes, res):
        try:
            lam0 = find_root_1d(r, a, b, tol=tol)
        except BracketError:
            continue
        if abs(r(lam0)) <= tol and not any(abs(lam0 - x) < 1e-9 for x in roots):
            roots.append(lam0)
    return roots, res


def lambda_scale(prc: PhaseResponseCurve, omega: float, beta: float) -> float:
    """Costate magnitude suggested by the small-input costate approximation."""
    theta = np.linspace(0.0, TWO_PI, 4096, endpoint=False)
    return beta ** 2 * float(np.max(prc(theta, 1) ** 2)) / omega


def shoot_optimal(prc: PhaseResponseCurve, omega: float, beta: float, tol: float = 1e-8,
                  n_steps: int = N_STEPS, n_probes: int = 64) -> BVPSolution:
    """Solve the Euler-Lagrange boundary value problem by shooting on lambda(0).

    Probes lambda(0) on a grid scaled by :func:`lambda_scale`, root-finds every
    sign change of ``theta(T) - 2 pi`` and returns the root with the least
    cost G.  If no sign change is found, continuation in beta through
    beta/4, beta/2, 3beta/4 is tried, searching around the previous root.
    """
    T = TWO_PI / omega
    dt = T / n_steps
    if beta == 0:
        return _solution(prc, omega, 0.0, 0.0, dt)
    scale = lambda_scale(prc, omega, beta)
    probes = np.linspace(-scale, scale, n_probes)
    roots, res = _roots(prc, omega, beta, probes, dt, tol)
    if not roots:
        log.info("no bracket for beta=%g on the direct grid; trying continuation", beta)
        roots = _continuation(prc, omega, beta, dt, tol, n_probes)
    if not roots:
        raise ShootingError(f"no lambda(0) bracket found for beta={beta}",
                            probes=probes, residuals=res)
    sols = [_solution(prc, omega, beta, lam0, dt) for lam0 in roots]
    return min(sols, key=lambda s: s.cost)


def _continuation(prc, omega, beta, dt, tol, n_probes):
    guess = 0.0
    roots = []
    for frac in (0.25, 0.5, 0.75, 1.0):
        b = frac * beta
        width = max(lambda_scale(prc, omega, b), 1e-3)
        roots = []
        # widen the window around the previous root until a sign change appears
        for grow in (0.05, 0.2, 1.0, 4.0):
            probes = guess + width * grow * np.linspace(-1.0, 1.0, n_probes)
            roots, _ = _roots(prc, omega, b, probes, dt, tol)
            if roots:
                break
        if not roots:
            return []
        guess = min(roots, key=lambda x: abs(x - guess))
    return roots


def approx_u1(prc: PhaseResponseCurve, omega: float, beta: float,
              n_steps: int = N_STEPS) -> ControlWaveform:
    _, dt, t = _grid(omega, n_steps)
    return ControlWaveform(0.5 * beta * prc(omega * t, 1), dt)


def approx_u2(prc: PhaseResponseCurve, omega: float, beta: float,
              n_steps: int = N_STEPS) -> ControlWaveform:
    _, dt, t = _grid(omega, n_steps)
    z, dz, _ = prc.derivatives(omega * t)
    return ControlWaveform(0.5 * beta * dz - beta ** 2 / (8.0 * omega) * dz ** 2 * z, dt)


def rescale_energy(waveform: ControlWaveform, target_energy: float) -> ControlWaveform:
    if not waveform.energy > 0:
        raise CannotRescaleError("cannot rescale a zero-energy waveform")
    if not target_energy > 0:
        raise ValueError("target energy must be positive")
    return waveform.scaled(np.sqrt(target_energy / waveform.energy))


def approx_lyapunov(prc: PhaseResponseCurve, omega: float, beta: float, c: float = 0.0,
                    n_steps: int = N_STEPS) -> float:
    """Lyapunov exponent of the approximate optimum along theta = omega t.

    ``c`` is the free constant of the approximate costate; the result does
    not depend on it beyond quadrature error.
    """
    T, dt, t = _grid(omega, n_steps)
    z, dz, _ = prc.derivatives(omega * t)
    u = 0.5 * beta * dz - beta ** 2 / (8.0 * omega) * dz ** 2 * z + 0.5 * c * z
    return trapezoid_integral(dz * u, dt) / T
