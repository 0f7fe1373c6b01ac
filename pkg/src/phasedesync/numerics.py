"""Fixed-step integrators, a bracketing root finder and trapezoid quadrature.

Everything here is pure: the same inputs (and seed) give bit-identical output.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np


class IntegrationDivergedError(RuntimeError):
    """A non-finite state was produced during time stepping."""

    def __init__(self, time: float, message: str | None = None):
        self.time = float(time)
        super().__init__(message or f"integration diverged at t={self.time:.6g}")


class BracketError(ValueError):
    pass


class InsufficientDataError(ValueError):
    pass


@dataclass(frozen=True)
class Trajectory:
    """Time-stamped states; ``states[i]`` is the state at ``times[i]``."""

    times: np.ndarray
    states: np.ndarray

    def __post_init__(self):
        if len(self.times) != len(self.states):
            raise ValueError("times and states must have the same length")

    def __len__(self):
        return len(self.times)

    @property
    def final(self):
        return self.states[-1]

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])


def _step_times(t0: float, t1: float, dt: float) -> np.ndarray:
    if not t1 > t0:
        raise ValueError("t1 must exceed t0")
    if not dt > 0:
        raise ValueError("dt must be positive")
    # tolerate round-off when (t1 - t0) is an integer multiple of dt
    n = max(1, math.ceil((t1 - t0) / dt - 1e-9))
    times = t0 + dt * np.arange(n + 1)
    times[-1] = t1
    return times


def rk4_step(field: Callable, x, t: float, h: float):
    k1 = field(x, t)
    k2 = field(x + 0.5 * h * k1, t + 0.5 * h)
    k3 = field(x + 0.5 * h * k2, t + 0.5 * h)
    k4 = field(x + h * k3, t + h)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate_ode(field: Callable, x0, t0: float, t1: float, dt: float,
                  check_finite: bool = True) -> Trajectory:
    """Classical RK4 from ``t0`` to ``t1``; the last step is shortened to land on ``t1``.

    ``field(x, t)`` may work on arrays of any shape, which allows integrating
    a batch of independent initial conditions at once.  With
    ``check_finite=False`` non-finite entries are carried along instead of
    raising, so a batch can contain diverging members.
    """
    times = _step_times(t0, t1, dt)
    x = np.asarray(x0, dtype=float)
    states = np.empty((len(times),) + x.shape)
    states[0] = x
    for i in range(len(times) - 1):
        t = times[i]
        x = rk4_step(field, x, t, times[i + 1] - t)
        if check_finite and not np.all(np.isfinite(x)):
            raise IntegrationDivergedError(times[i + 1])
        states[i + 1] = x
    return Trajectory(times, states)


def integrate_sde(drift: Callable, noise_scale, x0, t0: float, t1: float, dt: float,
                  seed: int) -> Trajectory:
    """Euler-Maruyama for additive noise.

    Each step adds ``noise_scale * sqrt(h) * xi`` with independent standard
    normal ``xi`` per component; components with zero ``noise_scale`` get no
    noise.  ``noise_scale`` is sqrt(2D) for noise intensity D.
    """
    times = _step_times(t0, t1, dt)
    x = np.asarray(x0, dtype=float)
    scale = np.broadcast_to(np.asarray(noise_scale, dtype=float), x.shape)
    rng = np.random.default_rng(seed)
    states = np.empty((len(times),) + x.shape)
    states[0] = x
    for i in range(len(times) - 1):
        t = times[i]
        h = times[i + 1] - t
        xi = rng.standard_normal(x.shape)
        x = x + h * np.asarray(drift(x, t)) + scale * math.sqrt(h) * xi
        if not np.all(np.isfinite(x)):
            raise IntegrationDivergedError(times[i + 1])
        states[i + 1] = x
    return Trajectory(times, states)


def find_root_1d(f: Callable[[float], float], a: float, b: float, tol: float = 1e-12,
                 max_iter: int = 500) -> float:
    """Root of ``f`` in ``[a, b]`` by bisection with secant (false-position) steps.

    The bracket is kept at every iteration; a bisection step is forced
    whenever the previous step failed to halve it.  Returns as soon as
    ``|f(x)| <= tol`` or the bracket is narrower than ``tol``.
    """
    lo, hi = min(a, b), max(a, b)
    flo, fhi = f(lo), f(hi)
    if flo == 0:
        return lo
    if fhi == 0:
        return hi
    if not (np.isfinite(flo) and np.isfinite(fhi)) or flo * fhi > 0:
        raise BracketError(f"no sign change on [{a}, {b}]: f={flo:.6g}, {fhi:.6g}")
    bisect = False
    for _ in range(max_iter):
        width = hi - lo
        if width <= tol:
            break
        x = 0.5 * (lo + hi)
        if not bisect:
            xs = lo - flo * width / (fhi - flo)
            if lo < xs < hi:
                x = xs
        fx = f(x)
        if abs(fx) <= tol:
            return x
        if (fx < 0) == (flo < 0):
            lo, flo = x, fx
        else:
            hi, fhi = x, fx
        bisect = (hi - lo) > 0.5 * width
    return lo if abs(flo) < abs(fhi) else hi


def trapezoid_integral(samples, dt: float) -> float:
    samples = np.asarray(samples, dtype=float)
    if samples.shape[0] < 2:
        raise InsufficientDataError("trapezoid rule needs at least 2 samples")
    if not dt > 0:
        raise ValueError("dt must be positive")
    return float(np.trapezoid(samples, dx=dt, axis=0))
