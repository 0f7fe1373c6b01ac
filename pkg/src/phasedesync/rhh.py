"""Reduced (two-variable) Hodgkin-Huxley neuron.

The model keeps V and the potassium gate n, sets m to its steady state and
replaces h by 0.8 - n::

    C dV/dt = I_b - gNa m_inf(V)^3 (0.8 - n)(V - VNa) - gK n^4 (V - VK) - gL (V - VL)
      dn/dt = a_n(V)(1 - n) - b_n(V) n

Long fixed-step runs (transients, limit cycles, adjoint sweeps, populations)
go through numba kernels; :func:`rhh_field` is the same vector field exposed
for ordinary Python use.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, astuple

import numba
import numpy as np

from .numerics import find_root_1d
from .prc import TWO_PI, FourierPRC, fit_fourier

# half-width (mV) of the window around the removable singularities of a_m, a_n
_SERIES_WINDOW = 1e-4


class NoOscillationError(RuntimeError):
    pass


class AdjointDivergedError(RuntimeError):
    pass


@dataclass(frozen=True)
class RHHParams:
    I_b: float = 10.0
    V_Na: float = 50.0
    V_K: float = -77.0
    V_L: float = -54.4
    g_Na: float = 120.0
    g_K: float = 36.0
    g_L: float = 0.3
    C: float = 1.0

    def __post_init__(self):
        if min(self.g_Na, self.g_K, self.g_L) <= 0 or self.C <= 0:
            raise ValueError("conductances and capacitance must be positive")

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=float)


@numba.njit(cache=True)
def _xexp(x, scale):
    """``scale * y / (1 - exp(-y))`` with y = x/10 and its x-derivative."""
    y = x / 10.0
    if abs(x) < _SERIES_WINDOW:
        h = 1.0 + y / 2.0 + y * y / 12.0
        dh = 0.5 + y / 6.0
    else:
        e = math.exp(-y)
        den = 1.0 - e
        h = y / den
        dh = (den - y * e) / (den * den)
    return scale * h, scale * dh / 10.0


@numba.njit(cache=True)
def a_m(V):
    return _xexp(V + 40.0, 1.0)[0]


@numba.njit(cache=True)
def b_m(V):
    return 4.0 * math.exp(-(V + 65.0) / 18.0)


@numba.njit(cache=True)
def a_n(V):
    return _xexp(V + 55.0, 0.1)[0]


@numba.njit(cache=True)
def b_n(V):
    return 0.125 * math.exp(-(V + 65.0) / 80.0)


@numba.njit(cache=True)
def m_inf(V):
    am = a_m(V)
    return am / (am + b_m(V))


@numba.njit(cache=True)
def _field(V, n, p, u):
    # p = (I_b, V_Na, V_K, V_L, g_Na, g_K, g_L, C)
    m = m_inf(V)
    fV = (p[0] - p[4] * m ** 3 * (0.8 - n) * (V - p[1]) - p[5] * n ** 4 * (V - p[2])
          - p[6] * (V - p[3])) / p[7]
    fn = a_n(V) * (1.0 - n) - b_n(V) * n
    return fV + u, fn


@numba.njit(cache=True)
def _jacobian(V, n, p):
    am, dam = _xexp(V + 40.0, 1.0)
    bm = 4.0 * math.exp(-(V + 65.0) / 18.0)
    dbm = -bm / 18.0
    an, dan = _xexp(V + 55.0, 0.1)
    bn = 0.125 * math.exp(-(V + 65.0) / 80.0)
    dbn = -bn / 80.0
    s = am + bm
    m = am / s
    dm = (dam * bm - am * dbm) / (s * s)
    h = 0.8 - n
    j11 = (-p[4] * (3.0 * m * m * dm * h * (V - p[1]) + m ** 3 * h) - p[5] * n ** 4 - p[6]) / p[7]
    j12 = (p[4] * m ** 3 * (V - p[1]) - 4.0 * p[5] * n ** 3 * (V - p[2])) / p[7]
    j21 = dan * (1.0 - n) - dbn * n
    j22 = -an - bn
    return j11, j12, j21, j22


@numba.njit(cache=True)
def _rk4(V, n, p, u, h):
    k1V, k1n = _field(V, n, p, u)
    k2V, k2n = _field(V + 0.5 * h * k1V, n + 0.5 * h * k1n, p, u)
    k3V, k3n = _field(V + 0.5 * h * k2V, n + 0.5 * h * k2n, p, u)
    k4V, k4n = _field(V + h * k3V, n + h * k3n, p, u)
    return (V + h / 6.0 * (k1V + 2.0 * k2V + 2.0 * k3V + k4V),
            n + h / 6.0 * (k1n + 2.0 * k2n + 2.0 * k3n + k4n))


@numba.njit(cache=True)
def _run(V, n, p, h, steps):
    out = np.empty((steps + 1, 2))
    out[0, 0] = V
    out[0, 1] = n
    for i in range(steps):
        V, n = _rk4(V, n, p, 0.0, h)
        out[i + 1, 0] = V
        out[i + 1, 1] = n
    return out


@numba.njit(cache=True)
def _run_forced(V, n, p, h, u_samples):
    """RK4 with piecewise-constant input ``u_samples[i]`` on step i."""
    steps = u_samples.shape[0]
    out = np.empty((steps + 1, 2))
    out[0, 0] = V
    out[0, 1] = n
    for i in range(steps):
        V, n = _rk4(V, n, p, u_samples[i], h)
        out[i + 1, 0] = V
        out[i + 1, 1] = n
    return out


@numba.njit(cache=True)
def _adjoint_sweep(x, z_end, p, h):
    """One backward RK4 pass of dz/dt = -J(x(t))^T z.

    ``x`` holds the cycle at spacing h/2 (odd rows are RK4 midpoints); the
    result is z on the even rows, from t=T back to t=0.
    """
    m = (x.shape[0] - 1) // 2
    z = np.empty((m + 1, 2))
    z[m, 0] = z_end[0]
    z[m, 1] = z_end[1]
    zV = z_end[0]
    zn = z_end[1]
    for j in range(m, 0, -1):
        # backward in time: step of -h; dz/ds = J^T z with s = -t
        a11, a12, a21, a22 = _jacobian(x[2 * j, 0], x[2 * j, 1], p)
        k1V = a11 * zV + a21 * zn
        k1n = a12 * zV + a22 * zn
        b11, b12, b21, b22 = _jacobian(x[2 * j - 1, 0], x[2 * j - 1, 1], p)
        yV, yn = zV + 0.5 * h * k1V, zn + 0.5 * h * k1n
        k2V = b11 * yV + b21 * yn
        k2n = b12 * yV + b22 * yn
        yV, yn = zV + 0.5 * h * k2V, zn + 0.5 * h * k2n
        k3V = b11 * yV + b21 * yn
        k3n = b12 * yV + b22 * yn
        c11, c12, c21, c22 = _jacobian(x[2 * j - 2, 0], x[2 * j - 2, 1], p)
        yV, yn = zV + h * k3V, zn + h * k3n
        k4V = c11 * yV + c21 * yn
        k4n = c12 * yV + c22 * yn
        zV += h / 6.0 * (k1V + 2.0 * k2V + 2.0 * k3V + k4V)
        zn += h / 6.0 * (k1n + 2.0 * k2n + 2.0 * k3n + k4n)
        z[j - 1, 0] = zV
        z[j - 1, 1] = zn
    return z


def rhh_field(state, params: RHHParams = RHHParams(), u: float = 0.0) -> np.ndarray:
    """``(f_V + u, f_n)`` at ``state = (V, n)``; ``u`` is the input current over C."""
    V, n = state
    return np.array(_field(float(V), float(n), params.as_array(), float(u)))


def rhh_jacobian(state, params: RHHParams = RHHParams()) -> np.ndarray:
    V, n = state
    j = _jacobian(float(V), float(n), params.as_array())
    return np.array(j).reshape(2, 2)


def integrate_rhh(x0, params: RHHParams, duration: float, dt: float) -> np.ndarray:
    """Unforced RK4 trajectory as an array of shape (steps + 1, 2)."""
    steps = max(1, int(round(duration / dt)))
    return _run(float(x0[0]), float(x0[1]), params.as_array(), float(dt), steps)


@dataclass(frozen=True, eq=False)
class LimitCycle:
    """One period of the attracting orbit, ``samples[0]`` at the voltage peak."""

    period: float
    samples: np.ndarray
    dt: float
    params: RHHParams
    origin_index: int = 0

    @property
    def omega(self) -> float:
        return TWO_PI / self.period

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(len(self.samples))

    def state_at_phase(self, theta) -> np.ndarray:
        """Cycle states at phases ``theta`` (rad), by linear interpolation."""
        t = np.mod(theta, TWO_PI) / self.omega
        return np.stack([np.interp(t, self.times, self.samples[:, 0]),
                         np.interp(t, self.times, self.samples[:, 1])], axis=-1)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "V", "n"])
            for t, (V, n) in zip(self.times, self.samples):
                w.writerow([repr(float(t)), repr(float(V)), repr(float(n))])


def _substep(x, p, s):
    if s == 0.0:
        return x
    V, n = _rk4(float(x[0]), float(x[1]), p, 0.0, s)
    return np.array([V, n])


def _upward_crossings(traj, p, dt, t0, level):
    """Times where V crosses ``level`` upward, refined inside the RK4 step."""
    V = traj[:, 0]
    idx = np.nonzero((V[:-1] < level) & (V[1:] >= level))[0]
    times = []
    for i in idx:
        x = traj[i]
        s = find_root_1d(lambda s: _substep(x, p, s)[0] - level, 0.0, dt, tol=1e-12)
        times.append(t0 + i * dt + s)
    return np.array(times)


def find_limit_cycle(params: RHHParams = RHHParams(), tol: float = 1e-6, dt: float = 0.001,
                     transient: float = 500.0, window: float = 100.0, max_windows: int = 20,
                     x0=(-65.0, 0.3), section: float = -20.0) -> LimitCycle:
    """Locate the stable limit cycle by Poincare section crossings.

    After ``transient`` ms, upward crossings of ``V = section`` are collected
    in windows of ``window`` ms until two successive periods differ by less
    than ``tol``.  The orbit is then resampled over one period (an even
    number of steps close to ``dt``) starting at the voltage maximum.
    """
    p = params.as_array()
    traj = _run(float(x0[0]), float(x0[1]), p, dt, int(round(transient / dt)))
    n_transient = len(_upward_crossings(traj, p, dt, 0.0, section))
    t = transient
    x = traj[-1]
    crossings = np.empty(0)
    period = None
    for _ in range(max_windows):
        steps = int(round(window / dt))
        traj = _run(float(x[0]), float(x[1]), p, dt, steps)
        crossings = np.concatenate([crossings, _upward_crossings(traj, p, dt, t, section)])
        t += steps * dt
        x = traj[-1]
        if n_transient + len(crossings) < 3:
            raise NoOscillationError(f"fewer than 3 crossings of V={section} mV "
                                     f"within {t:g} ms (I_b={params.I_b})")
        periods = np.diff(crossings)
        if len(periods) >= 2 and abs(periods[-1] - periods[-2]) < tol:
            period = float(periods[-1])
            break
    if period is None:
        raise NoOscillationError(f"period estimates did not settle to {tol:g} ms")

    # voltage peak on the next stretch of orbit, refined to dV/dt = 0
    lead = _run(float(x[0]), float(x[1]), p, dt, int(math.ceil(1.2 * period / dt)))
    j = min(max(int(np.argmax(lead[:, 0])), 1), len(lead) - 2)
    xa = lead[j - 1]
    s_peak = find_root_1d(lambda s: _field(*_substep(xa, p, s), p, 0.0)[0], 0.0, 2 * dt,
                          tol=1e-12)
    x_peak = _substep(xa, p, s_peak)

    m = 2 * max(1, int(round(period / (2 * dt))))
    h = period / m
    samples = _run(float(x_peak[0]), float(x_peak[1]), p, h, m)
    return LimitCycle(period=period, samples=samples, dt=h, params=params)


@dataclass(frozen=True, eq=False)
class AdjointSolution:
    times: np.ndarray
    states: np.ndarray
    z: np.ndarray
    omega: float
    sweeps: int

    def normalization(self, params: RHHParams) -> np.ndarray:
        """``Z(t) . f(x(t))`` along the orbit; equals omega for a normalized solution."""
        p = params.as_array()
        f = np.array([_field(V, n, p, 0.0) for V, n in self.states])
        return np.einsum("ij,ij->i", self.z, f)


def solve_adjoint(cycle: LimitCycle, tol: float = 1e-8, max_sweeps: int = 50,
                  refine: int = 4) -> AdjointSolution:
    """Periodic solution of the adjoint equation along ``cycle``.

    The orbit is re-integrated ``refine`` times finer than the cycle grid and
    the adjoint is stepped backward at twice that spacing.  Backward sweeps
    around the orbit are repeated until the end state of a sweep agrees with
    its start within ``tol`` (relative).  The result is scaled once so that
    ``Z . dx/dt = omega``; the adjoint flow conserves that product.
    """
    p = cycle.params.as_array()
    m = (len(cycle.samples) - 1) * refine
    x = _run(float(cycle.samples[0, 0]), float(cycle.samples[0, 1]), p, cycle.period / m, m)
    h = 2.0 * cycle.period / m
    omega = cycle.omega
    f_end = np.array(_field(x[-1, 0], x[-1, 1], p, 0.0))
    z_end = f_end * (omega / np.dot(f_end, f_end))
    for sweep in range(1, max_sweeps + 1):
        z = _adjoint_sweep(x, z_end, p, h)
        if not np.all(np.isfinite(z)):
            raise AdjointDivergedError(f"adjoint sweep {sweep} produced non-finite values")
        z0 = z[0]
        f0 = np.array(_field(x[0, 0], x[0, 1], p, 0.0))
        z0 = z0 * (omega / np.dot(z0, f0))
        change = np.max(np.abs(z0 - z_end)) / np.max(np.abs(z0))
        z_end = z0
        if change < tol:
            break
    else:
        raise AdjointDivergedError(f"no periodic adjoint solution after {max_sweeps} sweeps")
    z = _adjoint_sweep(x, z_end, p, h)
    states = x[::2]
    # single scalar normalization at t = 0; Z . f is conserved by the adjoint flow
    z = z * (omega / np.dot(z[0], np.array(_field(x[0, 0], x[0, 1], p, 0.0))))
    times = h * np.arange(len(states))
    return AdjointSolution(times=times, states=states, z=z, omega=omega, sweeps=sweep)


def compute_adjoint_prc(cycle: LimitCycle, params: RHHParams | None = None, K: int = 200,
                        tol: float = 1e-8, max_sweeps: int = 50) -> FourierPRC:
    """Voltage component of the normalized adjoint, per unit u = I/C, as a Fourier PRC."""
    if params is not None and params != cycle.params:
        raise ValueError("params differ from the ones the cycle was computed with")
    sol = solve_adjoint(cycle, tol=tol, max_sweeps=max_sweeps)
    theta = sol.omega * sol.times
    zV = sol.z[:, 0] / cycle.params.C
    return fit_fourier(theta[:-1], zV[:-1], K)
