"""Phase response curves and the single-oscillator phase model.

Three PRC shapes are supported: ``a*sin(theta)`` (Hopf-like),
``a*(1 - cos(theta))`` (SNIPER-like) and a truncated Fourier series, which is
how numerically computed PRCs (e.g. the reduced Hodgkin-Huxley one) are
stored.  All of them evaluate Z, Z' and Z'' analytically.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Callable

import numpy as np

from .numerics import InsufficientDataError, Trajectory, integrate_ode

TWO_PI = 2.0 * math.pi
SCHEMA_VERSION = 1


class InsufficientResolutionError(InsufficientDataError):
    pass


def _check_order(order: int):
    if order not in (0, 1, 2):
        raise ValueError(f"derivative order must be 0, 1 or 2, got {order!r}")


class PhaseResponseCurve:
    """Base class.  Subclasses implement :meth:`derivatives`."""

    variant: str = ""

    def __call__(self, theta, order: int = 0):
        _check_order(order)
        return self.derivatives(theta)[order]

    def derivatives(self, theta):
        """Return ``(Z, Z', Z'')`` at ``theta`` (scalar or array)."""
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))


@dataclass(frozen=True)
class SinePRC(PhaseResponseCurve):
    amplitude: float = 0.5
    variant = "closed-sine"

    def derivatives(self, theta):
        th = np.mod(theta, TWO_PI)
        s, c = np.sin(th), np.cos(th)
        a = self.amplitude
        return a * s, a * c, -a * s

    def to_dict(self):
        return {"schema_version": SCHEMA_VERSION, "variant": self.variant,
                "amplitude": self.amplitude}


@dataclass(frozen=True)
class SniperPRC(PhaseResponseCurve):
    amplitude: float = 0.3
    variant = "closed-sniper"

    def derivatives(self, theta):
        th = np.mod(theta, TWO_PI)
        s, c = np.sin(th), np.cos(th)
        a = self.amplitude
        return a * (1.0 - c), a * s, a * c

    def to_dict(self):
        return {"schema_version": SCHEMA_VERSION, "variant": self.variant,
                "amplitude": self.amplitude}


@dataclass(frozen=True, eq=False)
class FourierPRC(PhaseResponseCurve):
    """``Z(theta) = a0 + sum_k a[k-1] cos(k theta) + b[k-1] sin(k theta)``, k = 1..K."""

    a0: float
    a: np.ndarray
    b: np.ndarray
    _k: np.ndarray = field(init=False, repr=False)
    variant = "fourier"

    def __post_init__(self):
        a = np.array(self.a, dtype=float)
        b = np.array(self.b, dtype=float)
        if a.ndim != 1 or a.shape != b.shape or a.size < 1:
            raise ValueError("a and b must be 1-D arrays of equal length K >= 1")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b)) and math.isfinite(self.a0)):
            raise ValueError("Fourier coefficients must be finite")
        a.flags.writeable = False
        b.flags.writeable = False
        object.__setattr__(self, "a0", float(self.a0))
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "_k", np.arange(1, a.size + 1, dtype=float))

    @property
    def K(self) -> int:
        return self.a.size

    def derivatives(self, theta):
        th = np.mod(np.asarray(theta, dtype=float), TWO_PI)
        kth = np.multiply.outer(th, self._k)
        c, s = np.cos(kth), np.sin(kth)
        k = self._k
        z = self.a0 + c @ self.a + s @ self.b
        dz = s @ (-k * self.a) + c @ (k * self.b)
        d2z = -(c @ (k * k * self.a) + s @ (k * k * self.b))
        return z, dz, d2z

    def to_dict(self):
        return {"schema_version": SCHEMA_VERSION, "variant": self.variant,
                "a0": self.a0, "a": self.a.tolist(), "b": self.b.tolist()}

    def __eq__(self, other):
        return (isinstance(other, FourierPRC) and self.a0 == other.a0
                and np.array_equal(self.a, other.a) and np.array_equal(self.b, other.b))

    __hash__ = None


def prc_eval(prc: PhaseResponseCurve, theta, order: int = 0):
    return prc(theta, order)


def prc_from_dict(data: dict) -> PhaseResponseCurve:
    variant = data.get("variant")
    version = data.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ValueError(f"unsupported PRC schema version {version}")
    if variant == "closed-sine":
        return SinePRC(float(data["amplitude"]))
    if variant == "closed-sniper":
        return SniperPRC(float(data["amplitude"]))
    if variant == "fourier":
        return FourierPRC(data["a0"], data["a"], data["b"])
    raise ValueError(f"unknown PRC variant {variant!r}")


def load_prc(path) -> PhaseResponseCurve:
    return prc_from_dict(json.loads(Path(path).read_text()))


def fit_fourier(theta_samples, z_samples, K: int) -> FourierPRC:
    """Fourier coefficients of uniformly sampled periodic data.

    The samples must cover [0, 2pi) uniformly; a duplicated endpoint at 2pi
    is dropped.  The periodic trapezoid rule is used for the projections.
    """
    theta = np.asarray(theta_samples, dtype=float)
    z = np.asarray(z_samples, dtype=float)
    if theta.shape != z.shape or theta.ndim != 1:
        raise ValueError("theta and z samples must be 1-D and of equal length")
    if len(theta) > 1 and abs(theta[-1] - theta[0] - TWO_PI) < 1e-9:
        theta, z = theta[:-1], z[:-1]
    m = len(theta)
    if K < 1:
        raise ValueError("K must be >= 1")
    if m < 2 * K + 1:
        raise InsufficientResolutionError(f"{m} samples cannot resolve K={K} harmonics")
    step = TWO_PI / m
    if not np.allclose(np.diff(theta), step, rtol=0, atol=1e-9):
        raise ValueError("theta samples must be uniformly spaced over one period")
    k = np.arange(1, K + 1)
    kth = np.multiply.outer(theta, k)
    # periodic trapezoid rule: (1/pi) * step * sum(...)
    a = (step / math.pi) * (z @ np.cos(kth))
    b = (step / math.pi) * (z @ np.sin(kth))
    a0 = float(np.mean(z))
    return FourierPRC(a0, a, b)


@dataclass(frozen=True)
class PhaseModelParams:
    omega: float

    def __post_init__(self):
        if not self.omega > 0:
            raise ValueError("omega must be positive")

    @property
    def period(self) -> float:
        return TWO_PI / self.omega

    @classmethod
    def from_period(cls, period: float) -> "PhaseModelParams":
        return cls(TWO_PI / period)


def _as_input(u) -> Callable:
    if u is None:
        return lambda t: 0.0
    if callable(u):
        return u
    return lambda t: float(u)


def simulate_phase(prc: PhaseResponseCurve, params: PhaseModelParams, u, theta0: float,
                   t_end: float, dt: float) -> Trajectory:
    """Integrate ``dtheta/dt = omega + Z(theta) u(t)`` from ``t=0``.

    ``u`` is ``None`` (no input), a constant, or a callable such as a
    :class:`~phasedesync.control.ControlWaveform`.  Phase is returned unwrapped.
    """
    if not t_end > 0:
        raise ValueError("t_end must be positive")
    u = _as_input(u)
    omega = params.omega

    def field(theta, t):
        return omega + prc(theta) * u(t)

    return integrate_ode(field, theta0, 0.0, t_end, dt)


@lru_cache(maxsize=None)
def rhh_prc() -> FourierPRC:
    """The packaged 200-harmonic PRC of the reduced Hodgkin-Huxley neuron at I_b = 10."""
    text = resources.files("phasedesync").joinpath("data/rhh_prc.json").read_text()
    return prc_from_dict(json.loads(text))


BUILTIN_PRCS = {
    "sin": lambda: SinePRC(0.5),
    "sniper": lambda: SniperPRC(0.3),
    "rhh": rhh_prc,
}


def builtin_prc(name: str) -> PhaseResponseCurve:
    try:
        return BUILTIN_PRCS[name]()
    except KeyError:
        raise ValueError(f"unknown PRC {name!r}; choose from {sorted(BUILTIN_PRCS)}") from None
