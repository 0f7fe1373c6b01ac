"""Two-oscillator runs and beta sweeps comparing the optimal input with its approximations."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass

import numpy as np

from .control import (BVPSolution, ControlWaveform, approx_u1, approx_u2, rescale_energy,
                      shoot_optimal)
from .numerics import Trajectory, integrate_ode
from .prc import TWO_PI, PhaseResponseCurve, builtin_prc

log = logging.getLogger(__name__)

LABELS = ("optimal", "approx1", "approx2")


@dataclass(frozen=True)
class Preset:
    prc: str
    omega: float
    beta: float
    phi0: float


PRESETS = {
    "sin": Preset("sin", 1.0, 10.0, 0.01),
    "sniper": Preset("sniper", 1.0, 10.0, 0.01),
    "rhh": Preset("rhh", TWO_PI / 11.85, 7.0, 0.001),
    "rhh-sync": Preset("rhh", TWO_PI / 11.85, -5.0, 0.5),
}


def get_preset(name: str) -> Preset:
    try:
        return PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


@dataclass(frozen=True, eq=False)
class PairRunResult:
    phi_traj: Trajectory
    label: str
    phi0: float

    @property
    def phi_final(self) -> float:
        return float(self.phi_traj.final)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "phi"])
            w.writerows(zip(self.phi_traj.times.tolist(), self.phi_traj.states.tolist()))


def two_oscillator_run(prc: PhaseResponseCurve, omega: float, waveform: ControlWaveform | None,
                       phi0: float, dt: float | None = None, label: str = "") -> PairRunResult:
    """Drive theta_1(0) = 0 and theta_2(0) = phi0 with the same input for one period."""
    T = TWO_PI / omega
    if waveform is None:
        waveform = ControlWaveform.zeros(T)
    dt = waveform.dt if dt is None else dt

    # state (theta_1, phi): integrating phi directly keeps its digits when it is
    # small next to theta and makes phi' vanish identically when u = 0 or phi = 0
    def field(x, t):
        u = waveform(t)
        z1 = prc(x[0])
        return np.array([omega + z1 * u, (prc(x[0] + x[1]) - z1) * u])

    traj = integrate_ode(field, np.array([0.0, phi0]), 0.0, T, dt)
    return PairRunResult(Trajectory(traj.times, traj.states[:, 1]), label, float(phi0))


def input_set(prc: PhaseResponseCurve, omega: float, beta: float, tol: float = 1e-8
              ) -> tuple[BVPSolution, dict[str, ControlWaveform]]:
    """The optimal input and both approximations rescaled to its energy."""
    sol = shoot_optimal(prc, omega, beta, tol=tol)
    n = len(sol.waveform.samples) - 1
    waves = {"optimal": sol.waveform}
    if sol.waveform.energy > 0:
        e = sol.waveform.energy
        waves["approx1"] = rescale_energy(approx_u1(prc, omega, beta, n), e)
        waves["approx2"] = rescale_energy(approx_u2(prc, omega, beta, n), e)
    else:
        # beta = 0: every input is identically zero
        waves["approx1"] = approx_u1(prc, omega, beta, n)
        waves["approx2"] = approx_u2(prc, omega, beta, n)
    return sol, waves


def preset_inputs(name: str):
    p = get_preset(name)
    prc = builtin_prc(p.prc)
    sol, waves = input_set(prc, p.omega, p.beta)
    return prc, p, sol, waves


@dataclass(frozen=True)
class SweepRow:
    beta: float
    phi_opt: float = float("nan")
    phi_u1: float = float("nan")
    phi_u2: float = float("nan")
    error: str | None = None


def beta_sweep(prc: PhaseResponseCurve, omega: float, beta_list, phi0: float,
               dt: float | None = None) -> list[SweepRow]:
    rows = []
    for beta in beta_list:
        try:
            _, waves = input_set(prc, omega, float(beta))
            phis = [two_oscillator_run(prc, omega, waves[k], phi0, dt).phi_final for k in LABELS]
            rows.append(SweepRow(float(beta), *phis))
        except Exception as exc:  # per-beta failures are reported, not fatal
            log.warning("beta=%g failed: %s", beta, exc)
            rows.append(SweepRow(float(beta), error=f"{type(exc).__name__}: {exc}"))
    return rows


def write_sweep_csv(rows: list[SweepRow], path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["beta", "phi_opt", "phi_u1", "phi_u2"])
        for r in rows:
            w.writerow([r.beta, r.phi_opt, r.phi_u1, r.phi_u2])
