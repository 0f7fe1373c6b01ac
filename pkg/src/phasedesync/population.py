"""Noisy, electrotonically coupled RHH population under event-based control.

Each neuron obeys::

    dV_i = [f_V(V_i, n_i) + alpha (mean(V) - V_i) + u(t)] dt + sqrt(2 D) dW_i
    dn_i = f_n(V_i, n_i) dt

and is stepped by Euler-Maruyama.  The controller watches mean(V); on an
upward crossing of ``threshold`` it plays one period of a precomputed
waveform, ignoring further crossings until playback ends.
"""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numba
import numpy as np

from .control import ControlWaveform
from .numerics import IntegrationDivergedError, trapezoid_integral
from .rhh import RHHParams, _field, find_limit_cycle

log = logging.getLogger(__name__)


# "euler-maruyama": increment sqrt(2 D dt) xi (white noise of intensity D).
# "per-step": eta = sqrt(2 D) xi drawn each step and integrated like the drift,
# increment sqrt(2 D) xi dt; equivalent to Euler-Maruyama with intensity D*dt.
NOISE_SCHEMES = ("euler-maruyama", "per-step")


@dataclass(frozen=True)
class PopulationConfig:
    N: int = 100
    alpha: float = 0.04
    D: float = 2.0
    I_b: float = 10.0
    threshold: float = -30.0
    duration: float = 350.0
    dt: float = 0.01
    seed: int = 0
    jitter: float = 0.5
    noise_scheme: str = "euler-maruyama"

    def __post_init__(self):
        errors = []
        if not (isinstance(self.N, (int, np.integer)) and self.N >= 2):
            errors.append(f"N must be an integer >= 2, got {self.N!r}")
        if not self.dt > 0:
            errors.append(f"dt must be positive, got {self.dt!r}")
        if not self.duration > 0:
            errors.append(f"duration must be positive, got {self.duration!r}")
        if self.D < 0:
            errors.append(f"D must be non-negative, got {self.D!r}")
        if self.jitter < 0:
            errors.append(f"jitter must be non-negative, got {self.jitter!r}")
        if self.noise_scheme not in NOISE_SCHEMES:
            errors.append(f"noise_scheme must be one of {NOISE_SCHEMES}, got {self.noise_scheme!r}")
        if errors:
            raise ValueError("; ".join(errors))

    @property
    def steps(self) -> int:
        return int(round(self.duration / self.dt))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class SimulationTrace:
    times: np.ndarray
    mean_voltage: np.ndarray
    control: np.ndarray
    spikes: list
    energy: float
    trigger_times: np.ndarray
    voltages: np.ndarray | None = field(default=None, repr=False)

    def write_csv(self, prefix):
        """Write ``<prefix>-mean_v.csv``, ``<prefix>-u.csv`` and ``<prefix>-spikes.csv``."""
        paths = {}
        for name, col, values in (("mean_v", "mean_v", self.mean_voltage),
                                  ("u", "u", self.control)):
            path = f"{prefix}-{name}.csv"
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["t", col])
                w.writerows(zip(self.times.tolist(), values.tolist()))
            paths[name] = path
        path = f"{prefix}-spikes.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["neuron_index", "spike_time"])
            for i, st in enumerate(self.spikes):
                for s in st.tolist():
                    w.writerow([i, s])
        paths["spikes"] = path
        return paths


@numba.njit(cache=True)
def _should_trigger(mean_v_prev, mean_v_now, playing, threshold):
    return (not playing) and mean_v_prev < threshold and mean_v_now >= threshold


def controller_should_trigger(mean_v_prev: float, mean_v_now: float, playing: bool,
                              threshold: float = -30.0) -> bool:
    """Upward crossing of ``threshold`` while no waveform is playing."""
    return bool(_should_trigger(float(mean_v_prev), float(mean_v_now), bool(playing),
                                float(threshold)))


@numba.njit(cache=True)
def _mean(v):
    # summation in sorted order makes the mean independent of neuron ordering
    return np.sort(v).sum() / v.shape[0]


@numba.njit(cache=True)
def _simulate(V, n, p, alpha, noise, wave, wave_dt, threshold, dt):
    steps = noise.shape[0]
    N = V.shape[0]
    playlen = wave_dt * (wave.shape[0] - 1)
    volts = np.empty((steps + 1, N))
    mean_v = np.empty(steps + 1)
    control = np.zeros(steps + 1)
    triggers = np.empty(steps + 1)
    n_trig = 0
    start = -1.0
    playing = False
    prev = np.nan
    dV = np.empty(N)
    dn = np.empty(N)
    for k in range(steps + 1):
        t = k * dt
        vbar = _mean(V)
        mean_v[k] = vbar
        volts[k] = V
        if playing and t - start >= playlen - 1e-9 * dt:
            playing = False
        if wave.shape[0] > 1 and k > 0 and _should_trigger(prev, vbar, playing, threshold):
            playing = True
            start = t
            triggers[n_trig] = t
            n_trig += 1
        prev = vbar
        u = 0.0
        if playing:
            s = (t - start) / wave_dt
            j = int(s)
            if j >= wave.shape[0] - 1:
                u = wave[wave.shape[0] - 1]
            else:
                f = s - j
                u = (1.0 - f) * wave[j] + f * wave[j + 1]
        control[k] = u
        if k == steps:
            break
        for i in range(N):
            fV, fn = _field(V[i], n[i], p, u)
            dV[i] = fV + alpha * (vbar - V[i])
            dn[i] = fn
        for i in range(N):
            V[i] += dt * dV[i] + noise[k, i]
            n[i] += dt * dn[i]
            if not (math.isfinite(V[i]) and math.isfinite(n[i])):
                return volts[:k + 1], mean_v[:k + 1], control[:k + 1], triggers[:n_trig], i
    return volts, mean_v, control, triggers[:n_trig], -1


@lru_cache(maxsize=8)
def _cycle(I_b: float):
    return find_limit_cycle(RHHParams(I_b=I_b))


def initial_state(config: PopulationConfig, streams=None):
    """Initial (V, n) per neuron and each neuron's random generator.

    Neuron i draws from its own stream keyed by ``(seed, streams[i])``: one
    uniform jitter draw places it on the limit cycle at phase
    ``jitter * (U - 1/2)``; subsequent draws are its noise increments.
    """
    streams = np.arange(config.N) if streams is None else np.asarray(streams)
    if streams.shape != (config.N,):
        raise ValueError("streams must hold one id per neuron")
    rngs = [np.random.default_rng([int(config.seed), int(s)]) for s in streams]
    phases = np.array([config.jitter * (r.random() - 0.5) for r in rngs])
    state = _cycle(float(config.I_b)).state_at_phase(phases)
    return state[:, 0].copy(), state[:, 1].copy(), rngs


def detect_spikes(v_trace, dt: float, threshold: float = 0.0, refractory: float = 2.0,
                  t0: float = 0.0) -> np.ndarray:
    """Upward crossings of ``threshold`` (linearly interpolated), at least ``refractory`` apart."""
    v = np.asarray(v_trace, dtype=float)
    idx = np.nonzero((v[:-1] < threshold) & (v[1:] >= threshold))[0]
    if idx.size == 0:
        return np.empty(0)
    frac = (threshold - v[idx]) / (v[idx + 1] - v[idx])
    times = t0 + (idx + frac) * dt
    keep = [times[0]]
    for t in times[1:]:
        if t - keep[-1] >= refractory:
            keep.append(t)
    return np.array(keep)


def simulate_population(config: PopulationConfig, waveform: ControlWaveform | None = None,
                        streams=None, initial=None, record_voltages: bool = False
                        ) -> SimulationTrace:
    """Run one population simulation.

    ``streams`` relabels the per-neuron random streams (default: neuron
    index).  ``initial`` overrides the initial ``(V, n)`` arrays; the jitter
    draw is still consumed so the noise does not change.
    """
    V, n, rngs = initial_state(config, streams)
    if initial is not None:
        V = np.array(initial[0], dtype=float, copy=True)
        n = np.array(initial[1], dtype=float, copy=True)
        if V.shape != (config.N,) or n.shape != (config.N,):
            raise ValueError("initial V and n must have shape (N,)")
    steps = config.steps
    dt = config.dt
    if config.noise_scheme == "euler-maruyama":
        scale = math.sqrt(2.0 * config.D * dt)
    else:
        scale = math.sqrt(2.0 * config.D) * dt
    noise = np.empty((steps, config.N))
    for i, r in enumerate(rngs):
        noise[:, i] = scale * r.standard_normal(steps)
    if waveform is None:
        wave, wave_dt = np.zeros(1), 1.0
    else:
        wave, wave_dt = np.ascontiguousarray(waveform.samples), waveform.dt
    p = RHHParams(I_b=config.I_b).as_array()
    volts, mean_v, control, triggers, bad = _simulate(
        V, n, p, float(config.alpha), noise, wave, float(wave_dt), float(config.threshold), dt)
    if bad >= 0:
        t_fail = (len(mean_v) - 1) * dt
        raise IntegrationDivergedError(t_fail, f"neuron {bad} diverged at t={t_fail:.6g} ms")
    times = dt * np.arange(steps + 1)
    spikes = [detect_spikes(volts[:, i], dt) for i in range(config.N)]
    return SimulationTrace(times=times, mean_voltage=mean_v, control=control, spikes=spikes,
                           energy=trapezoid_integral(control ** 2, dt), trigger_times=triggers,
                           voltages=volts if record_voltages else None)


@dataclass(frozen=True)
class EnergyStats:
    label: str
    runs: int
    mean_energy: float
    stdev_energy: float
    failures: int = 0
    energies: tuple = field(default=(), repr=False)

    def to_dict(self) -> dict:
        return {"label": self.label, "runs": self.runs, "mean_energy": self.mean_energy,
                "stdev_energy": self.stdev_energy, "failures": self.failures}


class MonteCarloError(RuntimeError):
    pass


def monte_carlo_energy(config: PopulationConfig, waveforms: dict, runs: int = 100
                       ) -> dict[str, EnergyStats]:
    """Energy statistics over ``runs`` noise realizations (seeds seed+1 .. seed+runs) per waveform."""
    if runs < 2:
        raise ValueError("runs must be >= 2")
    out = {}
    for label, wave in waveforms.items():
        energies = []
        failures = 0
        for r in range(1, runs + 1):
            cfg = PopulationConfig(**{**config.to_dict(), "seed": config.seed + r})
            try:
                energies.append(simulate_population(cfg, wave).energy)
            except IntegrationDivergedError as exc:
                log.warning("%s run %d failed: %s", label, r, exc)
                failures += 1
        if failures > 0.1 * runs:
            raise MonteCarloError(f"{failures}/{runs} runs failed for {label!r}")
        e = np.array(energies)
        out[label] = EnergyStats(label=label, runs=len(e), mean_energy=float(e.mean()),
                                 stdev_energy=float(e.std(ddof=1)), failures=failures,
                                 energies=tuple(e.tolist()))
    return out


def write_summary(stats: dict[str, EnergyStats], path):
    with open(path, "w") as fh:
        json.dump([s.to_dict() for s in stats.values()], fh, indent=1)
