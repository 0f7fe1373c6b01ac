import json

import numpy as np
import pytest

import phasedesync.population as pop
from phasedesync.control import ControlWaveform
from phasedesync.experiments import preset_inputs
from phasedesync.numerics import IntegrationDivergedError, trapezoid_integral
from phasedesync.population import (EnergyStats, MonteCarloError, PopulationConfig,
                                    controller_should_trigger, detect_spikes, monte_carlo_energy,
                                    simulate_population, write_summary)
from phasedesync.rhh import find_limit_cycle


@pytest.fixture(scope="module")
def rhh_waves():
    _, preset, sol, waves = preset_inputs("rhh")
    return sol, waves


@pytest.fixture(scope="module")
def cycle():
    return find_limit_cycle()


def small(**kw):
    base = dict(N=6, duration=60.0)
    base.update(kw)
    return PopulationConfig(**base)


def test_config_defaults():
    c = PopulationConfig()
    assert (c.N, c.alpha, c.D, c.I_b, c.threshold, c.duration, c.dt, c.jitter) == \
        (100, 0.04, 2.0, 10.0, -30.0, 350.0, 0.01, 0.5)
    assert c.steps == 35000


def test_config_validation_lists_all_problems():
    with pytest.raises(ValueError) as exc:
        PopulationConfig(N=1, dt=0.0, duration=-1.0)
    msg = str(exc.value)
    assert "N" in msg and "dt" in msg and "duration" in msg


def test_trigger_rule():
    assert controller_should_trigger(-31.0, -29.0, playing=True) is False
    assert controller_should_trigger(-31.0, -29.0, playing=False) is True
    assert controller_should_trigger(-29.0, -31.0, playing=False) is False
    assert controller_should_trigger(-30.0, -29.0, playing=False) is False
    assert controller_should_trigger(-31.0, -30.0, playing=False) is True


def test_detect_spikes_constant():
    assert detect_spikes(np.full(1000, -65.0), 0.01).size == 0


def test_detect_spikes_one_cycle(cycle):
    assert detect_spikes(cycle.samples[:, 0], cycle.dt).size == 1


def test_detect_spikes_refractory():
    v = np.array([-1, 1, -1, 1, -1, -1, -1, 1.0])
    # crossings at 0.5, 2.5, 6.5 (dt = 1); refractory 3 drops the second one
    np.testing.assert_allclose(detect_spikes(v, 1.0, refractory=3.0), [0.5, 6.5])


def test_zero_noise_identical_start_stays_identical(cycle):
    cfg = small(D=0.0, duration=100.0)
    x = cycle.samples[1234]
    tr = simulate_population(cfg, initial=(np.full(cfg.N, x[0]), np.full(cfg.N, x[1])),
                             record_voltages=True)
    assert np.all(tr.voltages == tr.voltages[:, :1])


def test_determinism(rhh_waves):
    _, waves = rhh_waves
    a = simulate_population(small(seed=5), waves["approx2"], record_voltages=True)
    b = simulate_population(small(seed=5), waves["approx2"], record_voltages=True)
    assert np.array_equal(a.voltages, b.voltages)
    assert np.array_equal(a.control, b.control) and a.energy == b.energy
    c = simulate_population(small(seed=6), waves["approx2"], record_voltages=True)
    assert not np.array_equal(a.voltages, c.voltages)


def test_permutation_symmetry(rhh_waves):
    _, waves = rhh_waves
    cfg = small(N=7, seed=3)
    perm = np.array([4, 0, 6, 2, 1, 5, 3])
    a = simulate_population(cfg, waves["optimal"])
    b = simulate_population(cfg, waves["optimal"], streams=perm)
    assert np.array_equal(a.mean_voltage, b.mean_voltage)
    assert np.array_equal(a.control, b.control) and a.energy == b.energy
    for i, j in enumerate(perm):
        assert np.array_equal(b.spikes[i], a.spikes[j])


def test_energy_and_triggers(rhh_waves):
    sol, waves = rhh_waves
    w = waves["approx2"]
    tr = simulate_population(PopulationConfig(noise_scheme="per-step", seed=1), w)
    T = w.period
    assert tr.energy >= 0
    assert tr.energy == pytest.approx(trapezoid_integral(tr.control ** 2, 0.01), abs=1e-10)
    assert len(tr.trigger_times) >= 2
    assert np.all(np.diff(tr.trigger_times) >= T - 1e-9)
    # each completed playback delivers the single-cycle energy
    dt = 0.01
    for t0 in tr.trigger_times:
        if t0 + T > tr.times[-1]:
            continue
        i0 = int(round(t0 / dt))
        seg = tr.control[i0:i0 + int(np.ceil(T / dt)) + 1]
        assert trapezoid_integral(seg ** 2, dt) == pytest.approx(w.energy, rel=0.01)
    complete = np.sum(tr.trigger_times + T <= tr.times[-1])
    assert complete * w.energy <= tr.energy * 1.01
    assert tr.energy <= len(tr.trigger_times) * w.energy * 1.01


def test_no_waveform_no_energy():
    tr = simulate_population(small())
    assert tr.energy == 0.0 and tr.trigger_times.size == 0
    for s in tr.spikes:
        assert np.all((s >= 0) & (s <= 60.0))


def test_interspike_interval_near_period(cycle):
    tr = simulate_population(PopulationConfig())
    for s in tr.spikes:
        assert abs(np.mean(np.diff(s)) - cycle.period) <= 0.2 * cycle.period


def test_uncontrolled_population_is_synchronized():
    """Without control the population should keep firing in tight bursts."""
    tr = simulate_population(PopulationConfig())
    s = np.sort(np.concatenate(tr.spikes))
    s = s[s > 100.0]
    bursts = np.split(s, np.nonzero(np.diff(s) > 3.0)[0] + 1)
    assert max(np.std(b) for b in bursts) < 2.0


def _dispersion(tr, period, window=100.0):
    # 1 - Kuramoto order parameter of spike-based phases, averaged over the window
    t_end = tr.times[-1]
    vals = []
    for t in np.arange(t_end - window, t_end, 1.0):
        ph = [2 * np.pi * (t - s[s <= t][-1]) / period for s in tr.spikes if np.any(s <= t)]
        vals.append(1 - abs(np.mean(np.exp(1j * np.array(ph)))))
    return float(np.mean(vals))


def test_control_increases_dispersion(rhh_waves, cycle):
    _, waves = rhh_waves
    free, ctl = [], []
    for seed in range(1, 21):
        cfg = PopulationConfig(seed=seed)
        free.append(_dispersion(simulate_population(cfg), cycle.period))
        ctl.append(_dispersion(simulate_population(cfg, waves["approx2"]), cycle.period))
    assert np.mean(ctl) > np.mean(free)


def test_divergence_reported():
    wave = ControlWaveform(np.full(11, 1e150), 1.0)
    with pytest.raises(IntegrationDivergedError) as exc:
        simulate_population(small(), wave)
    assert "neuron" in str(exc.value)


def test_trace_csv(tmp_path, rhh_waves):
    _, waves = rhh_waves
    tr = simulate_population(small(), waves["optimal"])
    paths = tr.write_csv(tmp_path / "pop")
    head = {k: open(p).readline().strip() for k, p in paths.items()}
    assert head == {"mean_v": "t,mean_v", "u": "t,u", "spikes": "neuron_index,spike_time"}


def test_monte_carlo_statistics(tmp_path, rhh_waves):
    _, waves = rhh_waves
    cfg = small(N=4, duration=40.0, noise_scheme="per-step")
    stats = monte_carlo_energy(cfg, {"optimal": waves["optimal"]}, runs=3)
    s = stats["optimal"]
    ref = [simulate_population(PopulationConfig(**{**cfg.to_dict(), "seed": k}),
                               waves["optimal"]).energy for k in (1, 2, 3)]
    assert s.runs == 3 and s.failures == 0
    assert s.mean_energy == pytest.approx(np.mean(ref), rel=1e-14)
    assert s.stdev_energy == pytest.approx(np.std(ref, ddof=1), rel=1e-12, abs=1e-12)
    write_summary(stats, tmp_path / "mc.json")
    data = json.loads((tmp_path / "mc.json").read_text())
    assert set(data[0]) >= {"label", "runs", "mean_energy", "stdev_energy"}


def test_monte_carlo_failures(monkeypatch):
    real = pop.simulate_population

    def flaky(cfg, wave=None, **kw):
        if cfg.seed in (2, 3):
            raise IntegrationDivergedError(1.0, "boom")
        return real(cfg, wave, **kw)

    monkeypatch.setattr(pop, "simulate_population", flaky)
    cfg = small(N=3, duration=20.0)
    with pytest.raises(MonteCarloError):
        monte_carlo_energy(cfg, {"none": None}, runs=10)
    stats = monte_carlo_energy(cfg, {"none": None}, runs=20)
    assert stats["none"].failures == 2 and stats["none"].runs == 18
    with pytest.raises(ValueError):
        monte_carlo_energy(cfg, {"none": None}, runs=1)
