"""
Two oscillators under a common input
====================================

The named presets reproduce the reference runs: desynchronization with the
RHH PRC at beta = 7 and synchronization at beta = -5.
"""
import numpy as np

from phasedesync.experiments import LABELS, preset_inputs, two_oscillator_run

for name in ("sin", "rhh", "rhh-sync"):
    prc, p, sol, waves = preset_inputs(name)
    T = 2 * np.pi / p.omega
    print(f"\n{name}: beta={p.beta}, phi0={p.phi0}, E*={sol.waveform.energy:.4f}, "
          f"exp(Lambda T)={np.exp(sol.lyap * T):.3f}")
    for label in LABELS:
        run = two_oscillator_run(prc, p.omega, waves[label], p.phi0, label=label)
        print(f"  {label:9s} phi(T) = {run.phi_final:.5f}  ratio {run.phi_final / p.phi0:.3f}")
