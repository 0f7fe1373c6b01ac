"""
Reduced Hodgkin-Huxley neuron: limit cycle and adjoint PRC
==========================================================

Finds the periodic orbit at I_b = 10, solves the adjoint equation along it
and fits the voltage component with 200 harmonics.
"""
import time

import numpy as np

from phasedesync.rhh import RHHParams, compute_adjoint_prc, find_limit_cycle, solve_adjoint

t0 = time.perf_counter()
cycle = find_limit_cycle(RHHParams(I_b=10.0))
print(f"period T = {cycle.period:.5f} ms  ({time.perf_counter() - t0:.1f} s)")
print(f"V range on the cycle: {cycle.samples[:, 0].min():.1f} .. {cycle.samples[:, 0].max():.1f} mV")

# the adjoint is normalized so that Z . dx/dt = omega along the whole orbit
adj = solve_adjoint(cycle)
prod = adj.normalization(cycle.params)
print("max |Z.f/omega - 1| =", np.abs(prod / adj.omega - 1).max(), " sweeps:", adj.sweeps)

prc = compute_adjoint_prc(cycle, K=200)
th = np.linspace(0, 2 * np.pi, 1000, endpoint=False)
z = prc(th)
print(f"Z_RHH: min {z.min():.4f} at theta={th[z.argmin()]:.2f}, "
      f"max {z.max():.4f} at theta={th[z.argmax()]:.2f}")

cycle.to_csv("rhh_cycle.csv")
prc.save("rhh_prc.json")
