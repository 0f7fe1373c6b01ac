"""
Energy-optimal desynchronizing input and its two approximations
===============================================================

Solves the Euler-Lagrange boundary value problem by shooting for the
sine PRC at beta = 10, then builds u1 and u2 and rescales them to the same
energy.
"""
import numpy as np

from phasedesync.control import (approx_lyapunov, approx_u1, approx_u2, cost_G,
                                 lyapunov_exponent, rescale_energy, shoot_optimal)
from phasedesync.prc import SinePRC

prc, omega, beta = SinePRC(0.5), 1.0, 10.0

sol = shoot_optimal(prc, omega, beta)
print("optimal:", {k: round(v, 6) for k, v in sol.summary().items()})

E = sol.waveform.energy
for name, w in [("u1", approx_u1(prc, omega, beta)), ("u2", approx_u2(prc, omega, beta))]:
    r = rescale_energy(w, E)
    print(f"{name}: raw energy {w.energy:.4f} -> {r.energy:.4f}, "
          f"Lambda = {lyapunov_exponent(prc, omega, r):.4f}, G = {cost_G(prc, omega, r, beta):.4f}")

# the approximate Lyapunov exponent along theta = omega t
print("approximate Lambda (no rescaling):", approx_lyapunov(prc, omega, beta))

# negative beta asks for synchronization instead
sync = shoot_optimal(prc, omega, -5.0)
print(f"beta = -5: Lambda = {sync.lyap:.4f}, energy = {sync.waveform.energy:.4f}")
sol.waveform.to_csv("u_opt_sin_beta10.csv")
