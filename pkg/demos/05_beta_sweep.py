"""
Sweep over the weighting parameter beta
=======================================

Final phase difference after one cycle for the optimal input and the two
energy-matched approximations, closed-sine PRC, phi0 = 0.01.
"""
from phasedesync.experiments import beta_sweep, write_sweep_csv
from phasedesync.prc import SinePRC

rows = beta_sweep(SinePRC(0.5), 1.0, [0, 2, 4, 6, 8, 10], 0.01)
print(" beta    phi_opt     phi_u2      phi_u1")
for r in rows:
    print(f"{r.beta:5.1f}  {r.phi_opt:.7f}  {r.phi_u2:.7f}  {r.phi_u1:.7f}")
write_sweep_csv(rows, "beta_sweep_sin.csv")
