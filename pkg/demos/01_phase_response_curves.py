"""
Phase response curves
=====================

The three PRCs used throughout the package, their derivatives, and a
Fourier fit of sampled data.
"""
import numpy as np

from phasedesync.prc import SinePRC, SniperPRC, fit_fourier, rhh_prc

theta = np.linspace(0, 2 * np.pi, 9)

# closed forms evaluate Z, Z' and Z'' analytically
for name, z in [("sin", SinePRC(0.5)), ("sniper", SniperPRC(0.3)), ("rhh", rhh_prc())]:
    print(f"{name:7s} Z   ", np.round(z(theta), 4))
    print(f"{'':7s} Z'  ", np.round(z(theta, 1), 4))

# a Fourier fit recovers the SNIPER shape: a0 = 0.3, a1 = -0.3, nothing else
grid = np.linspace(0, 2 * np.pi, 256, endpoint=False)
fit = fit_fourier(grid, SniperPRC(0.3)(grid), K=10)
print("fit a0 =", fit.a0, " a1 =", fit.a[0], " max other |coef| =",
      np.abs(np.r_[fit.a[1:], fit.b]).max())

# PRCs serialize to a small JSON schema
fit.save("sniper_fit.json")
print(open("sniper_fit.json").read()[:120], "...")
