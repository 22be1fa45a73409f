"""Point response of the two phases: magnetization saturation and stress-stretch.

Run with ``python demos/constitutive_response.py``; pass ``--plot out.png`` to
save a figure (needs matplotlib).
"""

# %%
import argparse

import numpy as np

from mrerve.autodiff import energy_derivatives
from mrerve.constitutive import MaterialParams, PointKinematics, magnetization_energy, solve_langevin_field

matrix = MaterialParams.matrix()
particle = MaterialParams.particle()

# %% Magnetization of the particle phase: m = b/mu0 - h saturates at ms_leg.
b = np.linspace(0.0, 3.0, 13)
h = solve_langevin_field(b, particle)
m = b / particle.mu0 - h
print("   b [T]      h [A/m]      m/ms      w_mag [J/m3]")
for bi, hi, mi, wi in zip(b, h, m / particle.ms_leg, magnetization_energy(b, particle)):
    print(f"{bi:8.3f} {hi:12.5g} {mi:9.4f} {wi:14.6g}")
print(f"low-field susceptibility chi_L = {particle.chi_L:.4f}, mu_eff = {particle.mu_eff:.5g} H/m")

# %% Isochoric uniaxial stretch of the matrix: P_11 - P_33 lam3/lam1 gives the
# uniaxial nominal stress once the lateral traction is removed.
stretch = np.linspace(0.8, 1.5, 8)
print("\n stretch   uniaxial P [Pa]")
for s in stretch:
    F = np.diag([s, s**-0.5, s**-0.5])
    d = energy_derivatives(PointKinematics(F, np.zeros(3), 1.0), matrix)
    print(f"{s:8.3f} {d.P[0, 0] - d.P[1, 1] * F[1, 1] / s:14.6g}")

# %% Field-induced Maxwell-type stress of the matrix at fixed F = I.
for bz in (0.0, 0.1, 0.25):
    d = energy_derivatives(PointKinematics(np.eye(3), [0, 0, bz], 1.0), matrix)
    print(f"B_z = {bz:4.2f} T: P_zz = {d.P[2, 2]:10.5g} Pa, P_xx = {d.P[0, 0]:10.5g} Pa, H_z = {d.H[2]:10.5g} A/m")

# %%
if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--plot", help="write the magnetization curve to this image file")
    args = ap.parse_args()
    if args.plot:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        bb = np.linspace(0.0, 5.0, 200)
        hh = solve_langevin_field(bb, particle)
        fig, ax = plt.subplots(figsize=(5, 3.5))
        ax.plot(bb, (bb / particle.mu0 - hh) / particle.ms_leg)
        ax.set_xlabel("|b| [T]")
        ax.set_ylabel("m / ms")
        fig.tight_layout()
        fig.savefig(args.plot, dpi=150)
