"""Finite-strain magneto-elastic homogenization on periodic hexahedral RVEs.

Displacements live on trilinear Lagrange elements, the magnetic vector
potential on lowest-order Nedelec edge elements; the coupled equilibrium is
solved monolithically under periodic constraints and volume averages give
the macroscopic response.
"""

__version__ = "0.1.0"

from .constitutive import MaterialParams, PointKinematics, total_energy
from .driver import LoadPath, loads_at, run_path, stress_relaxed_step
from .homogenization import HomogenizedRecord, average_all, effective_magnetostriction, hill_mandel_check
from .mesh import Inclusion, build_rve_mesh
from .oracle import coefficients, predicted_strain, rve_scale_coefficients
from .solver import NewtonSettings, RVEProblem, newton_solve

__all__ = [
    "MaterialParams", "PointKinematics", "total_energy", "LoadPath", "loads_at", "run_path",
    "stress_relaxed_step", "HomogenizedRecord", "average_all", "effective_magnetostriction",
    "hill_mandel_check", "Inclusion", "build_rve_mesh", "coefficients", "predicted_strain",
    "rve_scale_coefficients", "NewtonSettings", "RVEProblem", "newton_solve",
]
