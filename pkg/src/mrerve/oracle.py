"""Closed-form small-strain, low-field magnetostriction of a homogeneous magnetizable solid.

At small strain and low field the energy reduces to a quadratic form with an
isotropic coupling tensor ``Gamma``; relaxing the stress gives the strain
``eps_ij = Lambda_ijmn B_m B_n`` with ``Lambda = S : Gamma``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constitutive import NEO_HOOKEAN, MaterialParams
from .homogenization import effective_magnetostriction

_I = np.eye(3)


@dataclass(frozen=True)
class SmallStrainCoefficients:
    chi_L: float
    mu_eff: float
    E_lin: float
    Gamma: np.ndarray
    Lambda: np.ndarray

    @property
    def coupling(self):
        """Scalar ``1/mu0 + eta/mu_eff`` multiplying both tensors."""
        return -2.0 * self.Gamma[2, 2, 2, 2]


def gamma_tensor(c):
    """``Gamma_ijmn = -c/2 (d_im d_jn + d_in d_jm - d_ij d_mn)``."""
    return -0.5 * c * (np.einsum("im,jn->ijmn", _I, _I) + np.einsum("in,jm->ijmn", _I, _I)
                       - np.einsum("ij,mn->ijmn", _I, _I))


def isotropic_compliance(E, nu=None):
    """Fourth-order compliance with minor symmetries.

    ``nu=None`` gives the incompressible limit acting on the deviatoric part,
    ``S:T = dev(T) / (2 mu)`` with ``mu = E/3``.
    """
    sym = 0.5 * (np.einsum("ik,jl->ijkl", _I, _I) + np.einsum("il,jk->ijkl", _I, _I))
    vol = np.einsum("ij,kl->ijkl", _I, _I)
    if nu is None:
        mu = E / 3.0
        return (sym - vol / 3.0) / (2.0 * mu)
    return ((1.0 + nu) * sym - nu * vol) / E


def coefficients(params: MaterialParams | None = None, eta=None, nu=None) -> SmallStrainCoefficients:
    """Low-field coefficients for a homogeneous solid with ``params`` (default: particle phase).

    ``E = 6 C1`` (nearly incompressible Yeoh limit); Neo-Hookean phases use
    their own ``E`` and Poisson ratio.  ``eta`` overrides the magnetization
    switch, ``eta=0`` leaves only the vacuum coupling.
    """
    params = params or MaterialParams.particle()
    if params.model == NEO_HOOKEAN:
        mu, kappa = params.mu_nh, params.kappa_nh
        E = 9.0 * kappa * mu / (3.0 * kappa + mu)
        nu = (3.0 * kappa - 2.0 * mu) / (2.0 * (3.0 * kappa + mu)) if nu is None else nu
    elif not params.C1 > 0:
        raise ValueError("C1 must be positive")
    else:
        E = 6.0 * params.C1
    eta = params.eta if eta is None else eta
    chi = params.ms_leg * params.alpha_leg / 3.0
    mu_eff = params.mu0 * (1.0 + chi)
    c = 1.0 / params.mu0 + eta / mu_eff
    Gamma = gamma_tensor(c)
    Lambda = np.einsum("ijkl,klmn->ijmn", isotropic_compliance(E, nu), Gamma)
    return SmallStrainCoefficients(chi, mu_eff, E, Gamma, Lambda)


def predicted_strain(coeffs: SmallStrainCoefficients, B):
    """``eps_ij = Lambda_ijmn B_m B_n``."""
    B = np.asarray(B, dtype=float)
    return np.einsum("ijmn,m,n->ij", coeffs.Lambda, B, B)


def rve_scale_coefficients(F_avg, B_final):
    """Diagonal ``lambda_ii / B_final**2`` from a final averaged deformation gradient."""
    B_final = float(np.linalg.norm(B_final))
    if not B_final > 0:
        raise ValueError("final induction must be positive")
    return effective_magnetostriction(F_avg) / B_final**2


def coefficient_table(coeffs: SmallStrainCoefficients):
    """Human-readable summary lines."""
    L = coeffs.Lambda
    return [
        f"chi_L        = {coeffs.chi_L:.6g}",
        f"mu_eff       = {coeffs.mu_eff:.6g} H/m",
        f"E = 6 C1     = {coeffs.E_lin:.6g} Pa",
        f"Lambda_3333  = {L[2, 2, 2, 2]:.6g} 1/T^2",
        f"Lambda_1133  = {L[0, 0, 2, 2]:.6g} 1/T^2",
        f"Lambda_2233  = {L[1, 1, 2, 2]:.6g} 1/T^2",
    ]
