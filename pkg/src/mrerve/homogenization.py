"""Volume averages over the RVE and the macro-homogeneity (Hill-Mandel) check."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import PARTICLE
from .solver import RVEProblem, State, linear_solve


@dataclass
class HomogenizedRecord:
    t: float
    F_avg: np.ndarray
    B_avg: np.ndarray
    P_avg: np.ndarray
    H_avg: np.ndarray
    sigma_avg: np.ndarray
    J_avg: float
    psi_avg: float
    newton_iters: int = 0
    J_particle_avg: float = float("nan")

    def row(self):
        """Flat values in CSV column order."""
        return ([self.t] + list(np.ravel(self.F_avg)) + list(self.B_avg) + list(np.ravel(self.P_avg))
                + list(self.H_avg) + list(np.ravel(self.sigma_avg)) + [self.J_avg, self.psi_avg, self.newton_iters])


def _average(problem: RVEProblem, values, cells=None):
    dV = problem.ops.dV
    if cells is not None:
        dV = dV[cells]
        values = values[cells]
    w = dV / dV.sum()
    return np.tensordot(w, values, axes=([0, 1], [0, 1]))


def average_all(problem: RVEProblem, state: State, newton_iters: int = 0, pd=None) -> HomogenizedRecord:
    """Reference-volume averages of F, B, P, H, J^-1 P F^T, det F and psi."""
    if pd is None:
        pd = problem.evaluate(state.x, state.B_M, order=1)
    P = pd.P
    sigma = np.einsum("cqij,cqkj->cqik", P, pd.F) / pd.J[..., None, None]
    particle = np.flatnonzero(problem.mesh.phase == PARTICLE)
    Jp = float(_average(problem, pd.J, particle)) if len(particle) else float("nan")
    return HomogenizedRecord(
        t=float(state.t),
        F_avg=_average(problem, pd.F),
        B_avg=_average(problem, pd.B),
        P_avg=_average(problem, P),
        H_avg=_average(problem, pd.H),
        sigma_avg=_average(problem, sigma),
        J_avg=float(_average(problem, pd.J)),
        psi_avg=float(_average(problem, pd.psi)),
        newton_iters=int(newton_iters),
        J_particle_avg=Jp,
    )


def load_sensitivity(problem: RVEProblem, state: State, dF, dB, backend="direct", assembled=None):
    """Full DOF rate ``dx`` induced by the macroscopic rates ``(dF, dB)``.

    Solves the linearized equilibrium ``T^T K (T dy + dx_aff) + T^T K_B dB = 0``
    where ``dx_aff`` is the affine displacement rate.
    """
    if assembled is None:
        assembled = problem.assemble(state.x, state.B_M, need_tangent=True, need_load_tangent=True)
    _, K, KB, _ = assembled
    dx_aff = problem.affine_state(np.eye(3) + np.asarray(dF, dtype=float)).x
    T = problem.T
    rhs = -(T.T @ (K @ dx_aff + KB @ np.asarray(dB, dtype=float)))
    dy = linear_solve((T.T @ K @ T).tocsc(), rhs, backend)
    return dx_aff + T @ dy


def hill_mandel_check(problem: RVEProblem, state: State, dF, dB, backend="direct"):
    """Normalized gap between macroscopic and averaged microscopic power.

    ``|Pbar:dF + Hbar.dB - <P:dF_m + H.dB_m>| / (|<P:dF_m>| + |<H.dB_m>|)``
    with micro rates from a linearized sensitivity solve.
    """
    dF = np.asarray(dF, dtype=float)
    dB = np.asarray(dB, dtype=float)
    assembled = problem.assemble(state.x, state.B_M, need_tangent=True, need_load_tangent=True)
    pd = assembled[3]
    dx = load_sensitivity(problem, state, dF, dB, backend, assembled)
    rates = np.einsum("cqkl,cl->cqk", problem.ops.G, problem.ops.local_values(dx))
    dFm = rates[..., :9].reshape(rates.shape[:2] + (3, 3))
    dBm = rates[..., 9:] + dB
    P, H = pd.P, pd.H
    mech = float(_average(problem, np.einsum("cqij,cqij->cq", P, dFm)))
    mag = float(_average(problem, np.einsum("cqi,cqi->cq", H, dBm)))
    macro = float(np.sum(_average(problem, P) * dF) + _average(problem, H) @ dB)
    scale = abs(mech) + abs(mag)
    gap = abs(macro - mech - mag)
    return gap / scale if scale > 0 else gap


def effective_magnetostriction(F_avg, N=None):
    """Diagonal stretches ``F_ii - 1``, or ``|F N| - 1`` along unit vector ``N``."""
    F_avg = np.asarray(F_avg, dtype=float)
    if N is None:
        return np.diag(F_avg) - 1.0
    N = np.asarray(N, dtype=float)
    N = N / np.linalg.norm(N)
    C = F_avg.T @ F_avg
    return float(np.sqrt(N @ C @ N) - 1.0)
