"""Monolithic residual/tangent assembly and Newton iteration for the RVE problem."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .autodiff import energy_hessian
from .constitutive import MaterialParams
from .constraints import build_constraints
from .fem import CellOperators, QuadratureRule
from .mesh import MATRIX, PARTICLE, Mesh, pair_periodic_entities

log = logging.getLogger(__name__)


class SingularSystemError(np.linalg.LinAlgError):
    pass


class LinearSolverError(RuntimeError):
    pass


@dataclass
class NewtonSettings:
    rtol: float = 1e-8
    atol: float = 1e-10
    max_iter: int = 25
    line_search: bool = True
    ls_factor: float = 0.5
    ls_max_cuts: int = 8
    linear_solver: str = "direct"
    verbose: bool = False

    def __post_init__(self):
        if not (self.rtol > 0 and self.atol > 0):
            raise ValueError("tolerances must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


@dataclass
class State:
    """Full DOF vector (displacements then edge circulations) at pseudo-time ``t``."""

    x: np.ndarray
    n_vertices: int
    t: float = 0.0
    F_M: np.ndarray = field(default_factory=lambda: np.eye(3))
    B_M: np.ndarray = field(default_factory=lambda: np.zeros(3))

    @property
    def u(self):
        return self.x[: 3 * self.n_vertices].reshape(-1, 3)

    @property
    def a(self):
        return self.x[3 * self.n_vertices:]

    def copy(self):
        return State(self.x.copy(), self.n_vertices, self.t, np.array(self.F_M, dtype=float), np.array(self.B_M, dtype=float))


@dataclass
class PointData:
    """Quadrature-point fields of one evaluation."""

    F: np.ndarray         # (nc, nq, 3, 3)
    B: np.ndarray         # (nc, nq, 3)
    J: np.ndarray         # (nc, nq)
    Jbar: np.ndarray      # (nc,)
    psi: np.ndarray       # (nc, nq)
    grad: np.ndarray      # (nc, nq, 13)
    hess: np.ndarray | None
    pressure: np.ndarray  # (nc,) cell average of d psi / d Jbar

    @property
    def P(self):
        """First Piola stress including the J-bar pressure contribution."""
        Pf = self.grad[..., :9].reshape(self.F.shape)
        cof = self.J[..., None, None] * np.swapaxes(np.linalg.inv(self.F), -1, -2)
        return Pf + self.pressure[:, None, None, None] * cof

    @property
    def H(self):
        return self.grad[..., 9:12]


@dataclass
class NewtonResult:
    state: State
    converged: bool
    iterations: int
    history: list
    message: str = ""


class RVEProblem:
    """Discrete periodic RVE: mesh, phases, operators and constraint structure."""

    def __init__(self, mesh: Mesh, materials=None, rule: QuadratureRule | None = None,
                 gauge: str = "tree", anchor: int | None = None):
        if materials is None:
            materials = {MATRIX: MaterialParams.matrix(), PARTICLE: MaterialParams.particle()}
        elif not isinstance(materials, dict):
            materials = dict(enumerate(materials))
        missing = set(np.unique(mesh.phase)) - set(materials)
        if missing:
            raise ValueError(f"no material parameters for phase(s) {sorted(missing)}")
        self.mesh = mesh
        self.materials = materials
        self.ops = CellOperators(mesh, rule)
        self.pairing = pair_periodic_entities(mesh)
        self.gauge = gauge
        self.n_dofs = self.ops.dofmap.n_dofs
        cset = build_constraints(mesh, self.pairing, np.eye(3), gauge, anchor)
        self.anchor = cset.anchor
        self.compiled = cset.compile(self.n_dofs)
        self.phase_cells = {ph: np.flatnonzero(mesh.phase == ph) for ph in materials}
        self._leader_delta = mesh.vertices - mesh.vertices[self.pairing.vertex_leader]
        dofs = self.ops.dofmap.cell_dofs
        self._rows = np.broadcast_to(dofs[:, :, None], dofs.shape + (36,)).ravel()
        self._cols = np.broadcast_to(dofs[:, None, :], dofs.shape[:1] + (36, 36)).ravel()

    # constraints -------------------------------------------------------------

    @property
    def T(self):
        return self.compiled.T

    def offsets(self, F_M):
        """Constraint offsets ``g`` for macroscopic deformation ``F_M``."""
        # leader-to-follower jump; zero on leaders and on the anchor
        g = np.zeros(self.n_dofs)
        jumps = self._leader_delta @ (np.asarray(F_M, dtype=float) - np.eye(3)).T
        g[: 3 * self.mesh.n_vertices] = jumps.ravel()
        return g

    def constraint_set(self, F_M):
        return build_constraints(self.mesh, self.pairing, F_M, self.gauge, self.anchor)

    def expand(self, y, F_M):
        return self.T @ y + self.offsets(F_M)

    def reduce(self, x):
        return x[self.compiled.free]

    def affine_state(self, F_M, B_M=(0.0, 0.0, 0.0), t=0.0):
        """State with the homogeneous displacement ``(F_M - I)(X - X_anchor)`` and zero potential."""
        x = np.zeros(self.n_dofs)
        X = self.mesh.vertices - self.mesh.vertices[self.anchor]
        x[: 3 * self.mesh.n_vertices] = (X @ (np.asarray(F_M, dtype=float) - np.eye(3)).T).ravel()
        return State(x, self.mesh.n_vertices, t, np.array(F_M, dtype=float), np.array(B_M, dtype=float))

    def zero_state(self):
        return self.affine_state(np.eye(3))

    def fluctuation(self, state: State):
        """Displacement minus its affine part, and the edge DOFs."""
        aff = self.affine_state(state.F_M).x
        return (state.x - aff)[: 3 * self.mesh.n_vertices].reshape(-1, 3), state.a

    # evaluation ----------------------------------------------------------------

    def evaluate(self, x, B_M, order: int = 2) -> PointData:
        F, B = self.ops.fields(x, B_M)
        Jbar, J = self.ops.cell_average_jacobian(F)
        nc, nq = J.shape
        psi = np.zeros((nc, nq))
        grad = np.zeros((nc, nq, 13))
        hess = np.zeros((nc, nq, 13, 13)) if order >= 2 else None
        for ph, cells in self.phase_cells.items():
            if len(cells) == 0:
                continue
            Fp = F[cells].reshape(-1, 3, 3)
            Bp = B[cells].reshape(-1, 3)
            Jb = np.repeat(Jbar[cells], nq)
            v, g, h = energy_hessian(Fp, Bp, Jb, self.materials[ph])
            psi[cells] = v.reshape(-1, nq)
            grad[cells] = g.reshape(-1, nq, 13)
            if hess is not None:
                hess[cells] = h.reshape(-1, nq, 13, 13)
        pressure = np.einsum("cq,cq->c", grad[..., 12], self.ops.dV) / self.ops.cell_volume
        return PointData(F, B, J, Jbar, psi, grad, hess, pressure)

    def energy(self, x, B_M):
        pd = self.evaluate(x, B_M, order=1)
        return float(np.einsum("cq,cq->", pd.psi, self.ops.dV))

    def assemble(self, x, B_M, need_tangent=True, need_load_tangent=False):
        """Full residual R = dPi/dx and tangent K = dR/dx (before condensation).

        Returns ``(R, K, pd)`` or ``(R, K, KB, pd)`` with ``KB = dR/dB_M`` when
        ``need_load_tangent``.
        """
        pd = self.evaluate(x, B_M, order=2 if need_tangent or need_load_tangent else 1)
        G, dV = self.ops.G, self.ops.dV
        F, J = pd.F, pd.J
        Finv = np.linalg.inv(F)
        cof = J[..., None, None] * np.swapaxes(Finv, -1, -2)
        gJ = np.zeros(J.shape + (12,))
        gJ[..., :9] = cof.reshape(J.shape + (9,))
        geff = pd.grad[..., :12] + pd.pressure[:, None, None] * gJ
        Re = np.einsum("cq,cqkl,cqk->cl", dV, G, geff)
        R = np.zeros(self.n_dofs)
        np.add.at(R, self.ops.dofmap.cell_dofs, Re)
        if not (need_tangent or need_load_tangent):
            return R, None, pd
        h = pd.hess
        V = self.ops.cell_volume
        gvec = np.einsum("cq,cqkl,cqk->cl", dV, G, gJ) / V[:, None]
        K = KB = None
        if need_tangent:
            # d2J/dF_ij dF_kl = J (Finv_ji Finv_lk - Finv_li Finv_jk)
            HJ = J[..., None, None, None, None] * (
                np.einsum("cqji,cqlk->cqijkl", Finv, Finv) - np.einsum("cqli,cqjk->cqijkl", Finv, Finv))
            D = h[..., :12, :12].copy()
            D[..., :9, :9] += pd.pressure[:, None, None, None] * HJ.reshape(J.shape + (9, 9))
            DG = np.matmul(D, G)
            Ke = np.einsum("cq,cqki,cqkj->cij", dV, G, DG)
            m = np.einsum("cq,cqkl,cqk->cl", dV, G, h[..., :12, 12])
            psiJJ = np.einsum("cq,cq->c", dV, h[..., 12, 12])
            Ke += m[:, :, None] * gvec[:, None, :] + gvec[:, :, None] * m[:, None, :]
            Ke += psiJJ[:, None, None] * gvec[:, :, None] * gvec[:, None, :]
            K = sp.csr_matrix((Ke.ravel(), (self._rows, self._cols)), shape=(self.n_dofs,) * 2)
        if need_load_tangent:
            KBe = np.einsum("cq,cqkl,cqkm->clm", dV, G, h[..., :12, 9:12])
            KBe += gvec[:, :, None] * np.einsum("cq,cqm->cm", dV, h[..., 12, 9:12])[:, None, :]
            KB = np.zeros((self.n_dofs, 3))
            np.add.at(KB, self.ops.dofmap.cell_dofs, KBe)
            return R, K, KB, pd
        return R, K, pd

    def condensed(self, x, B_M, need_tangent=True):
        R, K, pd = self.assemble(x, B_M, need_tangent)
        T = self.T
        r = T.T @ R
        Kr = (T.T @ K @ T).tocsc() if K is not None else None
        return r, Kr, pd


def _equilibrate(K):
    d = np.abs(K.diagonal())
    d[d == 0] = 1.0
    s = 1.0 / np.sqrt(d)
    S = sp.diags(s)
    return (S @ K @ S).tocsc(), s


def linear_solve(K, rhs, backend: str = "direct", rtol: float = 1e-10, pivot_tol: float = 1e-13):
    """Solve ``K x = rhs`` (sparse, symmetric) after symmetric diagonal scaling."""
    K = sp.csc_matrix(K)
    rhs = np.asarray(rhs, dtype=float)
    Ks, s = _equilibrate(K)
    b = rhs * s
    hint = "check anchor and gauge constraints (rigid translation / gradient null modes)"
    if backend == "direct":
        try:
            lu = spla.splu(Ks, permc_spec="MMD_AT_PLUS_A")
        except RuntimeError as exc:
            raise SingularSystemError(f"factorization failed ({exc}); {hint}") from None
        piv = np.abs(lu.U.diagonal())
        if piv.min() <= pivot_tol * piv.max():
            raise SingularSystemError(f"near-singular system (pivot ratio {piv.min() / piv.max():.2e}); {hint}")
        y = lu.solve(b)
    elif backend == "iterative":
        ilu = spla.spilu(Ks, drop_tol=1e-6, fill_factor=20)
        M = spla.LinearOperator(Ks.shape, ilu.solve)
        y, info = spla.gmres(Ks, b, M=M, rtol=rtol * 1e-2, atol=0.0, restart=200, maxiter=50)
        if info != 0:
            raise LinearSolverError(f"GMRES did not converge (info={info}); try the direct backend")
    else:
        raise ValueError(f"unknown linear backend {backend!r}")
    x = y * s
    res = np.linalg.norm(K @ x - rhs)
    scale = np.linalg.norm(rhs)
    if not np.all(np.isfinite(x)) or (scale > 0 and res > rtol * scale):
        raise SingularSystemError(f"linear solve residual {res / max(scale, 1e-300):.2e} exceeds {rtol:g}; {hint}")
    return x


def newton_solve(problem: RVEProblem, state: State, F_M, B_M, settings: NewtonSettings | None = None,
                 t: float | None = None, step: int = 0) -> NewtonResult:
    """Newton iteration for the constrained equilibrium at loads (F_M, B_M).

    The predictor adds the affine increment ``(F_M - F_prev)(X - X_anchor)`` to
    ``state``.  Never raises on divergence; inspect ``converged``.
    """
    settings = settings or NewtonSettings()
    F_M = np.asarray(F_M, dtype=float)
    B_M = np.asarray(B_M, dtype=float)
    X = problem.mesh.vertices - problem.mesh.vertices[problem.anchor]
    x = state.x.copy()
    nu = 3 * problem.mesh.n_vertices
    x[:nu] += (X @ (F_M - np.asarray(state.F_M)).T).ravel()
    # project onto the constraint manifold (removes round-off drift)
    x = problem.expand(problem.reduce(x), F_M)
    T = problem.T
    history = []

    def make_state(xv):
        return State(xv, problem.mesh.n_vertices, state.t if t is None else t, F_M.copy(), B_M.copy())

    try:
        r, Kr, _ = problem.condensed(x, B_M)
    except (ValueError, FloatingPointError) as exc:
        return NewtonResult(make_state(state.x.copy()), False, 0, history, f"predictor failed: {exc}")
    norm0 = np.linalg.norm(r)
    tol = settings.atol + settings.rtol * norm0
    norm = norm0
    history.append((step, 0, norm, 0.0))
    _log(settings, step, 0, norm, 0.0)
    if norm <= tol:
        return NewtonResult(make_state(x), True, 0, history)
    for it in range(1, settings.max_iter + 1):
        try:
            dy = linear_solve(Kr, -r, settings.linear_solver)
        except (SingularSystemError, LinearSolverError) as exc:
            return NewtonResult(make_state(x), False, it - 1, history, str(exc))
        dx = T @ dy
        alpha = 1.0
        accepted = False
        for _ in range(settings.ls_max_cuts + 1 if settings.line_search else 1):
            xt = x + alpha * dx
            try:
                rt, Kt, _ = problem.condensed(xt, B_M)
                nt = np.linalg.norm(rt)
            except (ValueError, FloatingPointError):
                nt = np.inf
            if not settings.line_search or nt < (1.0 - 1e-4 * alpha) * norm or nt <= tol:
                accepted = np.isfinite(nt)
                break
            alpha *= settings.ls_factor
        if not accepted:
            return NewtonResult(make_state(x), False, it, history, "line search failed")
        x, r, Kr, prev, norm = xt, rt, Kt, norm, nt
        history.append((step, it, norm, alpha))
        _log(settings, step, it, norm, alpha)
        if norm <= tol:
            return NewtonResult(make_state(x), True, it, history)
    return NewtonResult(make_state(x), False, settings.max_iter, history, "maximum iterations exceeded")


def _log(settings, step, it, norm, alpha):
    line = f"newton,{step},{it},{norm:.6e},{alpha:.4g}"
    if settings.verbose:
        print(line)
    log.debug(line)


def convergence_rates(history):
    """Ratios ||r_{k+1}|| / ||r_k||^2 of a Newton history (quadratic-convergence check)."""
    norms = [h[2] for h in history]
    return [b / a**2 for a, b in zip(norms[:-1], norms[1:]) if a > 0]
