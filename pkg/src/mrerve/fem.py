"""Trilinear Lagrange and lowest-order Nedelec (first kind) elements on hexahedra."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .constitutive import InvalidKinematicsError
from .mesh import REF_EDGES, REF_VERTICES, Mesh


class InvalidMeshError(ValueError):
    pass


class ElementInversionError(InvalidKinematicsError):
    def __init__(self, cell, detF):
        super().__init__(f"non-positive det(F)={detF:.6g} in cell {cell}")
        self.cell = cell


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray
    weights: np.ndarray


def gauss_rule(order: int = 2) -> QuadratureRule:
    """Tensor Gauss-Legendre rule with ``order`` points per direction on [-1, 1]^3."""
    x, w = np.polynomial.legendre.leggauss(order)
    pts = np.array([(a, b, c) for c, b, a in product(x, x, x)])
    wts = np.array([wa * wb * wc for wc, wb, wa in product(w, w, w)])
    return QuadratureRule(pts, wts)


def lagrange_eval(xi):
    """Trilinear shape values (8,) and reference gradients (8, 3) at ``xi``."""
    xi = np.asarray(xi, dtype=float)
    t = 1.0 + REF_VERTICES * xi  # (8, 3)
    values = np.prod(t, axis=1) / 8.0
    grads = np.empty((8, 3))
    for d in range(3):
        others = [e for e in range(3) if e != d]
        grads[:, d] = REF_VERTICES[:, d] * t[:, others[0]] * t[:, others[1]] / 8.0
    return values, grads


# Each local edge: direction axis and the signs of the two transverse coordinates.
_EDGE_AXIS = np.array([0] * 4 + [1] * 4 + [2] * 4)
_EDGE_TRANSVERSE = np.array([REF_VERTICES[a] for a, _ in REF_EDGES])


def nedelec_eval(xi):
    """Reference edge functions (12, 3) and their curls (12, 3) at ``xi``.

    Edge ``e`` along axis ``d`` with transverse signs ``(s1, s2)`` on axes
    ``(d1, d2)``: ``N = (1 + s1 x_d1)(1 + s2 x_d2)/8 e_d``, which has unit
    circulation along its own edge, oriented from the lower to the higher
    reference coordinate.
    """
    xi = np.asarray(xi, dtype=float)
    vec = np.zeros((12, 3))
    curl = np.zeros((12, 3))
    for e in range(12):
        d = _EDGE_AXIS[e]
        d1, d2 = [a for a in range(3) if a != d]
        s1, s2 = _EDGE_TRANSVERSE[e, d1], _EDGE_TRANSVERSE[e, d2]
        f1, f2 = 1.0 + s1 * xi[d1], 1.0 + s2 * xi[d2]
        vec[e, d] = f1 * f2 / 8.0
        # curl(f e_d) = grad f x e_d
        grad = np.zeros(3)
        grad[d1] = s1 * f2 / 8.0
        grad[d2] = s2 * f1 / 8.0
        curl[e] = np.cross(grad, np.eye(3)[d])
    return vec, curl


def edge_tangents():
    """Reference tail points and tangents (length 2) of the 12 local edges."""
    tails = REF_VERTICES[REF_EDGES[:, 0]]
    return tails, REF_VERTICES[REF_EDGES[:, 1]] - tails


@dataclass
class DofMap:
    """Global numbering: ``3 v + k`` for displacements, ``3 n_vertices + e`` for edges."""

    u_dofs: np.ndarray     # (ncell, 24)
    a_dofs: np.ndarray     # (ncell, 12)
    a_signs: np.ndarray    # (ncell, 12)
    n_u: int
    n_a: int

    @property
    def n_dofs(self):
        return self.n_u + self.n_a

    @property
    def cell_dofs(self):
        return np.concatenate([self.u_dofs, self.a_dofs], axis=1)


def build_dofmap(mesh: Mesh) -> DofMap:
    u = (3 * mesh.cells[:, :, None] + np.arange(3)).reshape(mesh.n_cells, 24)
    n_u = 3 * mesh.n_vertices
    return DofMap(u, n_u + mesh.cell_edges, mesh.cell_edge_signs.copy(), n_u, mesh.n_edges)


def _cell_geometry(X, grads_ref):
    """Jacobian dx/dxi (3x3) of a cell with vertex coordinates ``X`` (8, 3)."""
    return X.T @ grads_ref


class CellOperators:
    """Per-cell, per-quadrature-point maps from local DOFs to (F, B).

    ``G[c, q]`` is a ``(12, 36)`` matrix: rows 0..8 give ``grad u`` (row-major),
    rows 9..11 give ``curl A``; columns are 24 displacement DOFs (vertex-major)
    followed by 12 signed edge DOFs.
    """

    def __init__(self, mesh: Mesh, rule: QuadratureRule | None = None):
        rule = rule or gauss_rule(2)
        self.rule = rule
        nc, nq = mesh.n_cells, len(rule.weights)
        X = mesh.vertices[mesh.cells]  # (nc, 8, 3)
        G = np.zeros((nc, nq, 12, 36))
        dV = np.zeros((nc, nq))
        shape_vals = np.zeros((nq, 8))
        ned_vals = np.zeros((nc, nq, 12, 3))
        signs = mesh.cell_edge_signs.astype(float)
        for q, (xi, w) in enumerate(zip(rule.points, rule.weights)):
            vals, gref = lagrange_eval(xi)
            nref, cref = nedelec_eval(xi)
            shape_vals[q] = vals
            Jm = np.einsum("cai,aj->cij", X, gref)
            detJ = np.linalg.det(Jm)
            if np.any(detJ <= 0):
                raise InvalidMeshError(f"singular or inverted cell {int(np.argmin(detJ))}")
            Jinv = np.linalg.inv(Jm)
            gphys = np.einsum("aj,cji->cai", gref, Jinv)  # J^{-T} grad_ref
            nphys = np.einsum("ej,cji->cei", nref, Jinv)
            cphys = np.einsum("cij,ej->cei", Jm, cref) / detJ[:, None, None]
            nphys *= signs[:, :, None]
            cphys *= signs[:, :, None]
            for i in range(3):
                for j in range(3):
                    G[:, q, 3 * i + j, i:24:3] = gphys[:, :, j]
            G[:, q, 9:12, 24:] = np.transpose(cphys, (0, 2, 1))
            dV[:, q] = w * detJ
            ned_vals[:, q] = nphys
        self.G = G
        self.dV = dV
        self.shape_vals = shape_vals
        self.ned_vals = ned_vals
        self.cell_volume = dV.sum(axis=1)
        self.dofmap = build_dofmap(mesh)
        self.mesh = mesh

    def local_values(self, x):
        """Gather local DOF vectors (ncell, 36) from a full DOF vector."""
        return x[self.dofmap.cell_dofs]

    def fields(self, x, B_M=(0.0, 0.0, 0.0)):
        """F (nc, nq, 3, 3) and B (nc, nq, 3) at every quadrature point."""
        g = np.einsum("cqkl,cl->cqk", self.G, self.local_values(x))
        F = g[..., :9].reshape(g.shape[:2] + (3, 3)) + np.eye(3)
        B = g[..., 9:] + np.asarray(B_M, dtype=float)
        return F, B

    def cell_average_jacobian(self, F):
        J = np.linalg.det(F)
        bad = np.argwhere(J <= 0)
        if len(bad):
            c, q = bad[0]
            raise ElementInversionError(int(c), float(J[c, q]))
        return np.einsum("cq,cq->c", J, self.dV) / self.cell_volume, J


def evaluate_point_state(mesh: Mesh, cell: int, x, B_M, xi):
    """(F, B) at reference point ``xi`` of ``cell`` for the full DOF vector ``x``."""
    dm = build_dofmap(mesh)
    X = mesh.vertices[mesh.cells[cell]]
    vals, gref = lagrange_eval(xi)
    nref, cref = nedelec_eval(xi)
    Jm = _cell_geometry(X, gref)
    detJ = np.linalg.det(Jm)
    if abs(detJ) < 1e-14 * np.prod(mesh.L):
        raise InvalidMeshError(f"singular cell {cell}")
    gphys = gref @ np.linalg.inv(Jm)
    u = x[dm.u_dofs[cell]].reshape(8, 3)
    a = x[dm.a_dofs[cell]] * dm.a_signs[cell]
    F = np.eye(3) + u.T @ gphys
    B = np.asarray(B_M, dtype=float) + (Jm @ (cref.T @ a)) / detJ
    return F, B


def interpolate_potential(mesh: Mesh, field, n_points: int = 2):
    """Edge DOFs ``a_e = int_e A . t ds`` of a vector field ``A(X)`` (Gauss line rule)."""
    x, w = np.polynomial.legendre.leggauss(n_points)
    P0 = mesh.vertices[mesh.edges[:, 0]]
    P1 = mesh.vertices[mesh.edges[:, 1]]
    t = P1 - P0
    a = np.zeros(mesh.n_edges)
    for xi, wi in zip(x, w):
        pts = P0 + 0.5 * (xi + 1.0)[None] * t
        a += 0.5 * wi * np.einsum("ei,ei->e", np.asarray(field(pts)), t)
    return a


def cell_average_jacobian(mesh: Mesh, cell: int, x, rule: QuadratureRule | None = None):
    """Volume-averaged det(F) over one cell."""
    rule = rule or gauss_rule(2)
    num = vol = 0.0
    X = mesh.vertices[mesh.cells[cell]]
    for xi, w in zip(rule.points, rule.weights):
        F, _ = evaluate_point_state(mesh, cell, x, np.zeros(3), xi)
        detJ = np.linalg.det(_cell_geometry(X, lagrange_eval(xi)[1]))
        J = np.linalg.det(F)
        if J <= 0:
            raise ElementInversionError(cell, J)
        num += w * detJ * J
        vol += w * detJ
    return num / vol
