"""Structured periodic hexahedral RVE meshes."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product

import numpy as np

MATRIX = 0
PARTICLE = 1

# VTK hexahedron vertex order on the reference cube [-1, 1]^3
REF_VERTICES = np.array([
    [-1, -1, -1], [1, -1, -1], [1, 1, -1], [-1, 1, -1],
    [-1, -1, 1], [1, -1, 1], [1, 1, 1], [-1, 1, 1],
], dtype=float)

# local edges as (tail, head) with the tail at the lower reference coordinate
REF_EDGES = np.array([
    [0, 1], [3, 2], [4, 5], [7, 6],
    [0, 3], [1, 2], [4, 7], [5, 6],
    [0, 4], [1, 5], [2, 6], [3, 7],
])


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class Inclusion:
    center: tuple
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if len(self.center) != 3:
            raise GeometryError("inclusion center must have 3 components")
        if not self.radius > 0:
            raise GeometryError(f"inclusion radius must be positive, got {self.radius}")


@dataclass
class Mesh:
    n: tuple
    L: tuple
    vertices: np.ndarray
    cells: np.ndarray
    edges: np.ndarray
    cell_edges: np.ndarray
    cell_edge_signs: np.ndarray
    phase: np.ndarray
    inclusions: tuple = ()
    volume_fraction: float = 0.0
    analytic_volume_fraction: float = 0.0

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_cells(self):
        return len(self.cells)

    @property
    def n_edges(self):
        return len(self.edges)

    @property
    def volume(self):
        return float(np.prod(self.L))

    def vertex_index(self, i, j, k):
        nx, ny, _ = self.n
        return i + (nx + 1) * (j + (ny + 1) * k)

    def vertex_ijk(self, v):
        nx, ny, _ = self.n
        v = np.asarray(v)
        return np.stack([v % (nx + 1), (v // (nx + 1)) % (ny + 1), v // ((nx + 1) * (ny + 1))], axis=-1)

    def edge_lookup(self):
        """Map from unordered vertex pair to edge id."""
        return {frozenset(map(int, e)): i for i, e in enumerate(self.edges)}

    def cell_volumes(self):
        lo = self.vertices[self.cells[:, 0]]
        hi = self.vertices[self.cells[:, 6]]
        return np.prod(hi - lo, axis=1)


def _grid_vertices(n, L):
    axes = [np.linspace(0.0, L[d], n[d] + 1) for d in range(3)]
    z, y, x = np.meshgrid(axes[2], axes[1], axes[0], indexing="ij")
    return np.column_stack([x.ravel(), y.ravel(), z.ravel()])


def _connectivity(n):
    nx, ny, nz = n

    def vid(i, j, k):
        return i + (nx + 1) * (j + (ny + 1) * k)

    k, j, i = np.meshgrid(np.arange(nz), np.arange(ny), np.arange(nx), indexing="ij")
    i, j, k = i.ravel(), j.ravel(), k.ravel()
    offs = ((REF_VERTICES + 1) // 2).astype(int)
    return np.column_stack([vid(i + a, j + b, k + c) for a, b, c in offs])


def _edges(cells):
    pairs = cells[:, REF_EDGES]  # (ncell, 12, 2)
    lo = np.minimum(pairs[..., 0], pairs[..., 1])
    hi = np.maximum(pairs[..., 0], pairs[..., 1])
    keys = np.stack([lo, hi], axis=-1).reshape(-1, 2)
    edges, inverse = np.unique(keys, axis=0, return_inverse=True)
    cell_edges = inverse.reshape(cells.shape[0], 12)
    signs = np.where(pairs[..., 0] == edges[cell_edges][..., 0], 1, -1)
    return edges, cell_edges, signs


def _min_image(d, L):
    return d - L * np.round(d / L)


def _check_overlap(inclusions, L):
    L = np.asarray(L, dtype=float)
    for a in range(len(inclusions)):
        for b in range(a + 1, len(inclusions)):
            ia, ib = inclusions[a], inclusions[b]
            d = _min_image(np.subtract(ia.center, ib.center), L)
            if np.linalg.norm(d) < ia.radius + ib.radius:
                raise GeometryError(f"inclusions {a} and {b} overlap under periodic wrapping")


def label_phases(centroids, L, inclusions):
    L = np.asarray(L, dtype=float)
    phase = np.full(len(centroids), MATRIX, dtype=int)
    for inc in inclusions:
        d = _min_image(centroids - np.asarray(inc.center), L)
        phase[np.einsum("ij,ij->i", d, d) < inc.radius**2] = PARTICLE
    return phase


def build_rve_mesh(n, L=(1.0, 1.0, 1.0), inclusions=()):
    """Uniform ``n[0] x n[1] x n[2]`` hexahedral grid of the box ``[0, L]``.

    Cells whose centroid lies inside an inclusion (minimum-image distance)
    are labelled ``PARTICLE``.
    """
    n = tuple(int(v) for v in (n if np.ndim(n) else (n, n, n)))
    L = tuple(float(v) for v in L)
    if any(v < 2 for v in n):
        raise GeometryError("need at least 2 cells per axis")
    if any(v <= 0 for v in L):
        raise GeometryError("edge lengths must be positive")
    inclusions = tuple(i if isinstance(i, Inclusion) else Inclusion(*i) for i in inclusions)
    _check_overlap(inclusions, L)
    vertices = _grid_vertices(n, L)
    cells = _connectivity(n)
    edges, cell_edges, signs = _edges(cells)
    centroids = vertices[cells].mean(axis=1)
    phase = label_phases(centroids, L, inclusions)
    vol = np.prod(vertices[cells[:, 6]] - vertices[cells[:, 0]], axis=1)
    vf = float(vol[phase == PARTICLE].sum() / np.prod(L))
    avf = float(sum(4.0 / 3.0 * np.pi * i.radius**3 for i in inclusions) / np.prod(L))
    return Mesh(n, L, vertices, cells, edges, cell_edges, signs, phase, inclusions, vf, avf)


def reverse_edges(mesh: Mesh, edge_ids) -> Mesh:
    """Copy of ``mesh`` with the stored direction of some edges flipped."""
    edges = mesh.edges.copy()
    signs = mesh.cell_edge_signs.copy()
    for e in np.atleast_1d(edge_ids):
        edges[e] = edges[e][::-1]
        signs[mesh.cell_edges == e] *= -1
    return Mesh(mesh.n, mesh.L, mesh.vertices, mesh.cells, edges, mesh.cell_edges, signs,
                mesh.phase, mesh.inclusions, mesh.volume_fraction, mesh.analytic_volume_fraction)


@dataclass
class FacePairing:
    """Periodic identifications, per axis, between the x_i = 0 and x_i = L_i faces.

    ``vertex_pairs[i]`` is an ``(m, 2)`` array of (follower, leader) vertex ids
    with ``X[follower] - X[leader] = offsets[i]``; ``edge_pairs[i]`` is an
    ``(m, 3)`` array of (follower edge, leader edge, sign).
    """

    offsets: list
    vertex_pairs: list
    edge_pairs: list
    vertex_leader: np.ndarray = field(repr=False)
    edge_leader: np.ndarray = field(repr=False)
    edge_sign: np.ndarray = field(repr=False)

    def followers(self, kind="vertex"):
        leader = self.vertex_leader if kind == "vertex" else self.edge_leader
        return np.flatnonzero(leader != np.arange(len(leader)))


def pair_periodic_entities(mesh: Mesh) -> FacePairing:
    """Pair boundary vertices and edges of opposing faces.

    Multiply paired entities (edges and corners of the box) are chained to a
    single ultimate leader, the image with all wrapped indices below ``n``.
    """
    n = np.array(mesh.n)
    ijk = mesh.vertex_ijk(np.arange(mesh.n_vertices))
    lookup = mesh.edge_lookup()
    offsets, vpairs, epairs = [], [], []
    for axis in range(3):
        off = np.zeros(3)
        off[axis] = mesh.L[axis]
        offsets.append(off)
        fol = np.flatnonzero(ijk[:, axis] == n[axis])
        lead_ijk = ijk[fol].copy()
        lead_ijk[:, axis] = 0
        lead = mesh.vertex_index(*lead_ijk.T)
        vpairs.append(np.column_stack([fol, lead]))
        on_face = np.isin(mesh.edges, fol).all(axis=1)
        rows = []
        vmap = dict(zip(fol.tolist(), lead.tolist()))
        for e in np.flatnonzero(on_face):
            a, b = (int(v) for v in mesh.edges[e])
            la, lb = vmap[a], vmap[b]
            le = lookup[frozenset((la, lb))]
            sign = 1 if tuple(mesh.edges[le]) == (la, lb) else -1
            rows.append((e, le, sign))
        epairs.append(np.array(rows, dtype=int).reshape(-1, 3))

    wrapped = np.where(ijk == n, 0, ijk)
    vertex_leader = mesh.vertex_index(*wrapped.T)
    edge_leader = np.arange(mesh.n_edges)
    edge_sign = np.ones(mesh.n_edges, dtype=int)
    ea, eb = ijk[mesh.edges[:, 0]], ijk[mesh.edges[:, 1]]
    along = ea != eb
    # wrap only the axes transverse to the edge
    wa = np.where(~along & (ea == n), 0, ea)
    wb = np.where(~along & (eb == n), 0, eb)
    for e in np.flatnonzero(np.any(wa != ea, axis=1)):
        la, lb = mesh.vertex_index(*wa[e]), mesh.vertex_index(*wb[e])
        le = lookup[frozenset((int(la), int(lb)))]
        edge_leader[e] = le
        edge_sign[e] = 1 if tuple(mesh.edges[le]) == (la, lb) else -1
    return FacePairing(offsets, vpairs, epairs, vertex_leader, edge_leader, edge_sign)


def write_vtk(path, mesh: Mesh, point_data=None, cell_data=None, title="mrerve RVE"):
    """Legacy ASCII VTK unstructured grid (hexahedra) with an integer ``phase`` field."""
    point_data = point_data or {}
    cell_data = dict(cell_data or {})
    lines = ["# vtk DataFile Version 3.0", title, "ASCII", "DATASET UNSTRUCTURED_GRID",
             f"POINTS {mesh.n_vertices} double"]
    lines += [f"{x:.9g} {y:.9g} {z:.9g}" for x, y, z in mesh.vertices]
    lines.append(f"CELLS {mesh.n_cells} {9 * mesh.n_cells}")
    lines += ["8 " + " ".join(map(str, c)) for c in mesh.cells]
    lines.append(f"CELL_TYPES {mesh.n_cells}")
    lines += ["12"] * mesh.n_cells
    lines.append(f"CELL_DATA {mesh.n_cells}")
    lines += ["SCALARS phase int 1", "LOOKUP_TABLE default"]
    lines += [str(int(p)) for p in mesh.phase]
    for name, values in cell_data.items():
        lines += _vtk_field(name, np.asarray(values, dtype=float))
    if point_data:
        lines.append(f"POINT_DATA {mesh.n_vertices}")
        for name, values in point_data.items():
            lines += _vtk_field(name, np.asarray(values, dtype=float))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _vtk_field(name, values):
    if values.ndim == 2 and values.shape[1] == 3:
        return [f"VECTORS {name} double"] + [f"{a:.9g} {b:.9g} {c:.9g}" for a, b, c in values]
    return [f"SCALARS {name} double 1", "LOOKUP_TABLE default"] + [f"{v:.9g}" for v in values]


def corner_ids(mesh: Mesh):
    return [mesh.vertex_index(*(n * c for n, c in zip(mesh.n, corner))) for corner in product((0, 1), repeat=3)]
