"""Affine leader-follower constraints: periodicity, anchoring and gauge fixing.

Every constraint has the form ``x[follower] = sum(c * x[leader]) + offset``.
Constraints are eliminated by substitution, ``x = T y + g`` with ``y`` the
vector of independent (leader and unconstrained) DOFs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .mesh import FacePairing, Mesh


class ConstraintConflictError(ValueError):
    pass


@dataclass
class AffineConstraint:
    follower: int
    terms: list
    offset: float = 0.0

    def __str__(self):
        rhs = " + ".join(f"{c:+g}*x[{l}]" for l, c in self.terms) or "0"
        return f"x[{self.follower}] <- {rhs} {self.offset:+.12g}"


@dataclass
class ConstraintSet:
    constraints: list = field(default_factory=list)

    def __post_init__(self):
        self.by_follower = {}
        raw = self.constraints
        self.constraints = []
        for c in raw:
            self.add(c)

    def add(self, c: AffineConstraint):
        if c.follower in self.by_follower:
            self._check_same(self.by_follower[c.follower], c)
            return
        self.by_follower[c.follower] = c
        self.constraints.append(c)

    @staticmethod
    def _check_same(a, b, tol=1e-12):
        ta, tb = dict(a.terms), dict(b.terms)
        same = ta.keys() == tb.keys() and all(abs(ta[k] - tb[k]) <= tol for k in ta)
        if not same or abs(a.offset - b.offset) > tol * max(1.0, abs(a.offset)):
            raise ConstraintConflictError(f"conflicting constraints:\n  {a}\n  {b}")

    def __len__(self):
        return len(self.constraints)

    def __iter__(self):
        return iter(self.constraints)

    def followers(self):
        return set(self.by_follower)

    def resolved(self) -> "ConstraintSet":
        """Equivalent set in which no follower appears as a leader.

        Chains are substituted (offsets accumulate along the chain); a
        follower constrained twice must resolve to the same expression.
        """
        memo = {}

        def resolve(f, stack):
            if f in memo:
                return memo[f]
            if f in stack:
                raise ConstraintConflictError(f"cyclic constraint through DOF {f}")
            c = self.by_follower[f]
            terms, offset = {}, c.offset
            for leader, coeff in c.terms:
                if leader in self.by_follower:
                    sub_terms, sub_off = resolve(leader, stack | {f})
                    offset += coeff * sub_off
                    for l2, c2 in sub_terms.items():
                        terms[l2] = terms.get(l2, 0.0) + coeff * c2
                else:
                    terms[leader] = terms.get(leader, 0.0) + coeff
            memo[f] = ({k: v for k, v in terms.items() if v != 0.0}, offset)
            return memo[f]

        out = ConstraintSet()
        for c in self.constraints:
            terms, off = resolve(c.follower, frozenset())
            out.add(AffineConstraint(c.follower, sorted(terms.items()), off))
        return out

    def merged(self, *others) -> "ConstraintSet":
        """Union of raw constraint lists followed by chain resolution."""
        raw = _RawSet()
        for s in (self,) + others:
            for c in s:
                raw.push(c)
        return raw.resolve()

    def dump(self):
        return "\n".join(str(c) for c in self.constraints)

    def compile(self, n_dofs: int) -> "CompiledConstraints":
        return CompiledConstraints(self, n_dofs)

    def max_violation(self, x):
        if not self.constraints:
            return 0.0
        return max(abs(x[c.follower] - sum(k * x[l] for l, k in c.terms) - c.offset) for c in self.constraints)


class _RawSet:
    """Collects constraints that may share followers before resolution.

    A follower listed twice (e.g. a box edge identified through two face
    pairs) keeps the first relation and the second becomes a consistency
    check performed after chaining.
    """

    def __init__(self):
        self.first = {}
        self.extra = []

    def push(self, c):
        if c.follower in self.first:
            self.extra.append(c)
        else:
            self.first[c.follower] = c

    def resolve(self):
        base = ConstraintSet(list(self.first.values())).resolved()
        for c in self.extra:
            terms, offset = {}, c.offset
            for leader, coeff in c.terms:
                if leader in base.by_follower:
                    d = base.by_follower[leader]
                    offset += coeff * d.offset
                    for l2, c2 in d.terms:
                        terms[l2] = terms.get(l2, 0.0) + coeff * c2
                else:
                    terms[leader] = terms.get(leader, 0.0) + coeff
            again = AffineConstraint(c.follower, sorted(terms.items()), offset)
            ConstraintSet._check_same(base.by_follower[c.follower], again)
        return base


class CompiledConstraints:
    """Sparse elimination operator ``x = T y + g``."""

    def __init__(self, cset: ConstraintSet, n_dofs: int):
        self.cset = cset
        self.n_dofs = n_dofs
        followers = np.array(sorted(cset.followers()), dtype=int)
        is_free = np.ones(n_dofs, dtype=bool)
        is_free[followers] = False
        self.free = np.flatnonzero(is_free)
        red = -np.ones(n_dofs, dtype=int)
        red[self.free] = np.arange(len(self.free))
        rows, cols, vals = list(self.free), list(range(len(self.free))), [1.0] * len(self.free)
        g = np.zeros(n_dofs)
        for c in cset:
            g[c.follower] = c.offset
            for leader, coeff in c.terms:
                if red[leader] < 0:
                    raise ConstraintConflictError(f"leader {leader} of {c.follower} is itself constrained")
                rows.append(c.follower)
                cols.append(red[leader])
                vals.append(coeff)
        self.T = sp.csr_matrix((vals, (rows, cols)), shape=(n_dofs, len(self.free)))
        self.g = g
        self.red_index = red

    @property
    def n_free(self):
        return len(self.free)

    def expand(self, y, with_offset=True):
        x = self.T @ y
        return x + self.g if with_offset else x

    def restrict(self, x):
        return x[self.free]


def mechanical_periodicity(pairing: FacePairing, F_M) -> ConstraintSet:
    """``u(X+) = u(X-) + (F_M - I) L_i`` for every paired vertex and component."""
    H = np.asarray(F_M, dtype=float) - np.eye(3)
    raw = _RawSet()
    for off, pairs in zip(pairing.offsets, pairing.vertex_pairs):
        jump = H @ off
        for f, l in pairs:
            for k in range(3):
                raw.push(AffineConstraint(3 * int(f) + k, [(3 * int(l) + k, 1.0)], float(jump[k])))
    return raw.resolve()


def magnetic_periodicity(pairing: FacePairing) -> ConstraintSet:
    """``a_e+ = alpha_e a_e-`` for every paired edge; no offsets."""
    base = 3 * len(pairing.vertex_leader)
    raw = _RawSet()
    for pairs in pairing.edge_pairs:
        for f, l, s in pairs:
            raw.push(AffineConstraint(base + int(f), [(base + int(l), float(s))], 0.0))
    return raw.resolve()


def _tree_gauge_edges(mesh: Mesh):
    """Edges of a comb spanning tree of the periodic vertex graph plus one
    winding edge per axis; zeroing them removes every curl-free mode."""
    nx, ny, nz = mesh.n
    lookup = mesh.edge_lookup()
    vid = mesh.vertex_index
    chosen = []

    def edge(a, b):
        chosen.append(lookup[frozenset((int(vid(*a)), int(vid(*b))))])

    for k in range(nz):
        for j in range(ny):
            for i in range(nx - 1):
                edge((i, j, k), (i + 1, j, k))
    for k in range(nz):
        for j in range(ny - 1):
            edge((0, j, k), (0, j + 1, k))
    for k in range(nz - 1):
        edge((0, 0, k), (0, 0, k + 1))
    edge((nx - 1, 0, 0), (nx, 0, 0))
    edge((0, ny - 1, 0), (0, ny, 0))
    edge((0, 0, nz - 1), (0, 0, nz))
    return chosen


def anchor_and_gauge(mesh: Mesh, pairing: FacePairing, gauge: str = "tree", anchor: int | None = None) -> ConstraintSet:
    """Fix the displacement of one leader vertex and gauge the edge DOFs.

    ``gauge`` is ``"tree"`` (tree-cotree gauge, default), ``"single"`` (one
    edge DOF) or ``"none"``.
    """
    vertex_followers = set(pairing.followers("vertex").tolist())
    if anchor is None or anchor in vertex_followers:
        anchor = min(v for v in range(mesh.n_vertices) if v not in vertex_followers)
    cons = [AffineConstraint(3 * anchor + k, [], 0.0) for k in range(3)]
    base = 3 * mesh.n_vertices
    if gauge == "tree":
        edges = _tree_gauge_edges(mesh)
    elif gauge == "single":
        edge_followers = set(pairing.followers("edge").tolist())
        edges = [min(e for e in range(mesh.n_edges) if e not in edge_followers)]
    elif gauge == "none":
        edges = []
    else:
        raise ValueError(f"unknown gauge {gauge!r}")
    cons += [AffineConstraint(base + e, [], 0.0) for e in edges]
    cs = ConstraintSet(cons)
    cs.anchor = anchor
    return cs


def build_constraints(mesh: Mesh, pairing: FacePairing, F_M, gauge="tree", anchor=None) -> ConstraintSet:
    ag = anchor_and_gauge(mesh, pairing, gauge, anchor)
    out = mechanical_periodicity(pairing, F_M).merged(magnetic_periodicity(pairing), ag)
    out.anchor = ag.anchor
    return out


def condense(K, f, compiled: CompiledConstraints):
    """Reduce ``K x = f`` under ``x = T y + g`` to ``(T^T K T) y = T^T (f - K g)``."""
    T = compiled.T
    K = sp.csr_matrix(K)
    return (T.T @ K @ T).tocsr(), T.T @ (np.asarray(f, dtype=float) - K @ compiled.g)


def expand(y, compiled: CompiledConstraints):
    return compiled.expand(y)
