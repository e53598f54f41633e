"""Polytopes with an exact face lattice and floating per-face caches."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Sequence

import numpy as np

from ..euclid import DomainError, Rotation, Subspace, complement_basis
from . import exact
from .cones import SphericalCone
from .hull import HullError, brute_force_facets, full_dim_facets


@dataclass(frozen=True, eq=False)
class Face:
    """A ``dim``-face ``F`` of a polytope with its affine and normal data."""

    index: int
    dim: int
    vertex_ids: tuple[int, ...]
    children: tuple[int, ...]
    parents: tuple[int, ...]
    affine_basis: Subspace
    normal_space: Subspace
    centroid: np.ndarray
    intrinsic_volume: float
    normal_cone: SphericalCone
    simplices: np.ndarray = field(repr=False)
    simplex_volumes: np.ndarray = field(repr=False)

    @property
    def volume(self) -> float:
        return self.intrinsic_volume

    def __repr__(self) -> str:
        return f"Face(index={self.index}, dim={self.dim}, vertices={self.vertex_ids})"


class Polytope:
    """A convex polytope ``P`` in ``R^d``.

    Build instances with :func:`build`. ``vertices`` holds exact rational
    coordinates (``None`` for rigid images under irrational rotations, whose
    combinatorics are inherited from the preimage). Faces are indexed globally
    and grouped by dimension in ``faces``; ``faces[dim][0]`` is ``P`` itself.
    """

    def __init__(self, *, ambient, dim, vertices, vertex_array, faces, facet_inequalities,
                 equalities, origin=None):
        self.ambient = int(ambient)
        self.dim = int(dim)
        self.vertices = vertices
        self.vertex_array = vertex_array
        self.vertex_array.setflags(write=False)
        self.faces: tuple[tuple[Face, ...], ...] = faces
        self.all_faces: tuple[Face, ...] = tuple(f for level in faces for f in level)
        self.facet_inequalities = facet_inequalities
        self.equalities = equalities
        self.origin = origin
        self._cache: dict = {}

    # -- lattice access -------------------------------------------------
    def face(self, index: int) -> Face:
        return self.all_faces[index]

    def faces_of_dim(self, j: int) -> tuple[Face, ...]:
        if 0 <= j <= self.dim:
            return self.faces[j]
        return ()

    @property
    def top(self) -> Face:
        return self.faces[self.dim][0]

    @property
    def f_vector(self) -> tuple[int, ...]:
        return tuple(len(level) for level in self.faces)

    @property
    def n_vertices(self) -> int:
        return len(self.vertex_array)

    def euler_characteristic(self) -> int:
        return sum((-1) ** j * n for j, n in enumerate(self.f_vector))

    @property
    def centroid(self) -> np.ndarray:
        return self.vertex_array.mean(axis=0)

    def circumradius(self, center=None) -> float:
        c = self.centroid if center is None else np.asarray(center, dtype=float)
        return float(np.max(np.linalg.norm(self.vertex_array - c, axis=1)))

    def volume(self) -> float:
        """``dim P``-dimensional volume."""
        return self.top.intrinsic_volume

    def facets(self) -> tuple[Face, ...]:
        return self.faces_of_dim(self.dim - 1) if self.dim >= 1 else ()

    def facets_containing(self, face: Face) -> tuple[int, ...]:
        """Global indices of the facets of ``P`` that contain ``face``."""
        memo = self._cache.setdefault("facets_containing", {})
        return _facets_containing(self, face.index, memo)

    # -- membership ----------------------------------------------------
    def contains(self, x, tol: float = 1e-9) -> bool:
        """Exact test for rational input, tolerance test for floats."""
        if self.vertices is not None and all(isinstance(c, (int, Fraction, str)) for c in x):
            xr = exact.to_rvec(x)
            if any(exact.dot(a, xr) != b for a, b in self.equalities):
                return False
            return all(exact.dot(a, xr) <= b for a, b in self.facet_inequalities)
        xf = np.asarray(x, dtype=float)
        for a, b in self.equalities:
            a = np.array([float(c) for c in a])
            if abs(a @ xf - float(b)) > tol * max(1.0, np.linalg.norm(a)):
                return False
        for a, b in self.facet_inequalities:
            a = np.array([float(c) for c in a])
            if a @ xf - float(b) > tol * max(1.0, np.linalg.norm(a)):
                return False
        return True

    # -- derived bodies ------------------------------------------------
    def translated(self, x) -> "Polytope":
        """``P + x``; exact when ``x`` is rational and ``P`` carries exact vertices."""
        if self.vertices is None:
            raise DomainError("translation needs exact vertices")
        xr = exact.to_rvec(x)
        return build([tuple(a + b for a, b in zip(v, xr)) for v in self.vertices])

    def scaled(self, s) -> "Polytope":
        """``s P`` for a positive rational ``s`` (scaling about the origin)."""
        if self.vertices is None:
            raise DomainError("scaling needs exact vertices")
        sr = exact.to_fraction(s)
        if sr <= 0:
            raise DomainError("scale factor must be positive")
        return build([tuple(sr * a for a in v) for v in self.vertices])

    def transformed(self, R: Rotation) -> "Polytope":
        """Rigid image ``R P``; the face lattice is shared and float data rotated."""
        M = R.matrix
        if M.shape[0] != self.ambient:
            raise DomainError("rotation dimension does not match the polytope")
        faces = []
        for level in self.faces:
            faces.append(tuple(_rotate_face(f, R) for f in level))
        ineq = [(tuple(M @ np.array([float(c) for c in a])), float(b)) for a, b in self.facet_inequalities]
        eqs = [(tuple(M @ np.array([float(c) for c in a])), float(b)) for a, b in self.equalities]
        return Polytope(
            ambient=self.ambient,
            dim=self.dim,
            vertices=None,
            vertex_array=self.vertex_array @ M.T,
            faces=tuple(faces),
            facet_inequalities=ineq,
            equalities=eqs,
            origin=(self, R),
        )

    def __repr__(self) -> str:
        return f"Polytope(ambient={self.ambient}, dim={self.dim}, f_vector={self.f_vector})"


def _facets_containing(P: Polytope, idx: int, memo: dict) -> tuple[int, ...]:
    if idx in memo:
        return memo[idx]
    face = P.all_faces[idx]
    if face.dim == P.dim:
        out: tuple[int, ...] = ()
    elif face.dim == P.dim - 1:
        out = (idx,)
    else:
        acc: set[int] = set()
        for p in face.parents:
            acc.update(_facets_containing(P, p, memo))
        out = tuple(sorted(acc))
    memo[idx] = out
    return out


def _rotate_face(f: Face, R: Rotation) -> Face:
    M = R.matrix
    return Face(
        index=f.index,
        dim=f.dim,
        vertex_ids=f.vertex_ids,
        children=f.children,
        parents=f.parents,
        affine_basis=Subspace(M @ f.affine_basis.basis),
        normal_space=Subspace(M @ f.normal_space.basis),
        centroid=M @ f.centroid,
        intrinsic_volume=f.intrinsic_volume,
        normal_cone=f.normal_cone.rotated(R),
        simplices=f.simplices,
        simplex_volumes=f.simplex_volumes,
    )


# ---------------------------------------------------------------------------
# lattice construction
# ---------------------------------------------------------------------------

def _maximal(sets: list[frozenset]) -> list[frozenset]:
    uniq = sorted(set(s for s in sets if s), key=len, reverse=True)
    kept: list[frozenset] = []
    for s in uniq:
        if not any(s <= k for k in kept):
            kept.append(s)
    return kept


def _lattice(facet_sets: list[frozenset], n_points: int, r: int):
    """Vertices and faces (as vertex-id sets, per dimension) from facet point sets."""
    incidence: dict[int, list[int]] = {}
    for fi, s in enumerate(facet_sets):
        for p in s:
            incidence.setdefault(p, []).append(fi)
    vertices = []
    for p in range(n_points):
        fl = incidence.get(p)
        if not fl:
            continue
        inter = frozenset.intersection(*(facet_sets[f] for f in fl))
        if inter == frozenset((p,)):
            vertices.append(p)
    vset = frozenset(vertices)
    facets = list(dict.fromkeys(s & vset for s in facet_sets))
    if any(len(s) < r for s in facets):
        raise HullError("facet with too few vertices")
    vinc: dict[int, list[int]] = {v: [] for v in vertices}
    for fi, s in enumerate(facets):
        for v in s:
            vinc[v].append(fi)
    levels: list[list[frozenset]] = [[] for _ in range(r + 1)]
    levels[r] = [vset]
    levels[r - 1] = facets
    children: dict[frozenset, list[frozenset]] = {vset: list(facets)}
    for j in range(r - 1, 0, -1):
        nxt: dict[frozenset, None] = {}
        for G in levels[j]:
            cand = set()
            for v in G:
                cand.update(vinc[v])
            inters = [G & facets[fi] for fi in cand if not G <= facets[fi]]
            kids = _maximal(inters)
            children[G] = kids
            for K in kids:
                nxt.setdefault(K, None)
        levels[j - 1] = list(nxt)
    for G in levels[0]:
        if len(G) != 1:
            raise HullError("inconsistent vertex level in face lattice")
        children[G] = []
    if r >= 2:
        count: dict[frozenset, int] = {}
        for F in facets:
            for R in children[F]:
                count[R] = count.get(R, 0) + 1
        if any(c != 2 for c in count.values()):
            raise HullError("facet family is not closed (a ridge is not in exactly two facets)")
    return vertices, levels, children


def _simplex_volumes(points: np.ndarray, simplices: np.ndarray) -> np.ndarray:
    j = simplices.shape[1] - 1
    if j == 0:
        return np.ones(len(simplices))
    P = points[simplices]  # (s, j+1, d)
    E = P[:, 1:, :] - P[:, :1, :]
    G = E @ np.swapaxes(E, 1, 2)
    return np.sqrt(np.clip(np.linalg.det(G), 0.0, None)) / math.factorial(j)


def _pulling_triangulation(face_sets, children_ids, idx, memo):
    if idx in memo:
        return memo[idx]
    verts = face_sets[idx]
    if len(children_ids[idx]) == 0:
        out = [tuple(verts)]
    else:
        apex = min(verts)
        out = []
        for c in children_ids[idx]:
            if apex in face_sets[c]:
                continue
            for s in _pulling_triangulation(face_sets, children_ids, c, memo):
                out.append((apex,) + s)
    memo[idx] = out
    return out


def _affine_basis(rel: np.ndarray, verts: Sequence[int], j: int) -> np.ndarray:
    d = rel.shape[1]
    if j == 0:
        return np.zeros((d, 0))
    D = (rel[list(verts[1:])] - rel[verts[0]]).T
    U, s, _ = np.linalg.svd(D, full_matrices=False)
    if s[j - 1] <= 1e-12 * max(1.0, s[0]) or (len(s) > j and s[j] > 1e-9 * max(1.0, s[0])):
        raise HullError("face vertices do not span a face of the expected dimension")
    Q = U[:, :j]
    # deterministic orientation: make the largest entry of each column positive
    piv = np.argmax(np.abs(Q), axis=0)
    Q = Q * np.sign(Q[piv, np.arange(j)])
    return Q


def _assemble(rel: np.ndarray, offset: np.ndarray, r: int, levels, children,
              exact_facet_normals: dict | None) -> tuple[tuple[Face, ...], ...]:
    d = rel.shape[1]
    order: list[list[frozenset]] = []
    for j in range(r + 1):
        order.append(sorted(levels[j], key=lambda s: tuple(sorted(s))))
    index: dict[frozenset, int] = {}
    face_sets: list[tuple[int, ...]] = []
    for j in range(r + 1):
        for s in order[j]:
            index[s] = len(face_sets)
            face_sets.append(tuple(sorted(s)))
    n = len(face_sets)
    child_ids: list[tuple[int, ...]] = [()] * n
    parent_acc: list[list[int]] = [[] for _ in range(n)]
    for j in range(r + 1):
        for s in order[j]:
            i = index[s]
            kids = tuple(sorted(index[c] for c in children.get(s, [])))
            child_ids[i] = kids
            for c in kids:
                parent_acc[c].append(i)
    parent_ids = [tuple(sorted(p)) for p in parent_acc]

    dims = [j for j in range(r + 1) for _ in order[j]]
    bases: list[np.ndarray] = []
    centroids_rel: list[np.ndarray] = []
    for i, verts in enumerate(face_sets):
        bases.append(_affine_basis(rel, verts, dims[i]))
        centroids_rel.append(rel[list(verts)].mean(axis=0))
    top = n - 1
    D = bases[top]
    Dperp = complement_basis(D) if D.shape[1] < d else np.zeros((d, 0))

    memo_tri: dict = {}
    simplices: list[np.ndarray] = []
    svols: list[np.ndarray] = []
    for i in range(n):
        tri = _pulling_triangulation(face_sets, child_ids, i, memo_tri)
        arr = np.array(tri, dtype=np.int64)
        simplices.append(arr)
        svols.append(_simplex_volumes(rel, arr))

    # outward unit normals of facets, as vectors inside aff P's direction
    facet_normal: dict[int, np.ndarray] = {}
    for i in range(n):
        if dims[i] != r - 1:
            continue
        if exact_facet_normals is not None and i in exact_facet_normals:
            a = exact_facet_normals[i]
            facet_normal[i] = a / np.linalg.norm(a)
            continue
        w = centroids_rel[i] - centroids_rel[top]
        w = w - bases[i] @ (bases[i].T @ w)
        w = D @ (D.T @ w)
        facet_normal[i] = w / np.linalg.norm(w)

    faces_by_dim: list[list[Face]] = [[] for _ in range(r + 1)]
    memo_up: dict = {}

    def up(i: int) -> tuple[int, ...]:
        if i in memo_up:
            return memo_up[i]
        dim_i = dims[i]
        if dim_i == r:
            out: tuple[int, ...] = ()
        elif dim_i == r - 1:
            out = (i,)
        else:
            acc: set[int] = set()
            for p in parent_ids[i]:
                acc.update(up(p))
            out = tuple(sorted(acc))
        memo_up[i] = out
        return out

    for i, verts in enumerate(face_sets):
        j = dims[i]
        B = bases[i]
        N = complement_basis(B) if j < d else np.zeros((d, 0))
        if j == r:
            gens = np.vstack([Dperp.T, -Dperp.T]) if Dperp.shape[1] else np.zeros((0, d))
            cone = SphericalCone(Subspace(N), gens, np.zeros((0, d)), empty=(N.shape[1] == 0))
        else:
            if j == r - 1:
                dual = [facet_normal[i]]
            else:
                # the tangent cone at F is generated by the parents of F
                dual = []
                for p in parent_ids[i]:
                    w = centroids_rel[i] - centroids_rel[p]
                    w = w - B @ (B.T @ w)
                    dual.append(w / np.linalg.norm(w))
            gl = [facet_normal[f] for f in up(i)]
            if Dperp.shape[1]:
                gl.extend(Dperp.T)
                gl.extend(-Dperp.T)
            cone = SphericalCone(Subspace(N), np.array(gl).reshape(-1, d), np.array(dual).reshape(-1, d))
        vol = float(svols[i].sum())
        faces_by_dim[j].append(Face(
            index=i,
            dim=j,
            vertex_ids=verts,
            children=child_ids[i],
            parents=parent_ids[i],
            affine_basis=Subspace(B),
            normal_space=Subspace(N),
            centroid=offset + centroids_rel[i],
            intrinsic_volume=vol,
            normal_cone=cone,
            simplices=simplices[i],
            simplex_volumes=svols[i],
        ))
    return tuple(tuple(level) for level in faces_by_dim)


# ---------------------------------------------------------------------------
# public constructor
# ---------------------------------------------------------------------------

def build(vertices, d: int | None = None) -> Polytope:
    """Convex hull of rational points with its complete face lattice.

    Points may be ints, Fractions or ``"p/q"`` strings. Duplicates are
    dropped; points that are not vertices of the hull are discarded.
    """
    pts = list(dict.fromkeys(exact.to_rvec(v) for v in vertices))
    if not pts:
        raise DomainError("cannot build a polytope from an empty point set")
    if d is None:
        d = len(pts[0])
    if any(len(p) != d for p in pts):
        raise DomainError("all points must have the ambient dimension")
    p0 = pts[0]
    diffs = [exact.sub(p, p0) for p in pts[1:]]
    R, piv = exact.rref(diffs) if diffs else ([], [])
    r = len(piv)
    equalities = []
    for nvec in exact.nullspace(R, d) if r < d else []:
        a = exact.primitive_integer(nvec)
        af = tuple(Fraction(x) for x in a)
        equalities.append((af, exact.dot(af, p0)))

    if r == 0:
        levels = [[frozenset((0,))]]
        children = {levels[0][0]: []}
        verts = [0]
        ineqs: list = []
        exact_normals = None
    else:
        den = exact.common_denominator([[p[c] for c in piv] for p in pts])
        ints = [[int(p[c] * den) for c in piv] for p in pts]
        try:
            raw = full_dim_facets(ints)
            verts, levels, children = _lattice([s for _, _, s in raw], len(pts), r)
        except HullError:
            if len(pts) > 60:
                raise
            raw = brute_force_facets(ints)
            verts, levels, children = _lattice([s for _, _, s in raw], len(pts), r)
        ineqs = []
        facet_planes = {}
        for a, b, s in raw:
            full = [Fraction(0)] * d
            for c, x in zip(piv, a):
                full[c] = Fraction(x)
            ineqs.append((tuple(full), Fraction(b, den)))
            facet_planes[frozenset(s) & frozenset(verts)] = full
        exact_normals = facet_planes if r == d else None

    # re-index points -> vertex ids in input order
    remap = {p: i for i, p in enumerate(verts)}
    vlist = [pts[p] for p in verts]
    levels = [[frozenset(remap[p] for p in s) for s in level] for level in levels]
    children = {frozenset(remap[p] for p in k): [frozenset(remap[p] for p in c) for c in v]
                for k, v in children.items()}
    v0 = vlist[0]
    rel = np.array([[float(x - y) for x, y in zip(v, v0)] for v in vlist], dtype=float)
    offset = np.array([float(x) for x in v0])

    normals_by_index = None
    if exact_normals is not None:
        order = [sorted(levels[j], key=lambda s: tuple(sorted(s))) for j in range(r + 1)]
        start = sum(len(order[j]) for j in range(r - 1))
        normals_by_index = {}
        for k, s in enumerate(order[r - 1]):
            key = frozenset(verts[i] for i in s)
            normals_by_index[start + k] = np.array([float(x) for x in exact_normals[key]])
    faces = _assemble(rel, offset, r, levels, children, normals_by_index)
    return Polytope(
        ambient=d,
        dim=r,
        vertices=tuple(vlist),
        vertex_array=rel + offset,
        faces=faces,
        facet_inequalities=ineqs,
        equalities=equalities,
    )


# ---------------------------------------------------------------------------
# exact helpers for additivity tests
# ---------------------------------------------------------------------------

def exact_volume(P: Polytope) -> Fraction:
    """Exact ``dim P``-volume is only rational for full-dimensional ``P``."""
    if P.vertices is None or P.dim != P.ambient:
        raise DomainError("exact volume needs exact vertices of a full-dimensional polytope")
    d = P.ambient
    total = Fraction(0)
    for simp in P.top.simplices:
        base = P.vertices[simp[0]]
        rows = [exact.sub(P.vertices[s], base) for s in simp[1:]]
        total += abs(_det(rows))
    return total / math.factorial(d)


def _det(rows) -> Fraction:
    M = [list(r) for r in rows]
    n = len(M)
    det = Fraction(1)
    for c in range(n):
        piv = next((i for i in range(c, n) if M[i][c] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != c:
            M[c], M[piv] = M[piv], M[c]
            det = -det
        det *= M[c][c]
        for i in range(c + 1, n):
            f = M[i][c] / M[c][c]
            if f:
                M[i] = [a - f * b for a, b in zip(M[i], M[c])]
    return det


def intersect(P: Polytope, Q: Polytope) -> Polytope | None:
    """Exact ``P cap Q`` by vertex enumeration over the joint H-description.

    Returns ``None`` when the intersection is empty. Meant for small inputs.
    """
    if P.vertices is None or Q.vertices is None:
        raise DomainError("intersection needs exact polytopes")
    d = P.ambient
    rows = list(P.facet_inequalities) + list(Q.facet_inequalities)
    eqs = list(P.equalities) + list(Q.equalities)
    for a, b in eqs:
        rows.append((a, b))
        rows.append((tuple(-x for x in a), -b))
    pts = set()
    for combo in combinations(range(len(rows)), d):
        A = [list(rows[i][0]) for i in combo]
        b = [rows[i][1] for i in combo]
        x = exact.solve(A, b)
        if x is None:
            continue
        if all(exact.dot(a, x) <= bb for a, bb in rows):
            pts.add(tuple(x))
    if not pts:
        return None
    return build(sorted(pts))


def union_is_convex(P: Polytope, Q: Polytope) -> bool:
    """Exact test that ``P cup Q`` is convex (for full-dimensional inputs).

    Every vertex of ``conv(P cup Q)`` must lie in ``P`` or ``Q``, and the
    volumes must satisfy inclusion-exclusion exactly.
    """
    H = build(list(P.vertices) + list(Q.vertices))
    for v in H.vertices:
        if not (P.contains(v) or Q.contains(v)):
            return False
    if H.dim != H.ambient:
        return True
    I = intersect(P, Q)
    vi = exact_volume(I) if I is not None and I.dim == I.ambient else Fraction(0)
    return exact_volume(H) == exact_volume(P) + exact_volume(Q) - vi


def cube(d: int = 3) -> Polytope:
    return box([1] * d)


def box(sides) -> Polytope:
    sides = [exact.to_fraction(s) for s in sides]
    pts = [tuple(s if bit else Fraction(0) for s, bit in zip(sides, bits))
           for bits in np.ndindex(*(2,) * len(sides))]
    return build(pts)


def simplex(d: int = 3) -> Polytope:
    pts = [tuple(Fraction(0) for _ in range(d))]
    for i in range(d):
        pts.append(tuple(Fraction(int(i == k)) for k in range(d)))
    return build(pts)




def sample_face(P: Polytope, face: Face, n: int, rng) -> np.ndarray:
    """``n`` points uniformly distributed in ``face`` (by volume), shape ``(n, d)``."""
    from ..euclid import as_generator

    gen = as_generator(rng)
    simp = face.simplices
    j = simp.shape[1] - 1
    V = P.vertex_array
    if len(simp) == 1:
        idx = np.zeros(n, dtype=np.int64)
    else:
        w = face.simplex_volumes / face.simplex_volumes.sum()
        idx = gen.choice(len(simp), size=n, p=w)
    if j == 0:
        return np.repeat(V[simp[:, 0]], n, axis=0) if len(simp) == 1 else V[simp[idx, 0]]
    bary = gen.exponential(size=(n, j + 1))
    bary /= bary.sum(axis=1, keepdims=True)
    return np.einsum("nj,njd->nd", bary, V[simp[idx]])


__all__ = [
    "Face",
    "Polytope",
    "build",
    "exact_volume",
    "intersect",
    "union_is_convex",
    "cube",
    "box",
    "simplex",
    "sample_face",
]
