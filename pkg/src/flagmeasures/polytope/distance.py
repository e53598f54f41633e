"""Distances between polytopes and affine flats, and the metric projection.

Two routes are provided. :func:`flat_distance` treats one flat at a time with
the nearest-point-in-convex-hull algorithm on the projected vertex set.
:func:`project_flats` is the vectorised route used by the Monte Carlo
samplers: for each candidate face it solves the local least-squares problem
and accepts the face when the foot lies in its relative interior and the
normal direction lies in its normal cone (the optimality conditions of the
convex problem).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..config import TOL
from ..euclid import DomainError, Subspace, complement_basis
from .core import Polytope


class NearestPointError(RuntimeError):
    """The nearest-point iteration did not converge within its cap."""


@dataclass(frozen=True)
class Intersects:
    """Marker returned when a flat meets the body (distance below threshold)."""

    distance: float = 0.0

    def __bool__(self) -> bool:
        return False


@dataclass(frozen=True, eq=False)
class ProjectionTriple:
    """``(p, u, L)`` with ``p`` the nearest body point and ``u`` the unit normal."""

    p: np.ndarray
    u: np.ndarray
    L: Subspace
    distance: float
    degenerate: bool = False
    face: int | None = None


def min_norm_point(Y: np.ndarray, tol: float = 1e-12, max_iter: int | None = None):
    """Wolfe's algorithm: the point of ``conv(rows of Y)`` nearest the origin.

    Returns ``(x, support, weights)`` with ``x = weights @ Y[support]``.
    """
    Y = np.asarray(Y, dtype=float)
    n = len(Y)
    if n == 0:
        raise DomainError("empty point set")
    max_iter = 10 * max(n, 1) if max_iter is None else max_iter
    scale = max(1.0, float(np.max(np.einsum("ij,ij->i", Y, Y))))
    i0 = int(np.argmin(np.einsum("ij,ij->i", Y, Y)))
    S = [i0]
    lam = np.array([1.0])
    x = Y[i0].copy()
    it = 0
    while True:
        it += 1
        if it > max_iter:
            raise NearestPointError("nearest-point iteration cap reached")
        vals = Y @ x
        j = int(np.argmin(vals))
        if x @ x - vals[j] <= tol * scale or j in S:
            break
        S.append(j)
        lam = np.append(lam, 0.0)
        while True:
            it += 1
            if it > max_iter:
                raise NearestPointError("nearest-point iteration cap reached")
            Z = Y[S]
            k = len(S)
            K = np.zeros((k + 1, k + 1))
            K[:k, :k] = Z @ Z.T
            K[:k, k] = 1.0
            K[k, :k] = 1.0
            rhs = np.zeros(k + 1)
            rhs[k] = 1.0
            a = np.linalg.lstsq(K, rhs, rcond=None)[0][:k]
            if np.all(a > 1e-14):
                lam = a
                x = a @ Z
                break
            mask = a <= 1e-14
            diff = lam - a
            with np.errstate(divide="ignore", invalid="ignore"):
                ratios = np.where(mask & (diff > 0), lam / diff, np.inf)
            theta = float(min(1.0, np.min(ratios)))
            lam = theta * a + (1 - theta) * lam
            keep = lam > 1e-14
            if not np.any(keep):
                keep[int(np.argmax(lam))] = True
            S = [s for s, kp in zip(S, keep) if kp]
            lam = lam[keep]
            lam = lam / lam.sum()
            x = lam @ Y[S]
    return x, S, lam


def _lexmin_fiber(V: np.ndarray, C: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Lexicographically smallest ``x = sum l_i V_i`` (convex) with ``C^T x = target``."""
    from scipy.optimize import linprog

    n, d = V.shape
    A_eq = np.vstack([(V @ C).T, np.ones((1, n))])
    b_eq = np.concatenate([target, [1.0]])
    fixed_rows: list[np.ndarray] = []
    fixed_vals: list[float] = []
    lam = None
    for i in range(d):
        A = np.vstack([A_eq] + [r[None] for r in fixed_rows]) if fixed_rows else A_eq
        b = np.concatenate([b_eq, fixed_vals]) if fixed_vals else b_eq
        res = linprog(V[:, i], A_eq=A, b_eq=b, bounds=[(0, None)] * n, method="highs")
        if res.status != 0:
            break
        lam = res.x
        fixed_rows.append(V[:, i])
        fixed_vals.append(float(res.fun))
    if lam is None:
        raise NearestPointError("could not resolve the preimage fiber")
    return lam @ V


def flat_distance(P: Polytope, L: Subspace, x0, *, tol: float | None = None):
    """Metric projection of ``P`` onto the flat ``E = L + x0`` (``x0`` in ``L^perp``).

    Returns :class:`Intersects` when ``d(P, E) <= tol`` (default 1e-12),
    otherwise a :class:`ProjectionTriple`.
    """
    tol = TOL.intersect if tol is None else tol
    x0 = np.asarray(x0, dtype=float)
    d = P.ambient
    if L.ambient != d:
        raise DomainError("subspace and polytope live in different dimensions")
    if L.dim and np.linalg.norm(L.basis.T @ x0) > 1e-10 * max(1.0, np.linalg.norm(x0)):
        raise DomainError("x0 must lie in the orthogonal complement of L")
    C = complement_basis(L.basis) if L.dim < d else np.zeros((d, 0))
    if C.shape[1] == 0:
        return Intersects(0.0)
    V = P.vertex_array
    Y = (V - x0) @ C
    q, _, _ = min_norm_point(Y)
    dist = float(np.linalg.norm(q))
    if dist <= tol:
        return Intersects(dist)
    u = -(C @ q) / dist
    h = V @ u
    hmax = float(h.max())
    scale = max(1.0, float(np.abs(V).max()))
    face_ids = np.flatnonzero(h >= hmax - TOL.geometric * scale)
    W = V[face_ids]
    if len(W) > 1:
        Bf = np.linalg.svd((W[1:] - W[0]).T, full_matrices=False)
        rank_f = int(np.sum(Bf[1] > 1e-9 * max(1.0, Bf[1][0])))
        BF = Bf[0][:, :rank_f]
    else:
        BF = np.zeros((d, 0))
    stack = np.hstack([L.basis, BF])
    sv = np.linalg.svd(stack, compute_uv=False) if stack.shape[1] else np.zeros(0)
    full_rank = stack.shape[1] == 0 or sv[-1] > 1e-9
    target = q + x0 @ C
    if full_rank and len(W) >= 1:
        A = C.T @ BF
        rhs = target - C.T @ W[0]
        s = np.linalg.lstsq(A, rhs, rcond=None)[0] if BF.shape[1] else np.zeros(0)
        p = W[0] + BF @ s
        degenerate = False
    else:
        p = _lexmin_fiber(W, C, target)
        degenerate = True
    return ProjectionTriple(p=p, u=u, L=L, distance=dist, degenerate=degenerate)


def parallel_flat_distance(P: Polytope, eps: float, L: Subspace, x0):
    """Metric projection onto ``E`` for the parallel body ``P + eps B^d``."""
    if eps < 0:
        raise DomainError("eps must be non-negative")
    res = flat_distance(P, L, x0)
    if isinstance(res, Intersects) or res.distance <= eps:
        return Intersects(0.0 if isinstance(res, Intersects) else res.distance - eps)
    return ProjectionTriple(
        p=res.p + eps * res.u,
        u=res.u,
        L=res.L,
        distance=res.distance - eps,
        degenerate=res.degenerate,
        face=res.face,
    )


# ---------------------------------------------------------------------------
# batched projection for samplers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FaceData:
    """Per-face arrays for the vectorised projection."""

    index: int
    dim: int
    origin: np.ndarray          # a vertex of F
    basis: np.ndarray           # (d, m)
    child_normals: np.ndarray   # (c, d) in-face outward normals of the facets of F
    child_offsets: np.ndarray   # (c,)
    dual: np.ndarray            # (w, d) normal cone inequalities


def face_data(P: Polytope, max_dim: int) -> list[FaceData]:
    key = ("face_data", max_dim)
    if key in P._cache:
        return P._cache[key]
    out = []
    for j in range(0, min(max_dim, P.dim) + 1):
        for F in P.faces[j]:
            if F.dim == P.dim and P.dim == P.ambient:
                continue
            B = F.affine_basis.basis
            normals, offsets = [], []
            for c in F.children:
                G = P.face(c)
                w = G.centroid - F.centroid
                w = w - G.affine_basis.basis @ (G.affine_basis.basis.T @ w)
                w = B @ (B.T @ w)
                w /= np.linalg.norm(w)
                normals.append(w)
                offsets.append(float(w @ G.centroid))
            out.append(FaceData(
                index=F.index,
                dim=F.dim,
                origin=P.vertex_array[F.vertex_ids[0]].copy(),
                basis=B,
                child_normals=np.array(normals).reshape(-1, P.ambient),
                child_offsets=np.array(offsets),
                dual=F.normal_cone.dual,
            ))
    P._cache[key] = out
    return out


@dataclass
class BatchProjection:
    """Vectorised metric projections of ``n`` flats; ``face == -1`` means no match."""

    distance: np.ndarray
    p: np.ndarray
    u: np.ndarray
    face: np.ndarray
    degenerate: np.ndarray

    @property
    def matched(self) -> np.ndarray:
        return self.face >= 0


def project_flats(P: Polytope, Lb: np.ndarray, X0: np.ndarray, tol: float = 1e-9) -> BatchProjection:
    """Metric projections for flats ``E_i = span(Lb[i]) + X0[i]``.

    ``Lb`` is ``(n, d, k)`` with orthonormal columns, ``X0`` is ``(n, d)`` with
    rows orthogonal to the corresponding ``Lb``. Flats that meet the body (or
    whose projection face could not be identified) get ``face = -1`` and
    ``distance = 0``. Faces of dimension ``> d - k - 1`` are never projection
    faces of a flat in general position and are skipped.
    """
    Lb = np.asarray(Lb, dtype=float)
    X0 = np.asarray(X0, dtype=float)
    n, d, k = Lb.shape
    dist = np.zeros(n)
    pp = np.zeros((n, d))
    uu = np.zeros((n, d))
    face = np.full(n, -1, dtype=np.int64)
    bestdim = np.full(n, d + 1, dtype=np.int64)
    degen = np.zeros(n, dtype=bool)
    scale = max(1.0, P.circumradius())
    for fd in face_data(P, d - k - 1):
        m = fd.dim
        c = fd.origin
        if k:
            # P_perp c and P_perp B_F
            Pc = c[None, :] - np.einsum("ndk,nk->nd", Lb, Lb.transpose(0, 2, 1) @ c)
        else:
            Pc = np.broadcast_to(c, (n, d))
        if m:
            B = fd.basis
            if k:
                A = B[None] - Lb @ (Lb.transpose(0, 2, 1) @ B[None])
            else:
                A = np.broadcast_to(B, (n, d, m))
            AtA = A.transpose(0, 2, 1) @ A
            rhs = np.einsum("ndm,nd->nm", A, X0 - Pc)
            sv_min = np.linalg.eigvalsh(AtA)[:, 0]
            ok = sv_min > 1e-24
            s = np.zeros((n, m))
            if np.any(ok):
                s[ok] = np.linalg.solve(AtA[ok], rhs[ok][..., None])[..., 0]
            p = c[None, :] + s @ B.T
            q = Pc + np.einsum("ndm,nm->nd", A, s)
        else:
            ok = np.ones(n, dtype=bool)
            sv_min = np.ones(n)
            p = np.broadcast_to(c, (n, d))
            q = Pc
        w = X0 - q
        nw = np.linalg.norm(w, axis=1)
        good = ok & (nw > TOL.intersect)
        u = np.zeros_like(w)
        u[good] = w[good] / nw[good, None]
        if len(fd.child_normals):
            inside = np.all(p @ fd.child_normals.T - fd.child_offsets <= tol * scale, axis=1)
            good &= inside
        if len(fd.dual):
            good &= np.all(u @ fd.dual.T >= -tol, axis=1)
        take = good & (m < bestdim)
        if np.any(take):
            dist[take] = nw[take]
            pp[take] = p[take]
            uu[take] = u[take]
            face[take] = fd.index
            bestdim[take] = m
            # smallest singular value of P_perp B_F below the general-position threshold
            degen[take] = sv_min[take] < TOL.general_position ** 2
    return BatchProjection(distance=dist, p=pp, u=uu, face=face, degenerate=degen)


# ---------------------------------------------------------------------------
# point distances
# ---------------------------------------------------------------------------

def point_distance(P: Polytope, x) -> float:
    """Euclidean distance from the point ``x`` to ``P``."""
    x = np.asarray(x, dtype=float)
    q, _, _ = min_norm_point(P.vertex_array - x)
    return float(np.linalg.norm(q))


def hausdorff_distance(P: Polytope, Q: Polytope) -> float:
    """Hausdorff distance between two polytopes (attained at vertices)."""
    if P.ambient != Q.ambient:
        raise DomainError("polytopes live in different dimensions")
    a = max((point_distance(Q, v) for v in P.vertex_array), default=0.0)
    b = max((point_distance(P, v) for v in Q.vertex_array), default=0.0)
    return max(a, b)


__all__ = [
    "Intersects",
    "ProjectionTriple",
    "NearestPointError",
    "min_norm_point",
    "flat_distance",
    "parallel_flat_distance",
    "FaceData",
    "face_data",
    "BatchProjection",
    "project_flats",
    "point_distance",
    "hausdorff_distance",
]
