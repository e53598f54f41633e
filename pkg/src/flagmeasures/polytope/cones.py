"""Polyhedral cones restricted to a linear subspace, and their solid angles.

A cone is stored in a dual (inequality) description ``{u in S : <w, u> >= 0}``
together with its generators. The spherical measure ``H^(s-1)`` of its trace on
the unit sphere of ``S`` (``s = dim S``) is computed exactly for ``s <= 2`` and
for pointed cones in ``s = 3``; otherwise by Monte Carlo.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..config import TOL
from ..euclid import DomainError, Rotation, Subspace, as_generator, sphere_area, sphere_points


@dataclass(frozen=True)
class Arc:
    """The arc ``{cos(a) e1 + sin(a) e2 : start <= a <= start + length}``."""

    e1: np.ndarray
    e2: np.ndarray
    start: float
    length: float

    def points(self, angles: np.ndarray) -> np.ndarray:
        a = self.start + np.asarray(angles, dtype=float)
        return np.cos(a)[..., None] * self.e1 + np.sin(a)[..., None] * self.e2


def _intersect_arcs(s1: float, l1: float, s2: float, l2: float) -> tuple[float, float]:
    # the second arc has length <= pi; the first is either the full circle or
    # also at most a half circle, so the intersection is a single arc
    if l1 >= 2 * math.pi:
        return s2, l2
    best = (s1, 0.0)
    delta = math.remainder(s2 - s1, 2 * math.pi)
    for shift in (-2 * math.pi, 0.0, 2 * math.pi):
        lo = max(0.0, delta + shift)
        hi = min(l1, delta + shift + l2)
        if hi - lo > best[1]:
            best = (s1 + lo, hi - lo)
    return best


@dataclass(frozen=True, eq=False)
class SphericalCone:
    """``N = {u in span : <w, u> >= 0 for every row w of dual}``.

    ``empty`` marks the trivial cone ``{0}`` (the normal cone of a
    full-dimensional body at itself), which carries no spherical measure.
    """

    span: Subspace
    generators: np.ndarray
    dual: np.ndarray
    empty: bool = False

    @property
    def apex_dim(self) -> int:
        return 0 if self.empty else self.span.dim

    @property
    def ambient(self) -> int:
        return self.span.ambient

    def contains(self, u, tol: float | None = None) -> np.ndarray:
        """Vectorised membership of unit rows ``u`` (``(n, d)`` or ``(d,)``)."""
        tol = TOL.geometric if tol is None else tol
        u = np.asarray(u, dtype=float)
        single = u.ndim == 1
        U = np.atleast_2d(u)
        if self.empty:
            out = np.zeros(len(U), dtype=bool)
        else:
            resid = U - (U @ self.span.basis) @ self.span.basis.T
            out = np.linalg.norm(resid, axis=1) <= tol
            if len(self.dual):
                out &= np.all(U @ self.dual.T >= -tol, axis=1)
        return out[0] if single else out

    def contains_by_generators(self, u, tol: float = 1e-9) -> np.ndarray:
        """Membership by non-negative combination of generators (slow oracle)."""
        from scipy.optimize import nnls

        U = np.atleast_2d(np.asarray(u, dtype=float))
        out = np.zeros(len(U), dtype=bool)
        if self.empty or len(self.generators) == 0:
            return np.linalg.norm(U, axis=1) <= tol
        G = self.generators.T
        for i, x in enumerate(U):
            _, res = nnls(G, x)
            out[i] = res <= tol
        return out

    def rays(self) -> np.ndarray:
        """Unit vectors of the cone when ``apex_dim == 1`` (zero, one or two rows)."""
        if self.apex_dim != 1:
            raise DomainError("rays() needs a cone of apex dimension 1")
        w = self.span.basis[:, 0]
        cand = np.stack([w, -w])
        return cand[self.contains(cand)]

    def arc(self) -> Arc:
        """The spherical trace as an arc, for ``apex_dim == 2``."""
        if self.apex_dim != 2:
            raise DomainError("arc() needs a cone of apex dimension 2")
        e1, e2 = self.span.basis[:, 0], self.span.basis[:, 1]
        start, length = 0.0, 2 * math.pi
        for w in self.dual:
            a, b = float(w @ e1), float(w @ e2)
            if math.hypot(a, b) <= TOL.orthogonality:
                continue
            phi = math.atan2(b, a)
            start, length = _intersect_arcs(start, length, phi - math.pi / 2, math.pi)
            if length <= 0.0:
                break
        return Arc(e1.copy(), e2.copy(), start, max(length, 0.0))

    def rotated(self, R: Rotation) -> "SphericalCone":
        M = R.matrix
        return SphericalCone(
            span=Subspace(M @ self.span.basis),
            generators=self.generators @ M.T,
            dual=self.dual @ M.T,
            empty=self.empty,
        )


def _triangle_area(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> float:
    # Van Oosterom-Strackee formula for the solid angle of a spherical triangle
    num = abs(float(np.dot(a, np.cross(b, c))))
    den = 1.0 + float(a @ b) + float(b @ c) + float(c @ a)
    return 2.0 * math.atan2(num, den)


def exact_solid_angle_3(cone: SphericalCone) -> float:
    """Exact spherical area of a cone with ``apex_dim == 3``.

    Pointed cones are fanned into spherical triangles around the first
    generator; cones containing a line are handled through their lineality.
    """
    if cone.apex_dim != 3:
        raise DomainError("exact_solid_angle_3 needs apex dimension 3")
    B = cone.span.basis
    W = cone.dual @ B  # coordinates in the span
    W = W[np.linalg.norm(W, axis=1) > TOL.orthogonality]
    if len(W) == 0:
        return 4 * math.pi
    W = W / np.linalg.norm(W, axis=1, keepdims=True)
    rank = np.linalg.matrix_rank(W, tol=1e-10)
    if rank == 1:
        # half-space, or a plane if the normals are opposite
        return 2 * math.pi if np.all(W @ W[0] > 0) else 0.0
    if rank == 2:
        # wedge around a line: area = 2 * (opening angle of the 2-d section)
        n = np.cross(W[0], W[1]) if np.linalg.norm(np.cross(W[0], W[1])) > 1e-12 else None
        if n is None:
            for i in range(2, len(W)):
                c = np.cross(W[0], W[i])
                if np.linalg.norm(c) > 1e-12:
                    n = c
                    break
        n = n / np.linalg.norm(n)
        e1 = np.cross(n, [1.0, 0.0, 0.0])
        if np.linalg.norm(e1) < 0.5:
            e1 = np.cross(n, [0.0, 1.0, 0.0])
        e1 /= np.linalg.norm(e1)
        e2 = np.cross(n, e1)
        start, length = 0.0, 2 * math.pi
        for w in W:
            phi = math.atan2(float(w @ e2), float(w @ e1))
            start, length = _intersect_arcs(start, length, phi - math.pi / 2, math.pi)
        return 2.0 * max(length, 0.0)
    # pointed cone: vertices of the spherical polygon are the extreme rays
    rays = _extreme_rays_3(W)
    if len(rays) < 3:
        return 0.0
    axis = rays.mean(axis=0)
    axis /= np.linalg.norm(axis)
    e1 = rays[0] - (rays[0] @ axis) * axis
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(axis, e1)
    order = np.argsort(np.arctan2(rays @ e2, rays @ e1))
    rays = rays[order]
    total = 0.0
    for i in range(1, len(rays) - 1):
        total += _triangle_area(rays[0], rays[i], rays[i + 1])
    return total


def _extreme_rays_3(W: np.ndarray) -> np.ndarray:
    out = []
    for i in range(len(W)):
        for j in range(i + 1, len(W)):
            r = np.cross(W[i], W[j])
            nr = np.linalg.norm(r)
            if nr < 1e-12:
                continue
            r /= nr
            for cand in (r, -r):
                if np.all(W @ cand >= -1e-10):
                    if not any(np.linalg.norm(cand - q) < 1e-9 for q in out):
                        out.append(cand)
    return np.array(out).reshape(-1, 3)


def solid_angle(cone: SphericalCone, N: int = 100_000, rng=None, exact_max: int = 2) -> tuple[float, float]:
    """``H^(s-1)`` of the spherical trace of ``cone`` with a standard error.

    Apex dimension 1 counts the contained unit rays, dimension 2 measures an
    arc; up to ``exact_max`` (and dimension 3 when ``exact_max >= 3``) the
    value is exact and the error is 0. Higher dimensions use the hit fraction
    of uniform points on the sphere of the span.
    """
    s = cone.apex_dim
    if s == 0:
        return 0.0, 0.0
    if s == 1:
        return float(len(cone.rays())), 0.0
    if s == 2 and exact_max >= 2:
        return cone.arc().length, 0.0
    if s == 3 and exact_max >= 3:
        return exact_solid_angle_3(cone), 0.0
    if len(cone.dual) == 0:
        return sphere_area(s), 0.0
    gen = as_generator(rng)
    hits = 0
    done = 0
    while done < N:
        n = min(200_000, N - done)
        u = sphere_points(n, cone.span.basis, gen)
        hits += int(np.count_nonzero(np.all(u @ cone.dual.T >= 0.0, axis=1)))
        done += n
    p = hits / N
    w = sphere_area(s)
    return w * p, w * math.sqrt(max(p * (1 - p), 0.0) / N)


__all__ = ["Arc", "SphericalCone", "solid_angle", "exact_solid_angle_3"]
