"""Exact facet enumeration for rational point sets.

Floating-point Qhull only proposes candidate facets. Every candidate is
re-derived as an exact integer hyperplane, checked against all points with
exact integer arithmetic, and the resulting facet family is checked for
closure (every ridge lies in exactly two facets) before it is accepted.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import exact


class HullError(RuntimeError):
    """The candidate facets could not be certified."""


_INT64_SAFE = 2**62


def _int_matrix(points: Sequence[Sequence[int]], safe: bool) -> np.ndarray:
    if safe:
        return np.array(points, dtype=np.int64)
    return np.array([[int(x) for x in p] for p in points], dtype=object)


def _exact_normal(rows: Sequence[Sequence[int]], r: int) -> tuple[int, ...] | None:
    """Integer normal of the hyperplane spanned by ``r - 1`` difference rows."""
    if r == 1:
        return (1,)
    if r == 2:
        (a, b), = rows
        return (-b, a) if (a or b) else None
    if r == 3:
        (a1, a2, a3), (b1, b2, b3) = rows
        n = (a2 * b3 - a3 * b2, a3 * b1 - a1 * b3, a1 * b2 - a2 * b1)
        return n if any(n) else None
    ns = exact.nullspace([[Fraction(x) for x in row] for row in rows], r)
    if len(ns) != 1:
        return None
    return exact.primitive_integer(ns[0])


def _canonical(normal: Sequence[int], offset: int) -> tuple[tuple[int, ...], int]:
    g = 0
    for x in normal:
        g = math.gcd(g, abs(int(x)))
    g = math.gcd(g, abs(int(offset)))
    if g > 1:
        normal = tuple(int(x) // g for x in normal)
        offset = int(offset) // g
    return tuple(int(x) for x in normal), int(offset)


def _orient(normal, offset, total, n):
    # interior point is total / n; outward means <a, total> < n * b
    s = sum(int(a) * int(t) for a, t in zip(normal, total))
    if s > n * offset:
        return tuple(-int(a) for a in normal), -int(offset)
    if s == n * offset:
        raise HullError("degenerate candidate plane through the centroid")
    return normal, offset


def candidate_planes(points: Sequence[Sequence[int]], simplices) -> list[tuple[tuple[int, ...], int]]:
    r = len(points[0])
    n = len(points)
    total = [sum(int(p[i]) for p in points) for i in range(r)]
    seen: dict = {}
    for simp in simplices:
        base = points[simp[0]]
        rows = [[int(points[s][i]) - int(base[i]) for i in range(r)] for s in simp[1:]]
        normal = _exact_normal(rows, r)
        if normal is None:
            continue
        offset = sum(int(a) * int(b) for a, b in zip(normal, base))
        normal, offset = _orient(normal, offset, total, n)
        key = _canonical(normal, offset)
        seen.setdefault(key, None)
    return list(seen)


def certify(points: Sequence[Sequence[int]], planes) -> list[tuple[tuple[int, ...], int, frozenset]]:
    """Exact validity check; returns ``(normal, offset, tight point ids)`` per facet."""
    r = len(points[0])
    M = max(1, max(abs(int(x)) for p in points for x in p))
    A = max(1, max(abs(int(x)) for a, _ in planes for x in a)) if planes else 1
    safe = r * M * A * 2 < _INT64_SAFE
    X = _int_matrix(points, safe)
    out = []
    chunk = 512
    for start in range(0, len(planes), chunk):
        block = planes[start:start + chunk]
        N = _int_matrix([a for a, _ in block], safe)
        b = np.array([off for _, off in block], dtype=X.dtype)
        slack = X @ N.T - b[None, :]
        if (slack > 0).any():
            raise HullError("candidate facet violated by an input point")
        tight = slack == 0
        for j, (a, off) in enumerate(block):
            ids = frozenset(np.flatnonzero(tight[:, j]).tolist())
            if len(ids) < r:
                raise HullError("candidate facet is not spanned by input points")
            out.append((a, off, ids))
    return out


def brute_force_facets(points: Sequence[Sequence[int]]) -> list[tuple[tuple[int, ...], int, frozenset]]:
    """Facet enumeration over all ``r``-subsets; the independent test oracle."""
    r = len(points[0])
    n = len(points)
    found: dict = {}
    for simp in itertools.combinations(range(n), r):
        base = points[simp[0]]
        rows = [[int(points[s][i]) - int(base[i]) for i in range(r)] for s in simp[1:]]
        normal = _exact_normal(rows, r)
        if normal is None:
            continue
        offset = sum(int(a) * int(b) for a, b in zip(normal, base))
        vals = [sum(int(a) * int(x) for a, x in zip(normal, p)) - offset for p in points]
        if all(v <= 0 for v in vals):
            pass
        elif all(v >= 0 for v in vals):
            normal, offset = tuple(-a for a in normal), -offset
        else:
            continue
        key = _canonical(normal, offset)
        if key not in found:
            vals = [sum(int(a) * int(x) for a, x in zip(key[0], p)) - key[1] for p in points]
            found[key] = frozenset(i for i, v in enumerate(vals) if v == 0)
    return [(a, b, ids) for (a, b), ids in found.items()]


def full_dim_facets(points: Sequence[Sequence[int]]) -> list[tuple[tuple[int, ...], int, frozenset]]:
    """Certified facets of the hull of full-dimensional integer points in ``R^r``."""
    r = len(points[0])
    if r == 1:
        vals = [int(p[0]) for p in points]
        lo, hi = min(vals), max(vals)
        return [
            ((1,), hi, frozenset(i for i, v in enumerate(vals) if v == hi)),
            ((-1,), -lo, frozenset(i for i, v in enumerate(vals) if v == lo)),
        ]
    from scipy.spatial import ConvexHull, QhullError

    X = np.array([[float(x) for x in p] for p in points])
    X = (X - X.mean(axis=0)) / max(1.0, float(np.abs(X).max()))
    last_err: Exception | None = None
    for opts in (None, "QJ Pp"):
        try:
            hull = ConvexHull(X, qhull_options=opts) if opts else ConvexHull(X)
            planes = candidate_planes(points, hull.simplices)
            facets = certify(points, planes)
            return facets
        except (QhullError, HullError) as err:  # pragma: no cover - fallback path
            last_err = err
    if len(points) <= 40:
        return brute_force_facets(points)
    raise HullError(f"could not certify hull: {last_err}")
