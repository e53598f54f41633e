"""Local Steiner formula for flats: sampling ``mu^(k)_eps`` and inverting to ``Theta^(k)_m``.

Affine ``k``-flats ``E = L + x`` are drawn from the motion-invariant measure
restricted to a window: ``L`` Haar on ``G(d, k)`` and ``x`` uniform in the
ball of radius ``R = circumradius + eps_max`` in ``L^perp`` around the
projected centroid. Every flat within distance ``eps_max`` of the body lies
in this window, so weighting each sample by ``kappa_{d-k} R^{d-k} / N`` is
unbiased for ``mu^(k)_eps``.

All ``eps`` values of one call share the same flats (common random numbers),
which keeps the Vandermonde differences from drowning in noise.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from .config import DEFAULTS, TOL
from .euclid import DomainError, as_stream, ball_volume, binom, haar_bases
from .flagmeasure import TripleFunction, theta_polytope
from .polytope import Polytope, build, intersect, project_flats, union_is_convex
from .polytope.exact import solve
from .stats import Accumulator, Estimate, combined_z

log = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# test sets
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class TestSet:
    """Indicator of a Borel set ``C`` of support elements ``(p, u, L)``.

    ``margin`` (optional) returns a signed distance to the boundary of ``C``;
    samples with ``|margin| <= boundary_tolerance`` are counted as shell hits.
    """

    __test__ = False  # not a pytest class

    predicate: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]
    name: str = "C"
    boundary_tolerance: float = 0.0
    margin: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray] | None = None
    empty: bool = False

    def __call__(self, p, u, B) -> np.ndarray:
        if self.empty:
            return np.zeros(len(u), dtype=bool)
        return np.asarray(self.predicate(p, u, B), dtype=bool).reshape(len(u))

    def shell(self, p, u, B) -> np.ndarray:
        if self.margin is None or self.boundary_tolerance <= 0:
            return np.zeros(len(u), dtype=bool)
        return np.abs(self.margin(p, u, B)) <= self.boundary_tolerance

    def as_triple(self) -> TripleFunction:
        return TripleFunction(lambda x, u, B: self(x, u, B).astype(float), self.name, indicator=True)

    @staticmethod
    def everything() -> "TestSet":
        return TestSet(lambda p, u, B: np.ones(len(u), dtype=bool), "all")

    @staticmethod
    def nothing() -> "TestSet":
        return TestSet(lambda p, u, B: np.zeros(len(u), dtype=bool), "empty", empty=True)

    @staticmethod
    def halfspace_normals(axis, tol: float = 0.0) -> "TestSet":
        """``<u, axis> > 0``."""
        a = np.asarray(axis, dtype=float)
        return TestSet(lambda p, u, B: u @ a > 0, "upper-normals", tol, lambda p, u, B: u @ a)

    @staticmethod
    def ball_points(center, radius: float, tol: float = 0.0) -> "TestSet":
        """Body point within ``radius`` of ``center``."""
        c = np.asarray(center, dtype=float)
        return TestSet(lambda p, u, B: np.linalg.norm(p - c, axis=1) <= radius, "point-ball", tol,
                       lambda p, u, B: np.linalg.norm(p - c, axis=1) - radius)

    @staticmethod
    def smooth_weight(fn: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray], name: str = "w") -> "SmoothTest":
        return SmoothTest(fn, name)


@dataclass(frozen=True, eq=False)
class SmoothTest:
    """A bounded continuous weight used in place of an indicator (weak-continuity probes)."""

    fn: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]
    name: str = "w"
    empty: bool = False

    def __call__(self, p, u, B) -> np.ndarray:
        return np.asarray(self.fn(p, u, B), dtype=float).reshape(len(u))

    def shell(self, p, u, B) -> np.ndarray:
        return np.zeros(len(u), dtype=bool)

    def as_triple(self) -> TripleFunction:
        return TripleFunction(lambda x, u, B: self(x, u, B), self.name)


# ---------------------------------------------------------------------------
# flat sampling
# ---------------------------------------------------------------------------

@dataclass
class FlatSampler:
    """Haar flats ``L + x`` whose position ``x`` is uniform in a ball of ``L^perp``."""

    k: int
    body: Polytope
    eps_max: float
    rng: object = None
    window: float = field(init=False)

    def __post_init__(self):
        d = self.body.ambient
        if not 0 <= self.k <= d - 1:
            raise DomainError(f"need 0 <= k <= d-1, got k={self.k}")
        if self.eps_max <= 0:
            raise DomainError("eps_max must be positive")
        self.stream = as_stream(self.rng)
        self.center = self.body.centroid
        self.window = self.body.circumradius() + float(self.eps_max)

    @property
    def window_measure(self) -> float:
        """``mu_k`` measure of the window: ``kappa_{d-k} R^{d-k}``."""
        s = self.body.ambient - self.k
        return ball_volume(s) * self.window ** s

    def sample(self, n: int, gen) -> tuple[np.ndarray, np.ndarray]:
        """``(Lb, X0)``: bases ``(n, d, k)`` and foot points ``(n, d)`` in ``L^perp``."""
        d = self.body.ambient
        k = self.k
        s = d - k
        Q = haar_bases(n, d, d, gen)
        Lb, Lp = Q[:, :, :k], Q[:, :, k:]
        g = gen.standard_normal((n, s))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        rho = self.window * gen.random(n) ** (1.0 / s)
        coords = np.einsum("nds,d->ns", Lp, self.center) + rho[:, None] * g
        X0 = np.einsum("nds,ns->nd", Lp, coords)
        return Lb, X0


@dataclass
class ShellStats:
    samples: int = 0
    hits: int = 0
    degenerate: int = 0
    shell: int = 0

    def merge(self, o: "ShellStats") -> "ShellStats":
        return ShellStats(self.samples + o.samples, self.hits + o.hits,
                          self.degenerate + o.degenerate, self.shell + o.shell)

    @property
    def discard_fraction(self) -> float:
        return self.degenerate / max(self.samples, 1)

    def as_dict(self) -> dict:
        return {"samples": self.samples, "hits": self.hits, "degenerate": self.degenerate,
                "discard_fraction": self.discard_fraction,
                "shell_fraction": self.shell / max(self.hits, 1)}


def _mu_columns(K: Polytope, k: int, eps, C, N: int, rng, shift: float = 0.0,
                threads: int | None = None) -> tuple[Accumulator, ShellStats, float]:
    """Per-sample contributions to ``mu_eps`` for every ``eps`` (one column each).

    With ``shift > 0`` the body is the parallel body ``K + shift B^d`` and the
    test set is transported by ``t_shift``, so ``C`` is evaluated at the
    projection onto ``K`` itself.
    """
    eps = np.asarray(eps, dtype=float)
    if np.any(eps <= 0):
        raise DomainError("eps must be positive")
    sampler = FlatSampler(k, K, float(eps.max()) + shift, rng)
    weight = sampler.window_measure
    threads = DEFAULTS.threads if threads is None else int(threads)
    chunks = [(i, min(DEFAULTS.chunk, N - start)) for i, start in enumerate(range(0, N, DEFAULTS.chunk))]

    def one(job):
        idx, n = job
        gen = sampler.stream.child(idx).generator
        Lb, X0 = sampler.sample(n, gen)
        proj = project_flats(K, Lb, X0)
        dist = proj.distance - shift
        near = proj.matched & (dist > 0) & (dist <= eps.max())
        deg = near & proj.degenerate
        keep = near & ~proj.degenerate
        vals = np.zeros((n, len(eps)))
        st = ShellStats(samples=n, degenerate=int(deg.sum()))
        if np.any(keep) and not getattr(C, "empty", False):
            p, u, B = proj.p[keep], proj.u[keep], Lb[keep]
            w = C(p, u, B).astype(float)
            inside = dist[keep][:, None] <= eps[None, :]
            vals[keep] = w[:, None] * inside
            st.hits = int(np.count_nonzero(w))
            st.shell = int(np.count_nonzero(C.shell(p, u, B)))
        acc = Accumulator(len(eps))
        acc.add(vals)
        return acc, st

    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            parts = list(ex.map(one, chunks))
    else:
        parts = [one(c) for c in chunks]
    acc, st = parts[0]
    for a, s in parts[1:]:
        acc = acc.merge(a)
        st = st.merge(s)
    return acc, st, weight


def sample_mu_eps(K: Polytope, k: int, eps: float, C: TestSet | None = None, N: int | None = None,
                  rng=None, threads: int | None = None) -> Estimate:
    """Unbiased estimate of ``mu^(k)_eps(K, C)``."""
    C = TestSet.everything() if C is None else C
    N = DEFAULTS.flats_per_eps if N is None else int(N)
    acc, st, w = _mu_columns(K, k, [eps], C, N, rng, threads=threads)
    if st.degenerate:
        log.warning("discarded %d degenerate flats of %d", st.degenerate, st.samples)
    return acc.estimate(w)


def sample_mu_grid(K: Polytope, k: int, grid, C: TestSet | None = None, N: int | None = None,
                   rng=None, shift: float = 0.0, threads: int | None = None):
    """Estimates of ``mu_eps`` on a grid with shared flats.

    Returns ``(values, covariance, stats)``.
    """
    C = TestSet.everything() if C is None else C
    N = DEFAULTS.flats_per_eps if N is None else int(N)
    acc, st, w = _mu_columns(K, k, grid, C, N, rng, shift=shift, threads=threads)
    return w * acc.mean(), w * w * acc.covariance_of_mean(), st


# ---------------------------------------------------------------------------
# Vandermonde inversion
# ---------------------------------------------------------------------------

def forward_matrix(d: int, k: int, grid=None) -> list[list[Fraction]]:
    """Rows ``eps``, columns ``m``: ``mu_eps = sum_m F[eps][m] Theta_m``.

    ``F = eps^{d-k-m} binom(d-k, m) / (d-k)``; the default grid is ``1..d-k``.
    """
    s = d - k
    grid = list(range(1, s + 1)) if grid is None else [Fraction(g) for g in grid]
    return [[Fraction(e) ** (s - m) * math.comb(s, m) / s for m in range(s)] for e in grid]


def vandermonde_coefficients(d: int, k: int) -> list[list[Fraction]]:
    """Exact ``a[m][i]`` with ``Theta_m = sum_i a[m][i] mu_{i+1}``."""
    if not 0 <= k <= d - 1:
        raise DomainError(f"need 0 <= k <= d-1, got k={k}")
    s = d - k
    F = forward_matrix(d, k)
    cols = []
    for i in range(s):
        e = [Fraction(int(r == i)) for r in range(s)]
        x = solve(F, e)
        if x is None:
            raise DomainError("singular Vandermonde system")
        cols.append(x)
    return [[cols[i][m] for i in range(s)] for m in range(s)]


def theta_via_inversion(K: Polytope, k: int, m: int, C: TestSet | None = None, N: int | None = None,
                        rng=None, shift: float = 0.0, threads: int | None = None) -> Estimate:
    """``Theta^(k)_m(K, C)`` as the exact combination of ``mu_1, ..., mu_{d-k}``."""
    d = K.ambient
    if not 0 <= m <= d - k - 1:
        raise DomainError(f"need 0 <= m <= d-k-1, got m={m}")
    C = TestSet.everything() if C is None else C
    if getattr(C, "empty", False):
        return Estimate(0.0, 0.0, 0)
    N = DEFAULTS.flats_per_eps if N is None else int(N)
    a = np.array([float(x) for x in vandermonde_coefficients(d, k)[m]])
    mu, cov, _ = sample_mu_grid(K, k, np.arange(1, d - k + 1, dtype=float), C, N, rng, shift, threads)
    return Estimate(float(a @ mu), math.sqrt(max(float(a @ cov @ a), 0.0)), N)


# ---------------------------------------------------------------------------
# verification records
# ---------------------------------------------------------------------------

@dataclass
class SteinerFit:
    k: int
    grid: list[float]
    mu: list[Estimate]
    coefficients: list[Estimate]
    condition_number: float
    chi2: float
    dof: int
    reference: list[Estimate] = field(default_factory=list)
    z: list[float] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    stats: dict = field(default_factory=dict)

    @property
    def agrees(self) -> bool:
        return all(abs(z) <= 3.0 for z in self.z)

    def as_dict(self) -> dict:
        return {
            "k": self.k,
            "grid": self.grid,
            "mu": [e.as_dict() for e in self.mu],
            "coefficients": [e.as_dict() for e in self.coefficients],
            "reference": [e.as_dict() for e in self.reference],
            "z": self.z,
            "condition_number": self.condition_number,
            "chi2": self.chi2,
            "dof": self.dof,
            "agrees": self.agrees,
            "warnings": self.warnings,
            "stats": self.stats,
        }


def _gls(X: np.ndarray, y: np.ndarray, cov: np.ndarray):
    """Generalised least squares with a small ridge on singular covariances."""
    n = len(y)
    c = cov + np.eye(n) * 1e-300
    try:
        Ci = np.linalg.inv(c)
        A = X.T @ Ci @ X
        covb = np.linalg.inv(A)
    except np.linalg.LinAlgError:
        Ci = np.linalg.pinv(c)
        covb = np.linalg.pinv(X.T @ Ci @ X)
    beta = covb @ X.T @ Ci @ y
    r = y - X @ beta
    chi2 = float(r @ Ci @ r) if n > X.shape[1] else 0.0
    return beta, covb, chi2


def verify_local_steiner(K: Polytope, k: int, C: TestSet | None = None, grid=None, N: int | None = None,
                         rng=None, reference_N: int = 200_000, threads: int | None = None) -> SteinerFit:
    """Fit ``mu_eps`` on ``grid`` to the local Steiner polynomial and compare with ``theta_polytope``."""
    d = K.ambient
    s = d - k
    grid = [float(e) for e in (range(1, s + 1) if grid is None else grid)]
    if len(set(grid)) < s:
        raise DomainError(f"the grid needs at least {s} distinct positive values")
    C = TestSet.everything() if C is None else C
    N = DEFAULTS.flats_per_eps if N is None else int(N)
    stream = as_stream(rng)
    X = np.array([[float(x) for x in row] for row in forward_matrix(d, k, grid)])
    cond = float(np.linalg.cond(X))
    warnings = []
    if cond > TOL.ill_conditioned:
        warnings.append(f"ill-conditioned grid (condition number {cond:.3g})")
        log.warning(warnings[-1])
    mu, cov, st = sample_mu_grid(K, k, grid, C, N, stream.child(1), threads=threads)
    beta, covb, chi2 = _gls(X, mu, cov)
    coeffs = [Estimate(float(beta[m]), math.sqrt(max(covb[m, m], 0.0)), N) for m in range(s)]
    g = C.as_triple()
    ref = [theta_polytope(K, k, m).integrate(g, reference_N, stream.child(100 + m), threads=threads)
           for m in range(s)]
    z = [combined_z(c, r) for c, r in zip(coeffs, ref)]
    mus = [Estimate(float(mu[i]), math.sqrt(max(cov[i, i], 0.0)), N) for i in range(len(grid))]
    return SteinerFit(k, grid, mus, coeffs, cond, chi2, len(grid) - s, ref, z, warnings, st.as_dict())


def _record(left: Estimate, right: Estimate, **extra) -> dict:
    z = combined_z(left, right)
    out = {"left": left.as_dict(), "right": right.as_dict(), "z": z, "agrees": abs(z) <= 3.0}
    out.update(extra)
    return out


def verify_parallel_expansion(K: Polytope, k: int, m: int, eps: float, C: TestSet | None = None,
                              N: int | None = None, rng=None, reference_N: int = 200_000,
                              threads: int | None = None) -> dict:
    """``Theta_m(K + eps B, t_eps C)`` against ``sum_j eps^j binom(m, j) Theta_{m-j}(K, C)``."""
    d = K.ambient
    if not 0 <= m <= d - k - 1:
        raise DomainError(f"need 0 <= m <= d-k-1, got m={m}")
    if eps < 0:
        raise DomainError("eps must be non-negative")
    C = TestSet.everything() if C is None else C
    stream = as_stream(rng)
    left = theta_via_inversion(K, k, m, C, N, stream.child(1), shift=eps, threads=threads)
    g = C.as_triple()
    right = Estimate(0.0, 0.0, 0)
    for j in range(m + 1):
        c = eps ** j * math.comb(m, j)
        if c == 0:
            continue
        right = right + theta_polytope(K, k, m - j).integrate(g, reference_N, stream.child(10 + j),
                                                              threads=threads).scale(c)
    return _record(left, right, k=k, m=m, eps=eps)


def atom_balance(K: Polytope, M: Polytope, m: int, samples: int = 200, rng=None) -> dict:
    """Exact check of additivity for the ``m``-face data behind every ``Theta^(k)_m``.

    For each affine hull carrying an ``m``-face of one of ``K, M, K u M, K n M``,
    sample points ``x`` on those faces and normals ``u`` on the unit sphere of
    the orthogonal complement, and count
    ``sum_{K u M, K n M} - sum_{K, M}`` of ``1{x in P} 1{u in N(P, F)}``.
    The counts are integers; additivity means they all vanish.
    """
    if not union_is_convex(K, M):
        raise DomainError("K u M is not convex")
    U = build(np.vstack([K.vertex_array, M.vertex_array]) if K.vertices is None
              else list(K.vertices) + list(M.vertices))
    I = intersect(K, M)
    bodies = [(U, 1), (K, -1), (M, -1)] + ([(I, 1)] if I is not None else [])
    stream = as_stream(rng)
    gen = stream.generator
    groups: dict[tuple, list] = {}
    for P, sign in bodies:
        for F in P.faces_of_dim(m) if m <= P.dim else ():
            key = _hull_key(F)
            groups.setdefault(key, []).append((P, F, sign))
    worst = 0
    checked = 0
    from .polytope import sample_face
    from .euclid import sphere_points

    for key, members in groups.items():
        Fperp = members[0][1].normal_space.basis
        for P0, F0, _ in members:
            xs = sample_face(P0, F0, samples, gen)
            us = sphere_points(samples, Fperp, gen)
            count = np.zeros(samples, dtype=np.int64)
            for P, F, sign in members:
                inside = _in_face(P, F, xs)
                cone = F.normal_cone.contains(us)
                count += sign * (inside & cone)
            worst = max(worst, int(np.abs(count).max()))
            checked += samples
    return {"groups": len(groups), "checked": checked, "max_abs_count": worst, "exact": worst == 0}


def _hull_key(F) -> tuple:
    B = F.affine_basis.basis
    proj = B @ B.T
    c = F.centroid - proj @ F.centroid
    return tuple(np.round(np.concatenate([proj.ravel(), c]), 9).tolist())


def _in_face(P: Polytope, F, xs: np.ndarray) -> np.ndarray:
    tol = TOL.geometric * max(1.0, P.circumradius())
    ok = np.ones(len(xs), dtype=bool)
    for a, b in P.facet_inequalities:
        av = np.array([float(v) for v in a])
        ok &= xs @ av <= float(b) + tol
    for a, b in P.equalities:
        av = np.array([float(v) for v in a])
        ok &= np.abs(xs @ av - float(b)) <= tol
    # x must also lie on aff(F); faces sharing the affine hull make this a check on P n aff(F)
    B = F.affine_basis.basis
    r = (xs - F.centroid) - ((xs - F.centroid) @ B) @ B.T
    return ok & (np.linalg.norm(r, axis=1) <= tol)


def additivity_check(K: Polytope, M: Polytope, k: int, m: int, C: TestSet | None = None,
                     N: int | None = None, rng=None, method: str = "polytope",
                     threads: int | None = None) -> dict:
    """``Theta(K u M) + Theta(K n M)`` against ``Theta(K) + Theta(M)``.

    ``method`` is ``"polytope"`` (face-sum evaluator, with the exact atom
    balance attached) or ``"inversion"`` (flat sampling).
    """
    if not union_is_convex(K, M):
        raise DomainError("K u M is not convex")
    C = TestSet.everything() if C is None else C
    U = build(list(K.vertices) + list(M.vertices)) if K.vertices is not None else \
        build(np.vstack([K.vertex_array, M.vertex_array]))
    I = intersect(K, M)
    stream = as_stream(rng)

    def theta(P: Polytope | None, i: int) -> Estimate:
        if P is None:
            return Estimate(0.0, 0.0, 0)
        if method == "polytope":
            if m > P.dim:
                return Estimate(0.0, 0.0, 0)
            return theta_polytope(P, k, m).integrate(C.as_triple(), N, stream.child(i), threads=threads)
        if method == "inversion":
            return theta_via_inversion(P, k, m, C, N, stream.child(i), threads=threads)
        raise DomainError(f"unknown method {method!r}")

    left = theta(U, 1) + theta(I, 2)
    right = theta(K, 3) + theta(M, 4)
    extra = {"k": k, "m": m, "method": method}
    if method == "polytope":
        extra["atoms"] = atom_balance(K, M, m, rng=stream.child(5))
    return _record(left, right, **extra)


__all__ = [
    "TestSet",
    "SmoothTest",
    "FlatSampler",
    "ShellStats",
    "SteinerFit",
    "sample_mu_eps",
    "sample_mu_grid",
    "forward_matrix",
    "vandermonde_coefficients",
    "theta_via_inversion",
    "verify_local_steiner",
    "verify_parallel_expansion",
    "additivity_check",
    "atom_balance",
]
