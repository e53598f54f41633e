"""A flag-continuous valuation without a continuous extension.

The polytopes ``P_t`` are convex hulls of lattice points ``2tz`` lifted to
the two paraboloids ``s = +-(1 - |x|^2)``. They converge to
``K = {(x, s) : |s| <= 1 - |x|^2}``, and so do their rotations
``Q_t = theta P_t`` about the vertical axis. Near the top the faces of ``P_t``
are lifted faces of the cubical grid, so their directions project onto the
finite set of axis-parallel subspaces; after rotating by ``pi/4`` they do
not. A smooth function of the face direction concentrated on those axis
directions therefore gives different limits along ``P_t`` and ``Q_t``.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.spatial import cKDTree

from .config import TOL
from .euclid import DomainError, Rotation, as_stream, binom, rotation_about_axis, sphere_points
from .flagmeasure import FlagFunction, Valuation, evaluate_valuation, flag_curvature_measure, spatial, tau
from .polytope import Polytope, build, min_norm_point, sample_face, solid_angle
from .polytope.exact import to_fraction
from .stats import Estimate

log = logging.getLogger(__name__)

INV_SQRT2 = 1.0 / math.sqrt(2.0)


# ---------------------------------------------------------------------------
# lift polytopes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LiftConfig:
    """Dimension ``d`` and lattice step ``t`` (an exact rational).

    The vertical bound used for faces near the axis needs ``t <= 1/8``;
    coarser steps are accepted only with ``allow_coarse``.
    """

    d: int = 3
    t: Fraction = Fraction(1, 8)
    layers: tuple[str, ...] = ("lower", "upper")
    allow_coarse: bool = False

    def __post_init__(self):
        object.__setattr__(self, "t", to_fraction(self.t))
        if self.d < 3:
            raise DomainError("the lift construction needs d >= 3")
        hi = Fraction(1, 2) if self.allow_coarse else Fraction(1, 8)
        if not 0 < self.t <= hi:
            raise DomainError(f"t must lie in (0, {hi}], got {self.t}")
        if not set(self.layers) <= {"lower", "upper"} or not self.layers:
            raise DomainError("layers must be a non-empty subset of {'lower', 'upper'}")


def lattice_points(d: int, t: Fraction) -> list[tuple[Fraction, ...]]:
    """``2tz`` for ``z`` in ``Z^{d-1}`` with ``1 - 4t^2|z|^2 >= 0``."""
    t = to_fraction(t)
    r = int(math.floor(1 / (2 * t)))
    out = []
    for z in itertools.product(range(-r, r + 1), repeat=d - 1):
        if 1 - 4 * t * t * sum(c * c for c in z) >= 0:
            out.append(tuple(2 * t * c for c in z))
    return out


def lift_points(cfg: LiftConfig) -> list[tuple[Fraction, ...]]:
    """Candidate vertices ``(x, +-(1 - |x|^2))``; rim points with height 0 appear once."""
    pts = []
    seen = set()
    for x in lattice_points(cfg.d, cfg.t):
        h = 1 - sum(c * c for c in x)
        for layer, sign in (("lower", -1), ("upper", 1)):
            if layer not in cfg.layers:
                continue
            p = x + (sign * h,)
            if p not in seen:
                seen.add(p)
                pts.append(p)
    return pts


def build_lift_polytope(cfg: LiftConfig) -> Polytope:
    return build(lift_points(cfg))


def support_K(U: np.ndarray) -> np.ndarray:
    """Support function of ``K = {|s| <= 1 - |x|^2}`` at rows of ``U``."""
    v = np.linalg.norm(U[:, :-1], axis=1)
    w = np.abs(U[:, -1])
    out = v.copy()
    inner = (w > 0) & (v <= 2 * w)
    out[inner] = v[inner] ** 2 / (4 * w[inner]) + w[inner]
    return out


def hausdorff_to_K(P: Polytope, n_dirs: int = 20_000, rng=None) -> float:
    """``d_H(P, K) = max_u (h_K(u) - h_P(u))`` for ``P`` inside ``K``.

    ``h_P`` and ``h_K`` are both rotation invariant about ``e_d`` only in the
    limit, so the maximum is searched over random directions and then refined
    along the meridian through the best direction.
    """
    V = P.vertex_array
    d = P.ambient
    gen = as_stream(rng).generator
    U = sphere_points(n_dirs, np.eye(d), gen)
    gap = support_K(U) - np.max(U @ V.T, axis=1)
    i = int(np.argmax(gap))
    best = float(gap[i])
    u0 = U[i]
    horiz = u0[:-1] / max(np.linalg.norm(u0[:-1]), 1e-300)

    def neg(a: float) -> float:
        u = np.concatenate([math.cos(a) * horiz, [math.sin(a)]])
        return -(float(support_K(u[None])[0]) - float(np.max(V @ u)))

    a0 = math.atan2(u0[-1], np.linalg.norm(u0[:-1]))
    res = minimize_scalar(neg, bounds=(a0 - 0.05, a0 + 0.05), method="bounded")
    return max(best, -float(res.fun), 0.0)


def hausdorff_nested(P: Polytope, Q: Polytope) -> float:
    """``d_H(P, Q)`` for ``P`` inside ``Q``: the largest vertex distance of ``Q`` to ``P``.

    Candidates are pruned with the nearest-vertex upper bound before running
    the exact minimum-norm-point solver.
    """
    VP, VQ = P.vertex_array, Q.vertex_array
    ub, _ = cKDTree(VP).query(VQ)
    order = np.argsort(-ub)
    best = 0.0
    for i in order:
        if ub[i] <= best:
            break
        q, _, _ = min_norm_point(VP - VQ[i])
        best = max(best, float(np.linalg.norm(q)))
    return best


# ---------------------------------------------------------------------------
# direction set and test set
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DirectionSet:
    """Directions of the ``j``-faces of ``[-1, 1]^{d-1}`` inside ``e_d^perp``."""

    d: int
    j: int
    projectors: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not 1 <= self.j <= self.d - 2:
            raise DomainError(f"j must lie in 1..{self.d - 2}")
        mats = []
        for S in itertools.combinations(range(self.d - 1), self.j):
            Pm = np.zeros((self.d, self.d))
            for i in S:
                Pm[i, i] = 1.0
            mats.append(Pm)
        object.__setattr__(self, "projectors", np.array(mats))

    def __len__(self) -> int:
        return len(self.projectors)

    def distances(self, proj: np.ndarray) -> np.ndarray:
        """``(n, |D|)`` distances ``|P - P_D|_F / sqrt(2)`` (root sum of squared sines)."""
        diff = proj[:, None] - self.projectors[None]
        return np.sqrt(np.sum(diff * diff, axis=(2, 3)) / 2.0)


def _face_projectors(Lperp: np.ndarray, d: int):
    """From bases of ``U = L^perp`` get ``|e_d | L|`` and the projector of ``L | e_d^perp``."""
    n = len(Lperp)
    PL = np.eye(d)[None] - Lperp @ Lperp.transpose(0, 2, 1)
    return _direction_data(PL, d)


def _direction_data(PL: np.ndarray, d: int):
    """``|e_d | L|`` and the projector of ``L | e_d^perp`` from projectors ``PL`` of ``L``."""
    vert = np.linalg.norm(PL[:, :, -1], axis=1)
    j = int(round(np.trace(PL[0])))
    Mh = PL.copy()
    Mh[:, -1, :] = 0.0
    Uu, s, _ = np.linalg.svd(Mh)
    Bj = Uu[:, :, :j]
    proj = Bj @ Bj.transpose(0, 2, 1)
    return vert, proj


def _bump(r: np.ndarray) -> np.ndarray:
    """``exp(1 - 1/(1 - r^2))`` on ``|r| < 1``, zero outside; equals 1 at 0."""
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    ok = np.abs(r) < 1
    out[ok] = np.exp(1.0 - 1.0 / (1.0 - r[ok] ** 2))
    return out


@dataclass(frozen=True)
class TestSetA:
    """``A = {L in G(d, j) : |e_d | L| <= 1/sqrt(2), L | e_d^perp in D}``."""

    __test__ = False

    d: int
    j: int
    delta: float = 1e-6

    @property
    def directions(self) -> DirectionSet:
        return DirectionSet(self.d, self.j)

    def contains(self, L: np.ndarray) -> np.ndarray:
        """``L`` given as bases ``(n, d, j)``."""
        PL = L @ L.transpose(0, 2, 1)
        vert, proj = _direction_data(PL, self.d)
        near = self.directions.distances(proj).min(axis=1) <= self.delta
        return (vert <= INV_SQRT2 + TOL.geometric) & near

    def probe_rotation(self, R: Rotation, n: int = 10_000, rng=None) -> dict:
        """Random members of ``A`` and the fraction whose rotation stays in ``A``."""
        gen = as_stream(rng).generator
        D = self.directions
        d, j = self.d, self.j
        pick = gen.integers(len(D), size=n)
        out = np.zeros((n, d, j))
        for i in range(n):
            axes = np.flatnonzero(np.diag(D.projectors[pick[i]]))
            B = np.zeros((d, j))
            B[axes, np.arange(j)] = 1.0
            # tilt each basis vector vertically, keeping |e_d | L| <= 1/sqrt(2)
            c = gen.uniform(-1, 1, size=j)
            c *= gen.uniform(0, 1) / max(np.linalg.norm(c), 1e-12)
            B[-1, :] = c
            q, _ = np.linalg.qr(B)
            out[i] = q
        inside = self.contains(out)
        rot = np.einsum("de,nej->ndj", R.matrix, out)
        back = self.contains(rot)
        return {"members": int(inside.sum()), "rotated_inside": int((inside & back).sum()),
                "fraction": float((inside & back).sum() / max(inside.sum(), 1))}


def separating_function(j: int, delta: float = math.pi / 16, d: int = 3) -> FlagFunction:
    """Smooth bump on ``F(d, d-j)`` around the flags whose ``U^perp`` lies in ``A``.

    ``f(u, U) = sum_D bump(dist(L | e_d^perp, D)/delta) * bump((|e_d | L| - 1/sqrt 2)_+ / delta)``
    with ``L = U^perp``. The supports of the summands are disjoint for
    ``delta`` below the separation of ``D``, so the sum is a single bump.
    """
    D = DirectionSet(d, j)

    def fn(u, B):
        if B.shape[1] != d or B.shape[2] != d - j:
            raise DomainError(f"separating function lives on F({d}, {d - j})")
        vert, proj = _face_projectors(B, d)
        a = _bump(np.maximum(vert - INV_SQRT2, 0.0) / delta)
        out = np.zeros(len(u))
        live = a > 0
        if np.any(live):
            dist = D.distances(proj[live])
            out[live] = a[live] * _bump(dist / delta).sum(axis=1)
        return out

    return FlagFunction(fn, f"separating(j={j}, delta={delta:.4g})", "smooth")


def invariant_function(j: int, delta: float = math.pi / 16, d: int = 3) -> FlagFunction:
    """A control integrand invariant under rotations about ``e_d``."""

    def fn(u, B):
        vert, _ = _face_projectors(B, d)
        return _bump(np.maximum(vert - INV_SQRT2, 0.0) / delta) * (1.0 + u[:, -1] ** 2)

    return FlagFunction(fn, "rotation-invariant control", "smooth")


# ---------------------------------------------------------------------------
# faces near the axis
# ---------------------------------------------------------------------------

B0_RADIUS = 0.25


def _face_edges(P: Polytope, F) -> list[tuple[int, int]]:
    ids = set(F.vertex_ids)
    return [tuple(E.vertex_ids) for E in P.faces_of_dim(1) if set(E.vertex_ids) <= ids]


def face_meets_B0(P: Polytope, F) -> bool:
    """Whether ``F`` meets ``B_0 = {|x| <= 1/4} x [0, inf)``."""
    V = P.vertex_array
    pts = [V[i] for i in F.vertex_ids if V[i][-1] >= 0]
    if not pts:
        return False
    if any(V[i][-1] < 0 for i in F.vertex_ids):
        for a, b in (_face_edges(P, F) if F.dim > 1 else [tuple(F.vertex_ids)]):
            sa, sb = V[a][-1], V[b][-1]
            if (sa < 0) != (sb < 0):
                lam = sa / (sa - sb)
                pts.append(V[a] + lam * (V[b] - V[a]))
    Y = np.array(pts)[:, :-1]
    r = np.linalg.norm(Y, axis=1)
    spread = np.linalg.norm(Y.max(axis=0) - Y.min(axis=0))
    if r.min() > B0_RADIUS + spread + TOL.geometric:
        return False
    q, _, _ = min_norm_point(Y)
    return float(np.linalg.norm(q)) <= B0_RADIUS + TOL.geometric


def _segment_in_B0(a: np.ndarray, b: np.ndarray) -> float:
    """Length of the part of segment ``[a, b]`` inside ``B_0`` (exact clipping)."""
    dv = b - a
    lo, hi = 0.0, 1.0
    # s >= 0
    if dv[-1] != 0:
        r = -a[-1] / dv[-1]
        if dv[-1] > 0:
            lo = max(lo, r)
        else:
            hi = min(hi, r)
    elif a[-1] < 0:
        return 0.0
    # |x + lam dx|^2 <= R^2
    x, dx = a[:-1], dv[:-1]
    A = float(dx @ dx)
    Bq = 2.0 * float(x @ dx)
    C = float(x @ x) - B0_RADIUS ** 2
    if A == 0:
        if C > 0:
            return 0.0
    else:
        disc = Bq * Bq - 4 * A * C
        if disc < 0:
            return 0.0
        sq = math.sqrt(disc)
        lo = max(lo, (-Bq - sq) / (2 * A))
        hi = min(hi, (-Bq + sq) / (2 * A))
    return max(hi - lo, 0.0) * float(np.linalg.norm(dv))


def vertical_bound_check(P: Polytope, j: int) -> dict:
    """Largest ``|e_d | L(F)|`` over ``j``-faces meeting ``B_0`` (must be at most ``1/sqrt 2``)."""
    d = P.ambient
    if not 1 <= j <= d - 2:
        raise DomainError(f"j must lie in 1..{d - 2}")
    worst, count = 0.0, 0
    for F in P.faces_of_dim(j):
        if not face_meets_B0(P, F):
            continue
        count += 1
        B = F.affine_basis.basis
        worst = max(worst, float(np.linalg.norm(B[-1, :])))
    return {"faces": count, "max_vertical": worst, "bound": INV_SQRT2,
            "holds": worst <= INV_SQRT2 + 1e-9}


def direction_membership(P: Polytope, j: int, delta: float = 1e-6) -> dict:
    """Fraction of ``j``-faces meeting ``B_0`` whose direction projects into ``D``."""
    d = P.ambient
    D = DirectionSet(d, j)
    hits, count = 0, 0
    for F in P.faces_of_dim(j):
        if not face_meets_B0(P, F):
            continue
        count += 1
        B = F.affine_basis.basis
        _, proj = _direction_data((B @ B.T)[None], d)
        if D.distances(proj).min() <= delta:
            hits += 1
    return {"faces": count, "in_D": hits, "fraction": hits / count if count else float("nan")}


def curvature_B0(P: Polytope, j: int, N: int = 10_000, rng=None) -> Estimate:
    """``C_j(P, B_0) = binom(d-1, j)^{-1} sum_F H^j(F n B_0) H^{d-1-j}(n(P, F))``.

    Edges are clipped exactly; higher faces use the hit fraction of uniform
    points. Solid angles are exact up to apex dimension 2.
    """
    d = P.ambient
    stream = as_stream(rng)
    V = P.vertex_array
    total = Estimate(0.0, 0.0, 0)
    for F in P.faces_of_dim(j):
        if not face_meets_B0(P, F):
            continue
        ang, ang_se = solid_angle(F.normal_cone, N, stream.child(2 * F.index))
        if j == 1:
            a, b = (V[i] for i in F.vertex_ids)
            part = Estimate(_segment_in_B0(a, b), 0.0, 1)
        else:
            x = sample_face(P, F, N, stream.child(2 * F.index + 1).generator)
            inside = (np.linalg.norm(x[:, :-1], axis=1) <= B0_RADIUS) & (x[:, -1] >= 0)
            frac = inside.mean()
            part = Estimate(frac * F.intrinsic_volume,
                            math.sqrt(frac * (1 - frac) / N) * F.intrinsic_volume, N)
        prod = Estimate(part.value * ang, math.hypot(part.se * ang, part.value * ang_se), N)
        total = total + prod
    return total.scale(1.0 / binom(d - 1, j))


def curvature_B0_mc(P: Polytope, j: int, N: int = 20_000, rng=None) -> Estimate:
    """The same quantity through the flag curvature measure ``C^(0)_j`` (independent route).

    Only faces meeting ``B_0`` can contribute, so the other atoms are dropped.
    """
    ind = spatial(lambda x: ((np.linalg.norm(x[:, :-1], axis=1) <= B0_RADIUS) & (x[:, -1] >= 0)).astype(float),
                  "B0", indicator=True)
    mu = flag_curvature_measure(P, 0, j)
    near = tuple(a for a in mu.atoms if face_meets_B0(P, a.face))
    return replace(mu, atoms=near).integrate(ind, N, rng)


def limit_curvature_B0(d: int = 3, j: int = 1) -> float:
    """``C_1(K, B_0)`` for ``d = 3`` by integrating the mean curvature of the top paraboloid."""
    if (d, j) != (3, 1):
        raise DomainError("closed form only for d = 3, j = 1")
    r = B0_RADIUS
    return math.pi * (0.25 * math.log(1 + 4 * r * r) + r * r)


def a_shell_mass(P: Polytope, j: int, delta: float = 1e-6, N: int = 10_000, rng=None) -> Estimate:
    """``tau_j(P, {(u, L^perp) : L in A})`` (exact when the normal cones have apex dimension <= 2)."""
    A = TestSetA(P.ambient, j, delta)
    stream = as_stream(rng)
    total = Estimate(0.0, 0.0, 0)
    faces = P.faces_of_dim(j)
    if not faces:
        return total
    L = np.array([F.affine_basis.basis for F in faces])
    inside = A.contains(L)
    for F, ok in zip(faces, inside):
        if ok:
            ang, se = solid_angle(F.normal_cone, N, stream.child(F.index))
            total = total + Estimate(F.intrinsic_volume * ang, F.intrinsic_volume * se, 1)
    return total


def equivariance_error(P: Polytope, j: int, R: Rotation) -> float:
    """Atom-by-atom distance between ``tau_j(R P)`` and ``R tau_j(P)``."""
    a = tau(P.transformed(R), j).atoms
    b = tau(P, j).rotated(R).atoms
    if len(a) != len(b):
        return math.inf
    worst = 0.0
    for x, y in zip(a, b):
        worst = max(worst, abs(x.weight - y.weight))
        worst = max(worst, float(np.abs(x.subspace.projector - y.subspace.projector).max()))
        gx = np.array(sorted(map(tuple, np.round(x.cone.generators, 12))))
        gy = np.array(sorted(map(tuple, np.round(y.cone.generators, 12))))
        if gx.shape != gy.shape:
            return math.inf
        worst = max(worst, float(np.abs(gx - gy).max()) if gx.size else 0.0)
    return worst


# ---------------------------------------------------------------------------
# the experiment
# ---------------------------------------------------------------------------

@dataclass
class CounterexampleRow:
    t: Fraction
    n_vertices: int
    hausdorff_K: float
    hausdorff_proxy: float
    phi_P: Estimate
    phi_Q: Estimate
    gap: Estimate
    curvature: Estimate
    a_shell: Estimate
    vertical: dict
    membership: dict
    rotated_membership: dict

    def as_dict(self) -> dict:
        return {
            "t": f"{self.t.numerator}/{self.t.denominator}",
            "n_vertices": self.n_vertices,
            "hausdorff_K": self.hausdorff_K,
            "hausdorff_proxy": self.hausdorff_proxy,
            "phi_P": self.phi_P.as_dict(),
            "phi_Q": self.phi_Q.as_dict(),
            "gap": self.gap.as_dict(),
            "curvature_B0": self.curvature.as_dict(),
            "a_shell_mass": self.a_shell.as_dict(),
            "vertical_bound": self.vertical,
            "direction_membership": self.membership,
            "rotated_direction_membership": self.rotated_membership,
        }


@dataclass
class CounterexampleResult:
    d: int
    j: int
    rows: list[CounterexampleRow]
    status: str
    reasons: list[str]
    control: bool
    limit_curvature: float | None = None
    rotation_probe: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "d": self.d,
            "j": self.j,
            "control": self.control,
            "status": self.status,
            "reasons": self.reasons,
            "limit_curvature_B0": self.limit_curvature,
            "rotation_probe": self.rotation_probe,
            "rows": [r.as_dict() for r in self.rows],
            "note": "the limit statement is asymptotic; success means a stabilised finite-t gap "
                    "together with decreasing Hausdorff distances",
        }


def _monotone_decreasing(xs: list[float]) -> bool:
    return all(b < a + 1e-15 for a, b in zip(xs, xs[1:]))


def classify(rows: list[CounterexampleRow], control: bool, k_sigma: float = 5.0,
             rel_tol: float = 0.25) -> tuple[str, list[str]]:
    """Status of a run.

    Main run: ``success`` when every gap exceeds ``k_sigma`` standard errors,
    the last two gaps differ by at most ``rel_tol`` of the last one (or by
    3 combined sigma), and both Hausdorff sequences decrease; a single grid
    point or an unresolved gap is ``inconclusive``. Control run: ``null-control
    passed`` when every gap is within 3 sigma of 0.
    """
    reasons = []
    if control:
        bad = [r for r in rows if abs(r.gap.value) > 3 * r.gap.se]
        if bad:
            return "failure", [f"control gap at t={r.t} exceeds 3 sigma" for r in bad]
        return "null-control passed", ["all control gaps within 3 sigma of 0"]
    if len(rows) < 2:
        return "inconclusive", ["a single grid point shows no limit trend"]
    small = [r for r in rows if r.gap.value <= k_sigma * r.gap.se]
    if small:
        reasons += [f"gap at t={r.t} is below {k_sigma} sigma" for r in small]
    a, b = rows[-2].gap, rows[-1].gap
    stable = abs(a.value - b.value) <= max(rel_tol * abs(b.value), 3 * math.hypot(a.se, b.se))
    if not stable:
        reasons.append("gap has not stabilised over the last two grid points")
    if not _monotone_decreasing([r.hausdorff_K for r in rows]):
        reasons.append("Hausdorff distance to K is not decreasing")
    if not _monotone_decreasing([r.hausdorff_proxy for r in rows]):
        reasons.append("Hausdorff distance to the finest polytope is not decreasing")
    if reasons:
        if any(r.gap.value < 0 or (r.gap.value == 0 and r.gap.se == 0) for r in rows) and not small:
            return "failure", reasons
        return "inconclusive", reasons
    return "success", ["gap stable above %g sigma; Hausdorff distances decrease" % k_sigma]


def run_counterexample(j: int = 1, t_grid=("1/8", "1/16", "1/32", "1/64"), N: int = 100_000, rng=None,
                       d: int = 3, f: FlagFunction | None = None, control: bool = False,
                       delta: float = math.pi / 16, angle: float = math.pi / 4,
                       log_progress: bool = False) -> CounterexampleResult:
    """Evaluate ``phi(P_t)`` and ``phi(theta P_t)`` along a decreasing grid of ``t``.

    ``control`` swaps the separating function for a rotation-invariant one.
    """
    if not 1 <= j <= d - 2:
        raise DomainError(f"j must lie in 1..{d - 2}")
    ts = sorted({to_fraction(t) for t in t_grid}, reverse=True)
    if f is None:
        f = invariant_function(j, delta, d) if control else separating_function(j, delta, d)
    R = rotation_about_axis(np.eye(d)[-1], angle)
    phi = Valuation(j, "flag_continuous", f)
    stream = as_stream(rng)
    polys = {t: build_lift_polytope(LiftConfig(d, t)) for t in ts}
    finest = polys[ts[-1]]
    rows = []
    for i, t in enumerate(ts):
        P = polys[t]
        Q = P.transformed(R)
        s = stream.child(i)
        vP = evaluate_valuation(P, phi, N, s.child(1))
        vQ = evaluate_valuation(Q, phi, N, s.child(2))
        # floating-point floor for the exact quadrature paths
        floor = 1e-10 * max(1.0, abs(vP.value), abs(vQ.value))
        vP = Estimate(vP.value, math.hypot(vP.se, floor), vP.n)
        vQ = Estimate(vQ.value, math.hypot(vQ.se, floor), vQ.n)
        gap = vP - vQ
        if not control:
            gap = Estimate(abs(gap.value), gap.se, gap.n)
        row = CounterexampleRow(
            t=t,
            n_vertices=P.n_vertices,
            hausdorff_K=hausdorff_to_K(P, rng=s.child(3)),
            hausdorff_proxy=hausdorff_nested(P, finest) if P is not finest else 0.0,
            phi_P=vP,
            phi_Q=vQ,
            gap=gap,
            curvature=curvature_B0(P, j, N, s.child(4)),
            a_shell=a_shell_mass(P, j, rng=s.child(5)),
            vertical=vertical_bound_check(P, j),
            membership=direction_membership(P, j),
            rotated_membership=direction_membership(Q, j),
        )
        if log_progress:
            log.info("t=%s vertices=%d phi(P)=%r phi(Q)=%r", t, P.n_vertices, vP, vQ)
        rows.append(row)
    status, reasons = classify(rows, control)
    lim = limit_curvature_B0(d, j) if (d, j) == (3, 1) else None
    probe = TestSetA(d, j).probe_rotation(R, rng=stream.child(999))
    return CounterexampleResult(d, j, rows, status, reasons, control, lim, probe)


__all__ = [
    "LiftConfig",
    "DirectionSet",
    "TestSetA",
    "lattice_points",
    "lift_points",
    "build_lift_polytope",
    "support_K",
    "hausdorff_to_K",
    "hausdorff_nested",
    "separating_function",
    "invariant_function",
    "face_meets_B0",
    "vertical_bound_check",
    "direction_membership",
    "curvature_B0",
    "curvature_B0_mc",
    "limit_curvature_B0",
    "a_shell_mass",
    "equivariance_error",
    "CounterexampleRow",
    "CounterexampleResult",
    "classify",
    "run_counterexample",
]
