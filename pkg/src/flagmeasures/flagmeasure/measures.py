"""Atomic flag measures of polytopes and their integration engine.

Every measure here is a finite sum over faces ``F`` of a fixed dimension.
For ``tau_j`` an atom is the spherical measure on ``n(P, F)`` paired with the
fixed subspace ``F^perp``; it is integrated exactly on points and arcs and by
Monte Carlo on higher-dimensional cones. For the flag support measures
``Theta^(k)_m`` an atom is the triple integral over a Haar subspace ``L``, a
body point ``x`` of ``F`` and a normal ``u`` in ``n(P, F) cap L^perp``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..config import DEFAULTS
from ..euclid import (
    DomainError,
    Rotation,
    Subspace,
    as_stream,
    binom,
    haar_bases,
    sphere_area,
    sphere_points,
)
from ..polytope import Face, Polytope, SphericalCone, exact_solid_angle_3, sample_face
from ..stats import Accumulator, Estimate
from .functions import FlagFunction, TripleFunction, constant, lift

KINDS = ("tau", "theta", "area", "curvature")


@dataclass(frozen=True, eq=False)
class FlagAtom:
    """One face's contribution: weight ``V_m(F)``, cone ``n(P, F)``, subspace ``F^perp``."""

    weight: float
    cone: SphericalCone
    subspace: Subspace
    face_direction: Subspace
    face_ref: int
    face: Face = field(repr=False)

    def rotated(self, R: Rotation) -> "FlagAtom":
        from ..polytope.core import _rotate_face

        return FlagAtom(
            weight=self.weight,
            cone=self.cone.rotated(R),
            subspace=R.apply_subspace(self.subspace),
            face_direction=R.apply_subspace(self.face_direction),
            face_ref=self.face_ref,
            face=_rotate_face(self.face, R),
        )


@dataclass(frozen=True, eq=False)
class FlagMeasure:
    """A flag measure given by its atoms.

    ``kind`` is ``tau`` (indices ``(j,)``), ``theta``, ``area`` or
    ``curvature`` (indices ``(k, m)``). ``polytope`` is kept for the
    triple-integral kinds, which sample body points.
    """

    kind: str
    indices: tuple[int, ...]
    atoms: tuple[FlagAtom, ...]
    ambient: int
    polytope: Polytope | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown measure kind {self.kind!r}")

    @property
    def is_empty(self) -> bool:
        return len(self.atoms) == 0

    def integrate(self, f=None, N: int | None = None, rng=None, **kw) -> Estimate:
        return integrate(self, f, N, rng, **kw)

    def total_mass(self, N: int | None = None, rng=None, **kw) -> Estimate:
        return integrate(self, None, N, rng, **kw)

    def rotated(self, R: Rotation) -> "FlagMeasure":
        P = self.polytope.transformed(R) if self.polytope is not None else None
        return FlagMeasure(self.kind, self.indices, tuple(a.rotated(R) for a in self.atoms), self.ambient, P)

    def records(self) -> list[dict]:
        """Per-atom summary for reports."""
        out = []
        for a in self.atoms:
            out.append({
                "face": a.face_ref,
                "weight": a.weight,
                "apex_dim": a.cone.apex_dim,
                "subspace_basis": a.subspace.basis.tolist(),
                "cone_generators": a.cone.generators.tolist(),
            })
        return out


def _atoms(P: Polytope, j: int) -> tuple[FlagAtom, ...]:
    out = []
    for F in P.faces_of_dim(j):
        out.append(FlagAtom(
            weight=F.intrinsic_volume,
            cone=F.normal_cone,
            subspace=F.normal_space,
            face_direction=F.affine_basis,
            face_ref=F.index,
            face=F,
        ))
    return tuple(out)


def tau(P: Polytope, j: int) -> FlagMeasure:
    """The flag measure ``tau_j(P, .)`` on ``F(d, d - j)``."""
    d = P.ambient
    if not 0 <= j <= d - 1:
        raise DomainError(f"tau_j needs 0 <= j <= d-1, got j={j}")
    return FlagMeasure("tau", (j,), _atoms(P, j), d, P)


def _check_km(d: int, k: int, m: int) -> None:
    if not 0 <= k <= d - 1:
        raise DomainError(f"need 0 <= k <= d-1, got k={k}")
    if not 0 <= m <= d - k - 1:
        raise DomainError(f"need 0 <= m <= d-k-1, got m={m}")


def theta_polytope(P: Polytope, k: int, m: int) -> FlagMeasure:
    """Flag support measure ``Theta^(k)_m(P, .)`` on ``N(d, k)``."""
    _check_km(P.ambient, k, m)
    return FlagMeasure("theta", (k, m), _atoms(P, m), P.ambient, P)


def flag_area_measure(P: Polytope, k: int, m: int) -> FlagMeasure:
    """``S^(k)_m(P, .)``: the marginal of ``Theta^(k)_m`` on ``F^perp(d, k)``."""
    _check_km(P.ambient, k, m)
    return FlagMeasure("area", (k, m), _atoms(P, m), P.ambient, P)


def flag_curvature_measure(P: Polytope, k: int, m: int) -> FlagMeasure:
    """``C^(k)_m(P, .)``: the marginal of ``Theta^(k)_m`` on ``R^d x G(d, k)``."""
    _check_km(P.ambient, k, m)
    return FlagMeasure("curvature", (k, m), _atoms(P, m), P.ambient, P)


# ---------------------------------------------------------------------------
# integration
# ---------------------------------------------------------------------------

def _as_triple(mu: FlagMeasure, f) -> TripleFunction:
    if f is None:
        return TripleFunction(lambda x, u, B: np.ones(len(u)), "1")
    if isinstance(f, TripleFunction):
        return f
    if mu.kind == "area":
        if isinstance(f, FlagFunction):
            return lift(f)
        return TripleFunction(lambda x, u, B: f(u, B), getattr(f, "__name__", "f"))
    if mu.kind == "curvature":
        return TripleFunction(lambda x, u, B: f(x, B), getattr(f, "__name__", "f"))
    raise DomainError("Theta integrands must be TripleFunction instances")


def integrate(mu: FlagMeasure, f=None, N: int | None = None, rng=None, *,
              exact_max: int | None = None, threads: int | None = None) -> Estimate:
    """``int f d mu`` with a standard error.

    ``N`` is the Monte Carlo budget per atom. For ``tau`` measures, atoms whose
    cone has apex dimension ``<= exact_max`` (default 2) are integrated by
    exact point evaluation or adaptive quadrature along the arc.
    """
    N = DEFAULTS.samples_per_cone if N is None else int(N)
    threads = DEFAULTS.threads if threads is None else int(threads)
    if mu.is_empty:
        return Estimate(0.0, 0.0, 0)
    if mu.kind == "tau":
        mass_only = f is None
        f = constant(1.0) if f is None else f
        exact_max = DEFAULTS.exact_apex_max if exact_max is None else exact_max
        return _integrate_tau(mu, f, N, rng, exact_max, threads, mass_only)
    return _integrate_theta(mu, _as_triple(mu, f), N, rng, threads)


def _map(fn: Callable, items: list, threads: int) -> list:
    if threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(fn, items))
    return [fn(it) for it in items]


def _integrate_tau(mu: FlagMeasure, f: FlagFunction, N: int, rng, exact_max: int, threads: int,
                   mass_only: bool = False) -> Estimate:
    stream = as_stream(rng)
    d = mu.ambient
    pts_u, pts_B, pts_w = [], [], []
    arcs, mc, exact = [], [], []
    for i, a in enumerate(mu.atoms):
        s = a.cone.apex_dim
        if s == 0:
            continue
        if s == 1:
            for r in a.cone.rays():
                pts_u.append(r)
                pts_B.append(a.subspace.basis)
                pts_w.append(a.weight)
        elif s == 2 and exact_max >= 2:
            arcs.append(i)
        elif s == 3 and exact_max >= 3 and mass_only:
            exact.append(a.weight * exact_solid_angle_3(a.cone))
        else:
            mc.append(i)
    result = Estimate(float(sum(exact)), 0.0, len(exact))
    if pts_u:
        U = np.array(pts_u)
        B = np.array(pts_B)
        w = np.array(pts_w)
        vals, errs = f.evaluate_with_error(U, B)
        result = result + Estimate(float(w @ vals), float(np.sqrt(np.sum((w * errs) ** 2))), len(U))
    if arcs:
        if f.stochastic:
            result = result + _arcs_mc(mu, arcs, f, N, stream, threads)
        else:
            result = result + _arcs_quad(mu, arcs, f)
    if mc:
        def one(i: int) -> Estimate:
            a = mu.atoms[i]
            return _cone_mc(a, f, N, stream.child(a.face_ref))
        for e in _map(one, mc, threads):
            result = result + e
    return result


def _arc_arrays(mu: FlagMeasure, arcs: list[int]):
    E1, E2, S, Lg, W, B = [], [], [], [], [], []
    for i in arcs:
        a = mu.atoms[i]
        arc = a.cone.arc()
        E1.append(arc.e1)
        E2.append(arc.e2)
        S.append(arc.start)
        Lg.append(arc.length)
        W.append(a.weight)
        B.append(a.subspace.basis)
    return (np.array(E1), np.array(E2), np.array(S), np.array(Lg), np.array(W), np.array(B))


def _arcs_quad(mu: FlagMeasure, arcs: list[int], f: FlagFunction) -> Estimate:
    from scipy.integrate import quad_vec

    E1, E2, S, Lg, W, B = _arc_arrays(mu, arcs)
    keep = Lg > 0
    if not np.any(keep):
        return Estimate(0.0, 0.0, 0)
    E1, E2, S, Lg, W, B = E1[keep], E2[keep], S[keep], Lg[keep], W[keep], B[keep]
    coef = Lg * W

    def g(t: float) -> float:
        a = S + t * Lg
        U = np.cos(a)[:, None] * E1 + np.sin(a)[:, None] * E2
        return float(coef @ f.evaluate(U, B))

    val, err = quad_vec(g, 0.0, 1.0, epsabs=DEFAULTS.quad_epsabs, epsrel=1e-12,
                        limit=DEFAULTS.quad_limit)
    return Estimate(float(val), float(err), len(Lg))


def _arcs_mc(mu: FlagMeasure, arcs: list[int], f: FlagFunction, N: int, stream, threads: int) -> Estimate:
    E1, E2, S, Lg, W, B = _arc_arrays(mu, arcs)

    def one(idx: int) -> Estimate:
        i = arcs[idx]
        if Lg[idx] <= 0:
            return Estimate(0.0, 0.0, 0)
        gen = stream.child(mu.atoms[i].face_ref).generator
        acc = Accumulator()
        done = 0
        while done < N:
            n = min(DEFAULTS.chunk, N - done)
            a = S[idx] + Lg[idx] * gen.random(n)
            U = np.cos(a)[:, None] * E1[idx] + np.sin(a)[:, None] * E2[idx]
            acc.add(f.evaluate(U, np.broadcast_to(B[idx], (n,) + B[idx].shape)))
            done += n
        return acc.estimate(Lg[idx] * W[idx])

    out = Estimate(0.0, 0.0, 0)
    for e in _map(one, list(range(len(arcs))), threads):
        out = out + e
    return out


def _cone_mc(a: FlagAtom, f: FlagFunction, N: int, stream) -> Estimate:
    gen = stream.generator
    s = a.cone.apex_dim
    w = sphere_area(s)
    basis = a.cone.span.basis
    Bfix = a.subspace.basis
    acc = Accumulator()
    done = 0
    while done < N:
        n = min(DEFAULTS.chunk, N - done)
        U = sphere_points(n, basis, gen)
        hit = a.cone.contains(U)
        vals = np.zeros(n)
        if np.any(hit):
            Uh = U[hit]
            vals[hit] = f.evaluate(Uh, np.broadcast_to(Bfix, (len(Uh),) + Bfix.shape))
        acc.add(vals)
        done += n
    return acc.estimate(w * a.weight)


# ---------------------------------------------------------------------------
# flag support measures of polytopes
# ---------------------------------------------------------------------------

def theta_samples(P: Polytope, face: Face, k: int, n: int, gen):
    """Draw ``n`` samples of the triple integral for one ``m``-face.

    Returns ``(x, u, Lb, weight, both)`` where the integrand must be multiplied
    by ``weight`` (Jacobian times sphere area times cone indicator). When the
    normal sphere is ``S^0`` (``both`` is True) ``u`` has shape ``(2, n, d)``
    holding both unit normals, each with its own weight.
    """
    d = P.ambient
    m = face.dim
    s = d - k - m
    Q = haar_bases(n, d, d, gen)
    Lb = Q[:, :, :k]
    Lp = Q[:, :, k:]
    x = sample_face(P, face, n, gen)
    if m > 0:
        Bf = face.affine_basis.basis
        A = np.swapaxes(Lp, 1, 2) @ Bf  # (n, d-k, m) coordinates of P_perp L(F)
        G = np.swapaxes(A, 1, 2) @ A
        J = np.sqrt(np.clip(np.linalg.det(G), 0.0, None))
        Qa, _ = np.linalg.qr(A, mode="complete")
        W = Lp @ Qa[:, :, m:]
    else:
        J = np.ones(n)
        W = Lp
    cone = face.normal_cone
    if s == 1:
        w = W[:, :, 0]
        U = np.stack([w, -w])
        wt = np.stack([J * cone.contains(w), J * cone.contains(-w)])
        return x, U, Lb, wt, True
    U = sphere_points(n, W, gen)
    wt = J * sphere_area(s) * cone.contains(U)
    return x, U, Lb, wt, False


def _integrate_theta(mu: FlagMeasure, g: TripleFunction, N: int, rng, threads: int) -> Estimate:
    P = mu.polytope
    k, m = mu.indices
    d = mu.ambient
    stream = as_stream(rng)
    norm = 1.0 / binom(d - k - 1, m)

    def one(a: FlagAtom) -> Estimate:
        gen = stream.child(a.face_ref).generator
        acc = Accumulator()
        done = 0
        while done < N:
            n = min(DEFAULTS.chunk, N - done)
            x, U, Lb, wt, both = theta_samples(P, a.face, k, n, gen)
            vals = np.zeros(n)
            if both:
                for side in range(2):
                    hit = wt[side] > 0
                    if np.any(hit):
                        vals[hit] += wt[side][hit] * g.evaluate(x[hit], U[side][hit], Lb[hit])
            else:
                hit = wt > 0
                if np.any(hit):
                    vals[hit] = wt[hit] * g.evaluate(x[hit], U[hit], Lb[hit])
            acc.add(vals)
            done += n
        return acc.estimate(a.weight * norm)

    out = Estimate(0.0, 0.0, 0)
    for e in _map(one, list(mu.atoms), threads):
        out = out + e
    return out


def area_measure_sphere(P: Polytope, m: int, g: FlagFunction | None = None, N: int | None = None,
                        rng=None) -> Estimate:
    """``int g dS_m(P, .)`` for the classical area measure, ``g`` a function of ``u``.

    Computed from the ``tau_m`` atoms, ``S_m = binom(d-1, m)^{-1} * (u-marginal of tau_m)``.
    """
    d = P.ambient
    if not 0 <= m <= d - 1:
        raise DomainError("need 0 <= m <= d-1")
    est = integrate(tau(P, m), g, N, rng)
    return est.scale(1.0 / binom(d - 1, m))


__all__ = [
    "FlagAtom",
    "FlagMeasure",
    "tau",
    "theta_polytope",
    "flag_area_measure",
    "flag_curvature_measure",
    "integrate",
    "theta_samples",
    "area_measure_sphere",
]
