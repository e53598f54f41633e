"""Both sides of the integral identities linking the flag measures.

Each function returns a pair of independent estimates that should agree:

* :func:`alt_representation`: ``binom(d-k-1, m) int f dS^(k)_m`` against the
  face sum ``(omega_{d-k}/omega_d) sum_F V_m(F) int_n(P,F) int_{G(u^perp,k)}
  |<F^perp, L>|^2 f(u, L)``.
* :func:`area_marginal`: ``S^(k)_m(C x G(d,k))`` against
  ``(omega_{d-k}/omega_d) S_m(C)``.
* :func:`psi_link`: ``int f(u, L + <u>) dS^(d-1-j)_j`` against
  ``(omega_{j+1}/omega_d) int f dpsi_j``.
"""

from __future__ import annotations

import numpy as np

from ..config import DEFAULTS
from ..euclid import (
    as_stream,
    binom,
    haar_bases_containing,
    sphere_area,
    sphere_points,
    subspace_det_batch,
)
from ..polytope import Polytope
from ..stats import Accumulator, Estimate
from .functions import FlagFunction, TripleFunction, lift
from .measures import area_measure_sphere, flag_area_measure, integrate
from .transform import psi_integrate


def _flag_triple(f) -> TripleFunction:
    return lift(f) if isinstance(f, FlagFunction) else f


def alt_representation_lhs(P: Polytope, k: int, m: int, f, N: int | None = None, rng=None) -> Estimate:
    d = P.ambient
    est = integrate(flag_area_measure(P, k, m), _flag_triple(f), N, rng)
    return est.scale(binom(d - k - 1, m))


def alt_representation_rhs(P: Polytope, k: int, m: int, f: FlagFunction, N: int | None = None,
                           rng=None) -> Estimate:
    """Face sum with ``u`` uniform on ``n(P, F)`` and ``L`` Haar in ``u^perp``."""
    d = P.ambient
    N = DEFAULTS.samples_per_cone if N is None else int(N)
    stream = as_stream(rng)
    const = sphere_area(d - k) / sphere_area(d)
    out = Estimate(0.0, 0.0, 0)
    for F in P.faces_of_dim(m):
        cone = F.normal_cone
        s = cone.apex_dim
        if s == 0:
            continue
        gen = stream.child(F.index).generator
        Fp = F.normal_space.basis
        area = 2.0 if s == 1 else sphere_area(s)
        acc = Accumulator()
        done = 0
        while done < N:
            n = min(DEFAULTS.chunk, N - done)
            U = sphere_points(n, cone.span.basis, gen)
            hit = cone.contains(U)
            vals = np.zeros(n)
            if np.any(hit):
                Uh = U[hit]
                L = haar_bases_containing(Uh, k + 1, gen)[:, :, 1:]
                det2 = subspace_det_batch(L, np.broadcast_to(Fp, (len(Uh),) + Fp.shape)) ** 2
                vals[hit] = det2 * f.evaluate(Uh, L)
            acc.add(vals)
            done += n
        out = out + acc.estimate(const * area * F.intrinsic_volume)
    return out


def alt_representation(P: Polytope, k: int, m: int, f: FlagFunction, N: int | None = None,
                       rng=None) -> tuple[Estimate, Estimate]:
    stream = as_stream(rng)
    return (alt_representation_lhs(P, k, m, f, N, stream.child(1)),
            alt_representation_rhs(P, k, m, f, N, stream.child(2)))


def area_marginal(P: Polytope, k: int, m: int, g, N: int | None = None,
                  rng=None) -> tuple[Estimate, Estimate]:
    """``g`` is a function of the normal (an indicator of a cap, say)."""
    d = P.ambient
    stream = as_stream(rng)
    gf = g if isinstance(g, FlagFunction) else FlagFunction(lambda u, B: g(u), "g(u)")
    lhs = integrate(flag_area_measure(P, k, m), lift(gf), N, stream.child(1))
    rhs = area_measure_sphere(P, m, gf, N, stream.child(2)).scale(sphere_area(d - k) / sphere_area(d))
    return lhs, rhs


def psi_link(P: Polytope, j: int, f: FlagFunction, N: int | None = None, rng=None,
             N_psi: int = 40_000) -> tuple[Estimate, Estimate]:
    """``f`` is a flag function on ``F(d, d-j)``."""
    d = P.ambient
    k = d - 1 - j
    stream = as_stream(rng)

    def fn(x, u, B):
        return f.evaluate(u, np.concatenate([u[:, :, None], B], axis=2))

    lhs = integrate(flag_area_measure(P, k, j), TripleFunction(fn, f"{f.name}(u, L+u)"), N, stream.child(1))
    rhs = psi_integrate(P, j, f, N_psi, stream.child(2)).scale(sphere_area(j + 1) / sphere_area(d))
    return lhs, rhs


__all__ = [
    "alt_representation",
    "alt_representation_lhs",
    "alt_representation_rhs",
    "area_marginal",
    "psi_link",
]
