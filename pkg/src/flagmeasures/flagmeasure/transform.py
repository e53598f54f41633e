"""The integral transform ``T_j`` on ``F(d, d - j)`` and the measure ``psi_j``.

``(T_j h)(u, L)`` averages ``|<L, M>|^2 h(u, M)`` over Haar subspaces ``M`` of
dimension ``d - j`` containing ``u``. The Monte Carlo evaluator memoises its
value per flag so that repeated evaluation at the same flag is consistent;
the inner random numbers are derived from the caller's stream and a hash of
the quantised flag, which makes results independent of evaluation order.
"""

from __future__ import annotations

import hashlib
import math
import threading

import numpy as np

from ..euclid import (
    DomainError,
    Subspace,
    as_stream,
    binom,
    haar_bases_containing,
    sphere_points,
    subspace_det_batch,
)
from ..polytope import Polytope
from ..stats import Accumulator, Estimate
from .functions import FlagFunction
from .measures import integrate, tau

_QUANT = 1e-12


class _FlagCache:
    """Thread-safe memo keyed by flags quantised to ``1e-12``."""

    def __init__(self):
        self._lock = threading.Lock()
        self._data: dict[bytes, tuple[float, float]] = {}

    @staticmethod
    def keys(u: np.ndarray, B: np.ndarray) -> list[bytes]:
        proj = np.einsum("ndq,neq->nde", B, B)
        qu = np.round(u / _QUANT).astype(np.int64)
        qp = np.round(proj.reshape(len(u), -1) / _QUANT).astype(np.int64)
        both = np.concatenate([qu, qp], axis=1)
        return [row.tobytes() for row in both]

    def lookup(self, keys: list[bytes]):
        with self._lock:
            return [self._data.get(k) for k in keys]

    def store(self, keys: list[bytes], vals: np.ndarray, errs: np.ndarray) -> None:
        with self._lock:
            for k, v, e in zip(keys, vals, errs):
                self._data.setdefault(k, (float(v), float(e)))

    def __len__(self) -> int:
        return len(self._data)


def _stream_id(keys: list[bytes]) -> int:
    h = hashlib.blake2b(digest_size=8)
    for k in keys:
        h.update(k)
    return int.from_bytes(h.digest(), "little")


def transform_T(j: int, h: FlagFunction, N: int = 1000, rng=None, d: int | None = None,
                block: int = 200_000) -> FlagFunction:
    """Monte Carlo evaluator of ``T_j h`` with ``N`` inner Haar draws per flag.

    The returned function is stochastic: ``error(u, B)`` gives the standard
    error of each value.
    """
    if j < 0:
        raise DomainError("j must be non-negative")
    N = max(int(N), 2)
    stream = as_stream(rng)
    cache = _FlagCache()

    def compute(u: np.ndarray, B: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        n, dd = u.shape
        q = B.shape[2]
        if d is not None and dd != d:
            raise DomainError("flag dimension mismatch")
        if q != dd - j:
            raise DomainError(f"T_{j} acts on F(d, d-{j}); got subspaces of dimension {q}")
        keys = cache.keys(u, B)
        found = cache.lookup(keys)
        todo = [i for i, v in enumerate(found) if v is None]
        vals = np.zeros(n)
        errs = np.zeros(n)
        for i, v in enumerate(found):
            if v is not None:
                vals[i], errs[i] = v
        if todo:
            per = max(1, block // N)
            for start in range(0, len(todo), per):
                idx = np.array(todo[start:start + per])
                sub_keys = [keys[i] for i in idx]
                gen = stream.child(_stream_id(sub_keys)).generator
                ur = np.repeat(u[idx], N, axis=0)
                M = haar_bases_containing(ur, q, gen)
                Br = np.repeat(B[idx], N, axis=0)
                det2 = subspace_det_batch(Br, M) ** 2
                hv = h.evaluate(ur, M)
                x = (det2 * hv).reshape(len(idx), N)
                v = x.mean(axis=1)
                e = x.std(axis=1, ddof=1) / math.sqrt(N)
                vals[idx] = v
                errs[idx] = e
                cache.store(sub_keys, v, e)
        return vals, errs

    def fn(u, B):
        return compute(np.asarray(u, dtype=float), np.asarray(B, dtype=float))[0]

    def err(u, B):
        return compute(np.asarray(u, dtype=float), np.asarray(B, dtype=float))[1]

    out = FlagFunction(fn, f"T{j}({h.name})", "continuous", True, err)
    object.__setattr__(out, "cache", cache)
    return out


def psi_integrate(P: Polytope, j: int, g: FlagFunction, N: int = 10_000, rng=None,
                  N_inner: int | None = None, threads: int | None = None) -> Estimate:
    """``int g dpsi_j(P, .)`` by the adjoint route ``int T_j g dtau_j``.

    The inner budget defaults to ``sqrt(N)``. Point atoms inherit the inner
    Monte Carlo error; arcs and higher cones are sampled with ``N`` outer
    draws, whose spread already contains the inner noise.
    """
    d = P.ambient
    N_inner = max(2, int(round(math.sqrt(N)))) if N_inner is None else int(N_inner)
    stream = as_stream(rng)
    Tg = transform_T(j, g, N_inner, stream.child(1), d=d)
    return integrate(tau(P, j), Tg, N, stream.child(2), threads=threads)


def psi_direct(P: Polytope, j: int, g: FlagFunction, N: int = 10_000, rng=None) -> Estimate:
    """Direct nested sampling of ``psi_j``: ``u`` in ``n(P, F)``, ``M`` Haar containing ``u``.

    Independent of :func:`psi_integrate` (no transform, no memo, no quadrature);
    used as an oracle.
    """
    d = P.ambient
    q = d - j
    stream = as_stream(rng)
    total = Estimate(0.0, 0.0, 0)
    for F in P.faces_of_dim(j):
        cone = F.normal_cone
        s = cone.apex_dim
        if s == 0:
            continue
        gen = stream.child(F.index).generator
        Bperp = F.normal_space.basis
        U = sphere_points(N, cone.span.basis, gen)
        hit = cone.contains(U)
        from ..euclid import sphere_area

        area = 2.0 if s == 1 else sphere_area(s)
        vals = np.zeros(N)
        if np.any(hit):
            Uh = U[hit]
            M = haar_bases_containing(Uh, q, gen)
            det2 = subspace_det_batch(np.broadcast_to(Bperp, (len(Uh),) + Bperp.shape), M) ** 2
            vals[hit] = det2 * g.evaluate(Uh, M)
        acc = Accumulator()
        acc.add(vals)
        total = total + acc.estimate(area * F.intrinsic_volume)
    return total


def transform_constant_check(d: int, j: int, N: int = 100_000, rng=None) -> Estimate:
    """Monte Carlo value of ``T_j 1`` at a random flag (should be ``1/binom(d-1, j)``)."""
    stream = as_stream(rng)
    gen = stream.generator
    u = sphere_points(1, np.eye(d), gen)
    B = haar_bases_containing(u, d - j, gen)
    ur = np.repeat(u, N, axis=0)
    M = haar_bases_containing(ur, d - j, gen)
    det2 = subspace_det_batch(np.repeat(B, N, axis=0), M) ** 2
    acc = Accumulator()
    acc.add(det2)
    return acc.estimate()


def grassmann_det_moment(d: int, k: int, m: int, N: int = 100_000, rng=None, u=None) -> tuple[Estimate, float]:
    """Mean of ``|<W, L>|^2`` for fixed ``W`` (dim ``d-1-m``) and Haar ``L`` (dim ``k``) in ``u^perp``.

    Returns the estimate and the closed form ``binom(d-1-k, m) / binom(d-1, m)``.
    """
    if not (0 <= k <= d - 1 and 0 <= m <= d - 1 - k):
        raise DomainError("need 0 <= k <= d-1 and 0 <= m <= d-1-k")
    stream = as_stream(rng)
    gen = stream.generator
    if u is None:
        u = sphere_points(1, np.eye(d), gen)[0]
    u = np.asarray(u, dtype=float)
    u = u / np.linalg.norm(u)
    frame = haar_bases_containing(u[None], d, gen)[0]  # u plus a random basis of u^perp
    W = frame[:, 1:d - m]  # dimension d-1-m inside u^perp
    L = haar_bases_containing(np.repeat(u[None], N, axis=0), k + 1, gen)[:, :, 1:]
    det2 = subspace_det_batch(np.broadcast_to(W, (N,) + W.shape), L) ** 2
    acc = Accumulator()
    acc.add(det2)
    return acc.estimate(), binom(d - 1 - k, m) / binom(d - 1, m)


__all__ = [
    "transform_T",
    "psi_integrate",
    "psi_direct",
    "transform_constant_check",
    "grassmann_det_moment",
    "Subspace",
]
