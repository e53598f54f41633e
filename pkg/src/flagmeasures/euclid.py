"""Dimension-generic linear algebra, Haar sampling and the subspace determinant.

Subspaces are carried as ``d x k`` matrices with orthonormal columns. Batched
helpers (``*_batch``) take stacks of bases shaped ``(n, d, k)`` and are the
workhorses of the Monte Carlo estimators elsewhere in the package.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .config import TOL


class DomainError(ValueError):
    """Raised when an argument is outside the domain of an operation."""


# ---------------------------------------------------------------------------
# random streams
# ---------------------------------------------------------------------------

_MASK64 = (1 << 64) - 1


def _mix64(a: int, b: int) -> int:
    # splitmix64 finaliser over a combined word
    z = (a * 0x9E3779B97F4A7C15 + b + 0x632BE59BD9B4E019) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


class RngStream:
    """A reproducible random stream identified by ``(seed, stream_id)``.

    Two streams built from the same pair produce identical sequences.
    Child streams (:meth:`child`) get derived ids so that concurrent workers
    never share a sequence.
    """

    def __init__(self, seed: int = 0, stream_id: int = 0):
        self.seed = int(seed) & _MASK64
        self.stream_id = int(stream_id) & _MASK64
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,))
        self.generator = np.random.Generator(np.random.PCG64(ss))

    def child(self, index: int) -> "RngStream":
        return RngStream(self.seed, _mix64(self.stream_id, int(index) + 1))

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def as_stream(rng) -> RngStream:
    if isinstance(rng, RngStream):
        return rng
    if rng is None or isinstance(rng, (int, np.integer)):
        return RngStream(0 if rng is None else int(rng))
    # a bare Generator: derive a stream from it so children stay reproducible
    gen = as_generator(rng)
    return RngStream(int(gen.integers(0, 2**63)), 0)


# ---------------------------------------------------------------------------
# constants
# ---------------------------------------------------------------------------

def sphere_area(n: int) -> float:
    """Return ``omega_n = 2 pi^(n/2) / Gamma(n/2)``, the area of ``S^(n-1)``."""
    if n < 1:
        raise DomainError(f"sphere_area needs n >= 1, got {n}")
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


def ball_volume(n: int) -> float:
    """Volume ``kappa_n`` of the unit ball in ``R^n`` (``kappa_0 = 1``)."""
    if n < 0:
        raise DomainError(f"ball_volume needs n >= 0, got {n}")
    return math.pi ** (n / 2.0) / math.gamma(n / 2.0 + 1.0)


# ---------------------------------------------------------------------------
# orthonormalisation
# ---------------------------------------------------------------------------

def orthonormalize(vectors, tol: float | None = None) -> np.ndarray:
    """Modified Gram-Schmidt with one re-orthogonalisation pass.

    ``vectors`` is ``d x m`` (columns). Columns whose residual norm falls below
    ``tol`` relative to the largest input norm are dropped, so the result is a
    ``d x r`` orthonormal basis of the column span.
    """
    tol = TOL.rank if tol is None else tol
    V = np.array(vectors, dtype=float, copy=True)
    if V.ndim == 1:
        V = V[:, None]
    d, m = V.shape
    scale = max(float(np.max(np.linalg.norm(V, axis=0))) if m else 0.0, 1.0)
    out: list[np.ndarray] = []
    for i in range(m):
        v = V[:, i].copy()
        for _ in range(2):
            for q in out:
                v -= (q @ v) * q
        nv = np.linalg.norm(v)
        if nv > tol * scale:
            out.append(v / nv)
    if not out:
        return np.zeros((d, 0))
    return np.stack(out, axis=1)


def complement_basis(basis: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the orthogonal complement of ``span(basis)``.

    Deterministic: completes with standard basis vectors in order.
    """
    d = basis.shape[0]
    full = orthonormalize(np.hstack([basis, np.eye(d)]))
    return full[:, basis.shape[1]:]


# ---------------------------------------------------------------------------
# types
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Subspace:
    """A linear subspace ``L`` of ``R^d`` with an orthonormal basis."""

    basis: np.ndarray

    def __post_init__(self):
        B = np.asarray(self.basis, dtype=float)
        if B.ndim != 2:
            raise DomainError("basis must be a d x k matrix")
        k = B.shape[1]
        if k and np.max(np.abs(B.T @ B - np.eye(k))) > 1e-10:
            Q = orthonormalize(B)
            if Q.shape[1] < k:
                raise DomainError("rank-deficient basis for Subspace")
            B = Q
        B.setflags(write=False)
        object.__setattr__(self, "basis", B)

    @classmethod
    def span(cls, vectors, d: int | None = None) -> "Subspace":
        """Span of the given column vectors (dependent columns are dropped)."""
        V = np.asarray(vectors, dtype=float)
        if V.ndim == 1:
            V = V[:, None]
        if V.size == 0:
            return cls.zero(d if d is not None else V.shape[0])
        return cls(orthonormalize(V))

    @classmethod
    def full(cls, d: int) -> "Subspace":
        return cls(np.eye(d))

    @classmethod
    def zero(cls, d: int) -> "Subspace":
        return cls(np.zeros((d, 0)))

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    @property
    def ambient(self) -> int:
        return self.basis.shape[0]

    @property
    def projector(self) -> np.ndarray:
        return self.basis @ self.basis.T

    def complement(self) -> "Subspace":
        return Subspace(complement_basis(self.basis))

    def project(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return x @ self.projector

    def contains(self, x, tol: float = 1e-10) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.linalg.norm(x - self.project(x)) <= tol * max(1.0, np.linalg.norm(x)))

    def same_as(self, other: "Subspace", tol: float = 1e-9) -> bool:
        return self.dim == other.dim and bool(
            np.max(np.abs(self.projector - other.projector)) <= tol
        )

    def __repr__(self) -> str:
        return f"Subspace(dim={self.dim}, ambient={self.ambient})"


@dataclass(frozen=True, eq=False)
class Rotation:
    """An orthogonal ``d x d`` matrix; ``proper`` rotations have det +1."""

    matrix: np.ndarray
    proper: bool = field(default=True)

    def __post_init__(self):
        M = np.asarray(self.matrix, dtype=float)
        d = M.shape[0]
        if M.shape != (d, d) or np.max(np.abs(M.T @ M - np.eye(d))) > 1e-12:
            raise DomainError("Rotation matrix must be orthogonal")
        det = np.linalg.det(M)
        if self.proper and abs(det - 1.0) > 1e-12:
            raise DomainError("Rotation must have determinant +1")
        M = M.copy()
        M.setflags(write=False)
        object.__setattr__(self, "matrix", M)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def inverse(self) -> "Rotation":
        return Rotation(self.matrix.T, proper=self.proper)

    def apply(self, x) -> np.ndarray:
        """Rotate points given as rows (``(..., d)``)."""
        return np.asarray(x, dtype=float) @ self.matrix.T

    def apply_subspace(self, L: Subspace) -> Subspace:
        return Subspace(self.matrix @ L.basis)

    def compose(self, other: "Rotation") -> "Rotation":
        return Rotation(self.matrix @ other.matrix, proper=self.proper and other.proper)


# ---------------------------------------------------------------------------
# subspace determinant
# ---------------------------------------------------------------------------

def subspace_det(L: Subspace, M: Subspace) -> float:
    """``|<L, M>|``: absolute determinant of the orthogonal projection ``L -> M``.

    For ``dim L <= dim M`` this is the product of the cosines of the principal
    angles; arguments are swapped when ``dim L > dim M``.
    """
    A, B = L.basis, M.basis
    if A.shape[0] != B.shape[0]:
        raise DomainError("subspaces live in different ambient spaces")
    return float(subspace_det_batch(A[None], B[None])[0])


def subspace_det_batch(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Vectorised :func:`subspace_det` for stacks of bases ``(n, d, a)``, ``(n, d, b)``."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.shape[-1] > B.shape[-1]:
        A, B = B, A
    a = A.shape[-1]
    if a == 0:
        return np.ones(np.broadcast_shapes(A.shape[:-2], B.shape[:-2]))
    C = np.swapaxes(B, -1, -2) @ A  # (..., b, a)
    if C.shape[-1] == C.shape[-2]:
        val = np.abs(np.linalg.det(C))
    else:
        G = np.swapaxes(C, -1, -2) @ C
        val = np.sqrt(np.clip(np.linalg.det(G), 0.0, None))
    return np.clip(val, 0.0, 1.0)


def principal_cosines(L: Subspace, M: Subspace) -> np.ndarray:
    """Cosines of the principal angles between ``L`` and ``M`` (descending)."""
    if L.dim == 0 or M.dim == 0:
        return np.zeros(0)
    s = np.linalg.svd(M.basis.T @ L.basis, compute_uv=False)
    return np.clip(s, 0.0, 1.0)


# ---------------------------------------------------------------------------
# Haar sampling
# ---------------------------------------------------------------------------

def _qr_fixed(G: np.ndarray) -> np.ndarray:
    Q, R = np.linalg.qr(G)
    diag = np.diagonal(R, axis1=-2, axis2=-1)
    signs = np.where(diag < 0, -1.0, 1.0)
    return Q * signs[..., None, :]


def haar_bases(n: int, d: int, k: int, rng) -> np.ndarray:
    """``n`` independent Haar-distributed ``k``-subspaces of ``R^d`` as ``(n, d, k)``."""
    if not 0 <= k <= d:
        raise DomainError(f"need 0 <= k <= d, got k={k}, d={d}")
    if k == 0:
        return np.zeros((n, d, 0))
    gen = as_generator(rng)
    G = gen.standard_normal((n, d, k))
    return _qr_fixed(G)


def haar_grassmann(d: int, k: int, rng) -> Subspace:
    """Haar-distributed element of ``G(d, k)``."""
    if k == d:
        return Subspace.full(d)
    return Subspace(haar_bases(1, d, k, rng)[0])


def haar_bases_containing(u: np.ndarray, k: int, rng) -> np.ndarray:
    """Haar ``k``-subspaces containing the unit vectors ``u`` (shape ``(n, d)``).

    Column 0 of each returned basis is ``u`` itself; the remaining ``k - 1``
    columns span a Haar subspace of ``u^perp``.
    """
    u = np.atleast_2d(np.asarray(u, dtype=float))
    n, d = u.shape
    if not 1 <= k <= d:
        raise DomainError(f"containing-variant needs 1 <= k <= d, got k={k}")
    if k == 1:
        return u[:, :, None].copy()
    gen = as_generator(rng)
    G = gen.standard_normal((n, d, k - 1))
    G -= u[:, :, None] * np.einsum("nd,ndk->nk", u, G)[:, None, :]
    Q = _qr_fixed(G)
    # one more pass against u to kill round-off
    Q -= u[:, :, None] * np.einsum("nd,ndk->nk", u, Q)[:, None, :]
    Q = _qr_fixed(Q)
    return np.concatenate([u[:, :, None], Q], axis=2)


def haar_grassmann_containing(u, k: int, rng) -> Subspace:
    u = np.asarray(u, dtype=float)
    nu = np.linalg.norm(u)
    if nu == 0:
        raise DomainError("u must be non-zero")
    return Subspace(haar_bases_containing((u / nu)[None], k, rng)[0])


def haar_bases_inside(U: np.ndarray, k: int, rng) -> np.ndarray:
    """Haar ``k``-subspaces of the subspaces spanned by ``U`` (``(n, d, l)``)."""
    U = np.asarray(U, dtype=float)
    if U.ndim == 2:
        U = U[None]
    n, d, l = U.shape
    if not 0 <= k <= l:
        raise DomainError(f"inside-variant needs 0 <= k <= dim U, got k={k}, dim={l}")
    if k == 0:
        return np.zeros((n, d, 0))
    if k == l:
        return U.copy()
    gen = as_generator(rng)
    G = gen.standard_normal((n, l, k))
    return U @ _qr_fixed(G)


def haar_grassmann_inside(U: Subspace, k: int, rng) -> Subspace:
    return Subspace(haar_bases_inside(U.basis[None], k, rng)[0])


def sphere_points(n: int, basis: np.ndarray, rng) -> np.ndarray:
    """Uniform points on the unit sphere of ``span(basis)``.

    ``basis`` is ``(d, s)`` (shared) or ``(n, d, s)`` (one subspace per point).
    """
    gen = as_generator(rng)
    basis = np.asarray(basis, dtype=float)
    s = basis.shape[-1]
    if s == 0:
        raise DomainError("cannot sample the sphere of the zero subspace")
    g = gen.standard_normal((n, s))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    if basis.ndim == 2:
        return g @ basis.T
    return np.einsum("nds,ns->nd", basis, g)


def sphere_sample(S: Subspace, rng) -> np.ndarray:
    """One uniform unit vector of the subspace ``S``."""
    if S.dim == 0:
        raise DomainError("sphere_sample needs dim(S) >= 1")
    return sphere_points(1, S.basis, rng)[0]


# ---------------------------------------------------------------------------
# rotations
# ---------------------------------------------------------------------------

def rotation_about_axis(u, angle: float) -> Rotation:
    """Proper rotation fixing ``u`` that turns the first completion plane by ``angle``.

    The plane is spanned by the first two vectors of the deterministic
    completion of ``u`` to an orthonormal basis (standard basis vectors are fed
    to Gram-Schmidt in order).
    """
    u = np.asarray(u, dtype=float)
    nu = np.linalg.norm(u)
    if nu == 0:
        raise DomainError("rotation axis must be non-zero")
    d = u.shape[0]
    if d < 2:
        raise DomainError("rotation_about_axis needs d >= 2")
    if d == 2:
        if math.remainder(angle, 2 * math.pi) != 0:
            raise DomainError("in R^2 only the identity fixes a non-zero vector")
        return Rotation(np.eye(2))
    comp = complement_basis((u / nu)[:, None])
    b1, b2 = comp[:, 0], comp[:, 1]
    c, s = math.cos(angle), math.sin(angle)
    R = (
        np.eye(d)
        + (c - 1.0) * (np.outer(b1, b1) + np.outer(b2, b2))
        + s * (np.outer(b2, b1) - np.outer(b1, b2))
    )
    # snap round-off so that R^T R = I to machine precision
    U, _, Vt = np.linalg.svd(R)
    return Rotation(U @ Vt)


def random_rotation(d: int, rng) -> Rotation:
    """Haar-distributed element of ``SO_d``."""
    gen = as_generator(rng)
    Q = _qr_fixed(gen.standard_normal((d, d)))
    if np.linalg.det(Q) < 0:
        Q[:, 0] = -Q[:, 0]
    return Rotation(Q)


def binom(n: int, k: int) -> int:
    if k < 0 or k > n or n < 0:
        return 0
    return math.comb(n, k)


def unit_rows(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return x / np.linalg.norm(x, axis=-1, keepdims=True)


def project_out(vectors: np.ndarray, basis: np.ndarray) -> np.ndarray:
    """Remove the component in ``span(basis)`` from each row vector."""
    if basis.shape[-1] == 0:
        return vectors
    return vectors - (vectors @ basis) @ basis.T


__all__ = [
    "DomainError",
    "RngStream",
    "as_generator",
    "as_stream",
    "sphere_area",
    "ball_volume",
    "orthonormalize",
    "complement_basis",
    "Subspace",
    "Rotation",
    "subspace_det",
    "subspace_det_batch",
    "principal_cosines",
    "haar_bases",
    "haar_grassmann",
    "haar_bases_containing",
    "haar_grassmann_containing",
    "haar_bases_inside",
    "haar_grassmann_inside",
    "sphere_points",
    "sphere_sample",
    "rotation_about_axis",
    "random_rotation",
    "binom",
    "unit_rows",
    "project_out",
]

