"""Test functions on flag manifolds and on the normal-flag bundle.

A :class:`FlagFunction` maps a batch of flags ``(u, L)`` to reals. Flags are
passed as ``u`` with shape ``(n, d)`` and ``B`` with shape ``(n, d, q)`` whose
columns are an orthonormal basis of ``L``. Whether ``u`` lies in ``L`` (the
manifold ``F(d, q)``) or is orthogonal to it (``F^perp(d, q)``) depends on
the measure the function is integrated against.

A :class:`TripleFunction` additionally receives the body point ``x``; it is
the integrand type for the flag support measures.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..euclid import Rotation, Subspace, as_generator, haar_bases, haar_bases_containing


def _batch_flag(u, L) -> tuple[np.ndarray, np.ndarray, bool]:
    u = np.asarray(u, dtype=float)
    if isinstance(L, Subspace):
        L = L.basis
    B = np.asarray(L, dtype=float)
    single = u.ndim == 1
    if single:
        u = u[None]
    if B.ndim == 2:
        B = np.broadcast_to(B, (len(u),) + B.shape)
    return u, B, single


def _rotate_args(M: np.ndarray, u: np.ndarray, B: np.ndarray):
    # theta^{-1} acting on rows u and bases B
    return u @ M, np.einsum("ji,njq->niq", M, B)


@dataclass(frozen=True, eq=False)
class FlagFunction:
    """A bounded function of a flag ``(u, L)``.

    ``fn(u, B)`` is vectorised. Stochastic functions (Monte Carlo transforms)
    also carry ``error(u, B)``, the standard error of each returned value.
    """

    fn: Callable[[np.ndarray, np.ndarray], np.ndarray]
    name: str = "f"
    smoothness: str = "continuous"
    stochastic: bool = False
    error: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = field(default=None, repr=False)

    def evaluate(self, u: np.ndarray, B: np.ndarray) -> np.ndarray:
        return np.asarray(self.fn(u, B), dtype=float).reshape(len(u))

    def evaluate_with_error(self, u: np.ndarray, B: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        vals = self.evaluate(u, B)
        if self.error is None:
            return vals, np.zeros_like(vals)
        return vals, np.asarray(self.error(u, B), dtype=float).reshape(len(u))

    def __call__(self, u, L):
        U, B, single = _batch_flag(u, L)
        out = self.evaluate(U, B)
        return float(out[0]) if single else out

    def rotated(self, R: Rotation) -> "FlagFunction":
        """``(theta f)(u, L) = f(theta^{-1} u, theta^{-1} L)``."""
        M = R.matrix
        base = self

        def fn(u, B):
            return base.evaluate(*_rotate_args(M, u, B))

        err = None
        if self.error is not None:
            def err(u, B):
                return base.error(*_rotate_args(M, u, B))

        return FlagFunction(fn, f"rot({self.name})", self.smoothness, self.stochastic, err)

    def probe_bounds(self, d: int, q: int, n: int = 10_000, rng=None, contains: bool = True) -> tuple[float, float]:
        """Min and max over ``n`` random flags (``u in L`` if ``contains`` else ``u perp L``)."""
        gen = as_generator(rng)
        if contains:
            g = gen.standard_normal((n, d))
            u = g / np.linalg.norm(g, axis=1, keepdims=True)
            B = haar_bases_containing(u, q, gen)
        else:
            F = haar_bases(n, d, min(d, q + 1), gen)
            u, B = F[:, :, q], F[:, :, :q]
        vals = self.evaluate(u, B)
        return float(vals.min()), float(vals.max())

    def __add__(self, other: "FlagFunction") -> "FlagFunction":
        a, b = self, other
        return FlagFunction(lambda u, B: a.evaluate(u, B) + b.evaluate(u, B), f"{a.name}+{b.name}",
                            "continuous", a.stochastic or b.stochastic)

    def scaled(self, c: float) -> "FlagFunction":
        a = self
        err = None if a.error is None else (lambda u, B: abs(c) * a.error(u, B))
        return FlagFunction(lambda u, B: c * a.evaluate(u, B), f"{c}*{a.name}", a.smoothness, a.stochastic, err)


@dataclass(frozen=True, eq=False)
class TripleFunction:
    """A function of ``(x, u, L)`` on ``R^d x F^perp(d, k)``."""

    fn: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]
    name: str = "g"
    indicator: bool = False

    def evaluate(self, x: np.ndarray, u: np.ndarray, B: np.ndarray) -> np.ndarray:
        return np.asarray(self.fn(x, u, B), dtype=float).reshape(len(u))

    def __call__(self, x, u, L):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        U, B, single = _batch_flag(u, L)
        out = self.evaluate(x, U, B)
        return float(out[0]) if single else out

    def rotated(self, R: Rotation) -> "TripleFunction":
        M = R.matrix
        base = self

        def fn(x, u, B):
            u2, B2 = _rotate_args(M, u, B)
            return base.evaluate(x @ M, u2, B2)

        return TripleFunction(fn, f"rot({self.name})", self.indicator)


def constant(c: float = 1.0) -> FlagFunction:
    return FlagFunction(lambda u, B: np.full(len(u), float(c)), f"const({c:g})", "analytic")


def constant_triple(c: float = 1.0) -> TripleFunction:
    return TripleFunction(lambda x, u, B: np.full(len(u), float(c)), f"const({c:g})")


def of_direction(g: Callable[[np.ndarray], np.ndarray], name: str = "g(u)") -> FlagFunction:
    """Lift a function of the unit normal alone to a flag function (ignores ``L``)."""
    return FlagFunction(lambda u, B: g(u), name, "continuous")


def lift(f: FlagFunction) -> TripleFunction:
    """Flag function viewed as a function of ``(x, u, L)`` that ignores ``x``."""
    return TripleFunction(lambda x, u, B: f.evaluate(u, B), f.name)


def spatial(h: Callable[[np.ndarray], np.ndarray], name: str = "h(x)", indicator: bool = False) -> TripleFunction:
    """Function of the body point only (curvature-measure integrands)."""
    return TripleFunction(lambda x, u, B: h(x), name, indicator)


def coordinate(i: int) -> FlagFunction:
    return FlagFunction(lambda u, B: u[:, i], f"u_{i}", "analytic")


def det_squared_to(fixed: Subspace) -> FlagFunction:
    """``(u, L) -> |<L, fixed>|^2``."""
    F = fixed.basis

    def fn(u, B):
        from ..euclid import subspace_det_batch

        return subspace_det_batch(B, np.broadcast_to(F, (len(u),) + F.shape)) ** 2

    return FlagFunction(fn, "det2", "analytic")


def cap_indicator(center, cos_radius: float) -> FlagFunction:
    """Indicator of the spherical cap ``<u, center> >= cos_radius``."""
    c = np.asarray(center, dtype=float)
    c = c / np.linalg.norm(c)
    return FlagFunction(lambda u, B: (u @ c >= cos_radius).astype(float), "cap", "discontinuous")


__all__ = [
    "FlagFunction",
    "TripleFunction",
    "constant",
    "constant_triple",
    "of_direction",
    "lift",
    "spatial",
    "coordinate",
    "det_squared_to",
    "cap_indicator",
]
