"""Translation-invariant continuous valuations given by flag functions.

A :class:`Valuation` of degree ``j`` is represented by the function it
integrates: a flag function on ``F(d, d - j)`` against ``tau_j``
(flag-continuous), a flag function against ``psi_j`` (strongly
flag-continuous), or a function of the normal alone against ``S_j``
(strongly continuous).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from ..euclid import DomainError, binom
from ..polytope import Polytope
from ..stats import Estimate
from .functions import FlagFunction, lift, of_direction
from .measures import flag_area_measure, integrate, tau
from .transform import psi_integrate

MODES = ("flag_continuous", "strongly_flag_continuous", "strongly_continuous")


@dataclass(frozen=True, eq=False)
class Valuation:
    """Degree, mode and the defining function.

    For ``strongly_continuous`` the function may be a plain callable of
    ``u`` with shape ``(n, d)``; it is wrapped with :func:`of_direction`.
    """

    degree: int
    mode: str
    function: Union[FlagFunction, Callable[[np.ndarray], np.ndarray]]

    def __post_init__(self):
        if self.mode not in MODES:
            raise DomainError(f"unknown valuation mode {self.mode!r}")
        if self.mode != "strongly_continuous" and not isinstance(self.function, FlagFunction):
            raise DomainError(f"mode {self.mode} needs a FlagFunction")

    @property
    def flag_function(self) -> FlagFunction:
        if isinstance(self.function, FlagFunction):
            return self.function
        return of_direction(self.function, getattr(self.function, "__name__", "f(u)"))

    def rotated(self, R) -> "Valuation":
        return Valuation(self.degree, self.mode, self.flag_function.rotated(R))


def evaluate_valuation(P: Polytope, phi: Valuation, N: int | None = None, rng=None, *,
                       route: str = "tau", N_inner: int | None = None,
                       threads: int | None = None) -> Estimate:
    """``phi(P)`` with a standard error.

    ``route`` only matters for strongly continuous valuations: ``"tau"``
    integrates the direction function against the ``u``-marginal of
    ``tau_j``; ``"theta"`` uses the flag area measure ``S^(0)_j``, an
    independent Monte Carlo route through the support-measure sampler.
    """
    d = P.ambient
    j = phi.degree
    if not 1 <= j <= d - 2:
        raise DomainError(f"valuation degree must lie in 1..{d - 2}, got {j}")
    f = phi.flag_function
    if phi.mode == "flag_continuous":
        return integrate(tau(P, j), f, N, rng, threads=threads)
    if phi.mode == "strongly_flag_continuous":
        return psi_integrate(P, j, f, 10_000 if N is None else N, rng, N_inner=N_inner, threads=threads)
    if route == "tau":
        return integrate(tau(P, j), f, N, rng, threads=threads)
    if route == "theta":
        est = integrate(flag_area_measure(P, 0, j), lift(f), N, rng, threads=threads)
        return est.scale(binom(d - 1, j))
    raise DomainError(f"unknown route {route!r}")


__all__ = ["Valuation", "evaluate_valuation", "MODES"]
