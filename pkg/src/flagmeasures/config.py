"""Central numerical tolerances and default Monte Carlo budgets.

Every module reads its thresholds from :data:`TOL` and :data:`DEFAULTS`, so a
single place controls them. A few values can be overridden from the
environment (see :func:`_env_float`).
"""

from __future__ import annotations

import os
from dataclasses import dataclass, replace


def _env_float(name: str, default: float) -> float:
    raw = os.environ.get(name)
    return float(raw) if raw else default


def _env_int(name: str, default: int) -> int:
    raw = os.environ.get(name)
    return int(raw) if raw else default


@dataclass(frozen=True)
class Tolerances:
    orthogonality: float = 1e-12
    rank: float = 1e-10
    geometric: float = 1e-9
    intersect: float = 1e-12
    general_position: float = 1e-9
    ill_conditioned: float = 1e6


@dataclass(frozen=True)
class Defaults:
    seed: int = 20240917
    samples_per_cone: int = 100_000
    flats_per_eps: int = 1_000_000
    chunk: int = 200_000
    quad_limit: int = 20_000
    quad_epsabs: float = 1e-12
    exact_apex_max: int = 2
    threads: int = 1


TOL = Tolerances(
    geometric=_env_float("FLAGMEASURES_TOL_GEOMETRIC", 1e-9),
)
DEFAULTS = Defaults(
    seed=_env_int("FLAGMEASURES_SEED", 20240917),
    threads=_env_int("FLAGMEASURES_THREADS", 1),
)


def default_seed() -> int:
    """Seed used when a command is run without ``--seed``."""
    return _env_int("FLAGMEASURES_SEED", DEFAULTS.seed)


__all__ = ["TOL", "DEFAULTS", "Tolerances", "Defaults", "default_seed", "replace"]
