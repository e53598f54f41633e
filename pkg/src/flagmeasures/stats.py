"""Mergeable Monte Carlo accumulators and estimates with standard errors."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Estimate:
    """A value with its standard error and the number of samples behind it."""

    value: float
    se: float = 0.0
    n: int = 0

    def __add__(self, other: "Estimate") -> "Estimate":
        if not isinstance(other, Estimate):
            return Estimate(self.value + float(other), self.se, self.n)
        return Estimate(self.value + other.value, math.hypot(self.se, other.se), self.n + other.n)

    __radd__ = __add__

    def __sub__(self, other: "Estimate") -> "Estimate":
        if not isinstance(other, Estimate):
            return Estimate(self.value - float(other), self.se, self.n)
        return Estimate(self.value - other.value, math.hypot(self.se, other.se), self.n + other.n)

    def scale(self, c: float) -> "Estimate":
        return Estimate(c * self.value, abs(c) * self.se, self.n)

    def __mul__(self, c: float) -> "Estimate":
        return self.scale(float(c))

    __rmul__ = __mul__

    def zscore(self, target: float, extra_se: float = 0.0) -> float:
        s = math.hypot(self.se, extra_se)
        diff = self.value - target
        if s == 0.0:
            return 0.0 if diff == 0.0 else math.copysign(math.inf, diff)
        return diff / s

    def agrees(self, target: float, k: float = 3.0, extra_se: float = 0.0, atol: float = 0.0) -> bool:
        return abs(self.value - target) <= k * math.hypot(self.se, extra_se) + atol

    def as_dict(self) -> dict:
        return {"value": self.value, "se": self.se, "n": self.n}

    def __float__(self) -> float:
        return float(self.value)

    def __repr__(self) -> str:
        return f"{self.value:.10g} +/- {self.se:.3g}"


def combined_z(a: Estimate, b: Estimate) -> float:
    s = math.hypot(a.se, b.se)
    diff = a.value - b.value
    if s == 0.0:
        return 0.0 if diff == 0.0 else math.copysign(math.inf, diff)
    return diff / s


class Accumulator:
    """Running ``(count, sum, sum of squares)`` of one or more value columns.

    Accumulators from disjoint chunks merge associatively with :meth:`merge`,
    which is what the chunked and threaded samplers rely on.
    """

    def __init__(self, width: int = 1):
        self.count = 0
        self.sum = np.zeros(width)
        self.sumsq = np.zeros(width)
        # cross products for covariance between columns
        self.cross = np.zeros((width, width))

    @property
    def width(self) -> int:
        return len(self.sum)

    def add(self, values) -> None:
        v = np.asarray(values, dtype=float)
        if v.ndim == 1:
            v = v[:, None] if self.width == 1 else v[None, :]
        self.count += len(v)
        self.sum += v.sum(axis=0)
        self.sumsq += (v * v).sum(axis=0)
        self.cross += v.T @ v

    def add_zeros(self, n: int) -> None:
        self.count += int(n)

    def merge(self, other: "Accumulator") -> "Accumulator":
        out = Accumulator(self.width)
        out.count = self.count + other.count
        out.sum = self.sum + other.sum
        out.sumsq = self.sumsq + other.sumsq
        out.cross = self.cross + other.cross
        return out

    def mean(self) -> np.ndarray:
        return self.sum / max(self.count, 1)

    def covariance_of_mean(self) -> np.ndarray:
        n = max(self.count, 1)
        m = self.mean()
        cov = self.cross / n - np.outer(m, m)
        if n > 1:
            cov *= n / (n - 1)
        return cov / n

    def estimates(self, scale: float = 1.0) -> list[Estimate]:
        m = self.mean()
        var = np.clip(np.diag(self.covariance_of_mean()), 0.0, None)
        return [Estimate(scale * float(m[i]), abs(scale) * math.sqrt(var[i]), self.count)
                for i in range(self.width)]

    def estimate(self, scale: float = 1.0) -> Estimate:
        return self.estimates(scale)[0]


def mean_estimate(values, scale: float = 1.0) -> Estimate:
    v = np.asarray(values, dtype=float)
    n = len(v)
    if n == 0:
        return Estimate(0.0, 0.0, 0)
    m = float(v.mean())
    se = float(v.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return Estimate(scale * m, abs(scale) * se, n)


def total(estimates) -> Estimate:
    out = Estimate(0.0, 0.0, 0)
    for e in estimates:
        out = out + e
    return out


__all__ = ["Estimate", "Accumulator", "combined_z", "mean_estimate", "total"]
