"""Empirical laws, Kolmogorov-Smirnov distances and closed-form oracles."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np
from scipy import special

from .errors import DomainError


@dataclass(frozen=True)
class EmpiricalDistribution:
    samples: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.sort(np.asarray(self.samples, dtype=float).ravel())
        if arr.size == 0:
            raise DomainError("empirical distribution needs at least one sample")
        if np.isnan(arr).any():
            raise DomainError("samples contain NaN")
        object.__setattr__(self, "samples", arr)

    @property
    def n(self) -> int:
        return self.samples.size

    def cdf(self, x):
        return np.searchsorted(self.samples, x, side="right") / self.n

    def cdf_left(self, x):
        """``P(X < x)``."""
        return np.searchsorted(self.samples, x, side="left") / self.n

    def survival(self, x):
        return 1.0 - self.cdf(x)

    def quantile(self, q):
        return np.quantile(self.samples, q)

    def mean(self) -> float:
        return float(self.samples.mean())

    def standard_error(self) -> float:
        return float(self.samples.std(ddof=1) / math.sqrt(self.n)) if self.n > 1 else math.inf


@dataclass(frozen=True)
class SurvivalCurve:
    """Continuous law on ``(0, inf)`` given by its survival function ``s -> P(tau > s)``."""

    evaluator: Callable[[np.ndarray], np.ndarray]

    def survival(self, s):
        s = np.asarray(s, dtype=float)
        out = np.ones_like(s)
        pos = s > 0
        if np.any(pos):
            out[pos] = self.evaluator(s[pos])
        return out

    def cdf(self, s):
        return 1.0 - self.survival(s)


def ou_survival(b, s, noise: float = 1.0):
    """``P(tau > s)`` for the OU process ``dU = -U ds + sqrt(noise) dW`` from ``b`` to 0.

    By the reflection symmetry of the process about 0,
    ``P(tau > s) = P_b(U_s > 0) - P_b(U_s < 0)``, and ``U_s`` is Gaussian with
    mean ``b exp(-s)`` and variance ``noise (1 - exp(-2s)) / 2``, giving

        P(tau > s) = erf(b exp(-s) / sqrt(noise (1 - exp(-2s))))
    """
    b = np.asarray(b, dtype=float)
    s = np.asarray(s, dtype=float)
    if np.any(b <= 0) or np.any(s <= 0):
        raise DomainError("ou_survival needs b > 0 and s > 0")
    return special.erf(b * np.exp(-s) / np.sqrt(-noise * np.expm1(-2.0 * s)))


def ou_survival_curve(b: float, noise: float = 1.0) -> SurvivalCurve:
    if b <= 0:
        raise DomainError("b must be positive")
    return SurvivalCurve(lambda s: ou_survival(b, s, noise))


def ou_mean_passage(b: float, noise: float = 1.0) -> float:
    """Mean of the OU passage time from ``b`` to 0, by integrating the survival function."""
    from scipy.integrate import quad

    val, _ = quad(lambda s: float(ou_survival(b, s, noise)), 0.0, np.inf, limit=200)
    return val


def ou_moments(b: float, s: float, noise: float = 1.0) -> tuple[float, float]:
    """Mean and variance of ``U_s`` for the OU process started at ``b``."""
    return b * math.exp(-s), -noise * math.expm1(-2.0 * s) / 2.0


def ks_distance(
    a: EmpiricalDistribution, b: Union[EmpiricalDistribution, SurvivalCurve]
) -> float:
    """Sup-norm distance between ``a``'s ECDF and ``b``'s distribution function.

    Two-sample distances are exact because both ECDFs are step functions
    jumping only at sample points. Against a continuous law the supremum is
    attained at a sample point from the left or the right.
    """
    if not isinstance(a, EmpiricalDistribution):
        a = EmpiricalDistribution(a)
    if isinstance(b, SurvivalCurve):
        pts = np.unique(a.samples)
        target = b.cdf(pts)
        return float(max(np.max(np.abs(a.cdf(pts) - target)), np.max(np.abs(a.cdf_left(pts) - target))))
    if not isinstance(b, EmpiricalDistribution):
        b = EmpiricalDistribution(b)
    pts = np.concatenate([a.samples, b.samples])
    return float(np.max(np.abs(a.cdf(pts) - b.cdf(pts))))


def harmonic_mean_duration(x0: int) -> float:
    """Expected absorption time of a pure-death chain with unit per-capita rate from ``x0``."""
    if x0 < 1:
        raise DomainError("x0 must be at least 1")
    return math.fsum(1.0 / k for k in range(1, int(x0) + 1))


def ks_critical_value(n: int, m: int | None = None, level: float = 0.05) -> float:
    """Asymptotic KS critical value (one-sample if ``m`` is None)."""
    c = math.sqrt(-0.5 * math.log(level / 2.0))
    eff = n if m is None else n * m / (n + m)
    return c / math.sqrt(eff)
