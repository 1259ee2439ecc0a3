"""Moment summaries and goodness-of-fit statistics used as verdict devices."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import special, stats as _sps


class InsufficientDataError(ValueError):
    pass


class ContractError(ValueError):
    """Inputs that violate a structural contract (e.g. mismatched grids)."""


# One-sided 99.9% significance, used by every statistical acceptance check.
SIGNIFICANCE = 0.001


@dataclass(frozen=True)
class MomentReport:
    count: int
    mean: float
    variance: float  # unbiased
    central3: float
    central4: float
    se_mean: float
    se_variance: float


@dataclass
class MomentAccumulator:
    """Mergeable running central moments (count, mean, M2, M3, M4).

    Blocks are summarized with a two-pass computation and combined with the
    pairwise update formulas of Chan et al. / Pebay, which stay accurate when
    the mean is large relative to the spread.
    """

    count: int = 0
    mean: float = 0.0
    m2: float = 0.0
    m3: float = 0.0
    m4: float = 0.0

    @classmethod
    def of(cls, samples) -> "MomentAccumulator":
        x = np.asarray(samples, dtype=np.float64).ravel()
        if x.size == 0:
            return cls()
        mu = math.fsum(x.tolist()) / x.size
        d = x - mu
        # second-pass correction of the mean
        corr = math.fsum(d.tolist()) / x.size
        mu += corr
        d = d - corr
        d2 = d * d
        return cls(
            count=x.size,
            mean=mu,
            m2=math.fsum(d2.tolist()),
            m3=math.fsum((d2 * d).tolist()),
            m4=math.fsum((d2 * d2).tolist()),
        )

    def merge(self, other: "MomentAccumulator") -> "MomentAccumulator":
        na, nb = self.count, other.count
        if na == 0:
            return MomentAccumulator(other.count, other.mean, other.m2, other.m3, other.m4)
        if nb == 0:
            return MomentAccumulator(self.count, self.mean, self.m2, self.m3, self.m4)
        n = na + nb
        delta = other.mean - self.mean
        d_n = delta / n
        mean = self.mean + nb * d_n
        m2 = self.m2 + other.m2 + delta * d_n * na * nb
        m3 = (
            self.m3
            + other.m3
            + delta * d_n * d_n * na * nb * (na - nb)
            + 3.0 * d_n * (na * other.m2 - nb * self.m2)
        )
        m4 = (
            self.m4
            + other.m4
            + delta * d_n**3 * na * nb * (na * na - na * nb + nb * nb)
            + 6.0 * d_n * d_n * (na * na * other.m2 + nb * nb * self.m2)
            + 4.0 * d_n * (na * other.m3 - nb * self.m3)
        )
        return MomentAccumulator(n, mean, m2, m3, m4)

    def report(self) -> MomentReport:
        n = self.count
        if n < 2:
            raise InsufficientDataError(f"need at least 2 samples, got {n}")
        var = self.m2 / (n - 1)
        c3 = self.m3 / n
        c4 = self.m4 / n
        se_var = math.sqrt(max(c4 - var * var, 0.0) / n)
        return MomentReport(
            count=n,
            mean=self.mean,
            variance=var,
            central3=c3,
            central4=c4,
            se_mean=math.sqrt(var / n),
            se_variance=se_var,
        )


def moment_summary(samples) -> MomentReport:
    return MomentAccumulator.of(samples).report()


def ks_normal(samples) -> float:
    """Kolmogorov-Smirnov distance between the sample and the standard normal."""
    x = np.sort(np.asarray(samples, dtype=np.float64).ravel())
    n = x.size
    if n < 50:
        raise InsufficientDataError(f"need at least 50 samples, got {n}")
    cdf = special.ndtr(x)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - cdf), np.max(cdf - (i - 1) / n)))


def ks_two_sample_critical(n1: int, n2: int, alpha: float = 0.01) -> float:
    """Asymptotic two-sample KS critical value c(alpha) sqrt((n1 + n2) / (n1 n2))."""
    c = math.sqrt(-0.5 * math.log(alpha / 2))
    return c * math.sqrt((n1 + n2) / (n1 * n2))


def ks_two_sample(a, b) -> float:
    return float(_sps.ks_2samp(np.asarray(a), np.asarray(b)).statistic)


def chi_square_uniform(counts) -> float:
    c = np.asarray(counts, dtype=np.float64)
    if c.size < 2:
        raise InsufficientDataError("need at least 2 categories")
    if np.any(c < 0):
        raise InsufficientDataError("counts must be nonnegative")
    expected = c.sum() / c.size
    if expected < 5:
        raise InsufficientDataError(f"expected count per cell {expected:.3g} < 5")
    return float(np.sum((c - expected) ** 2) / expected)


def chi_square_critical(df: int, level: float = 1 - SIGNIFICANCE) -> float:
    return float(_sps.chi2.ppf(level, df))


@dataclass(frozen=True)
class CovarianceReport:
    grid: tuple[float, ...]
    empirical: np.ndarray
    target: np.ndarray
    max_abs_deviation: float


def covariance_from_values(values, grid: Sequence[float], normalization: float) -> CovarianceReport:
    """Covariance across replicas (rows) of ``values / sqrt(normalization)`` against min(s, t)."""
    v = np.asarray(values, dtype=np.float64)
    g = tuple(float(x) for x in grid)
    if v.ndim != 2 or v.shape[1] != len(g):
        raise ContractError(f"values shape {v.shape} does not match grid of length {len(g)}")
    if v.shape[0] < 2:
        raise InsufficientDataError("need at least 2 replicas")
    x = v / math.sqrt(normalization)
    d = x - x.mean(axis=0)
    emp = d.T @ d / (x.shape[0] - 1)
    emp = 0.5 * (emp + emp.T)
    target = np.minimum.outer(np.array(g), np.array(g))
    return CovarianceReport(g, emp, target, float(np.max(np.abs(emp - target))))


def covariance_check(replicas, normalization: float, min_replicas: int = 1000) -> CovarianceReport:
    """Empirical covariance of normalized process replicas versus Brownian min(s, t).

    ``replicas`` is a sequence of ProcessSample sharing grid and meta. The
    normalization is applied as division by its square root; centering is by
    the sample mean, which covariance ignores anyway.
    """
    replicas = list(replicas)
    if len(replicas) < min_replicas:
        raise InsufficientDataError(f"need at least {min_replicas} replicas, got {len(replicas)}")
    grid, meta = replicas[0].grid, replicas[0].meta
    for r in replicas:
        if r.grid != grid or r.meta != meta:
            raise ContractError("replicas do not share grid and meta")
    return covariance_from_values(np.stack([r.values for r in replicas]), grid, normalization)
