"""Closed-form quantities: coupon-collector moments, centerings, normalizations, variances."""

from __future__ import annotations

import enum
import math

import numpy as np

from .primes import FactorizationTable, TableRangeError, compensated_sum

EULER_GAMMA = 0.57721566490153286
ZETA2 = math.pi**2 / 6
ZETA3 = 1.2020569031595942
CESARO_CONSTANT = ZETA3 / ZETA2

# Above this size harmonic numbers come from their asymptotic expansion.
HARMONIC_EXACT_MAX = 1_000_000


class AnalyticsDomainError(ValueError):
    pass


class RegimeLabel(str, enum.Enum):
    CaseA = "CaseA"  # m <= sqrt(n)
    CaseB = "CaseB"  # m > sqrt(n)


def regime(n: int, m: int) -> RegimeLabel:
    return RegimeLabel.CaseA if m * m <= n else RegimeLabel.CaseB


def harmonic(n: int) -> float:
    if n < 0:
        raise AnalyticsDomainError(f"n must be >= 0, got {n}")
    if n <= HARMONIC_EXACT_MAX:
        return compensated_sum(1.0 / np.arange(1, n + 1, dtype=np.float64))
    x = 1.0 / n
    x2 = x * x
    return math.log(n) + EULER_GAMMA + x / 2 - x2 / 12 + x2 * x2 / 120 - x2**3 / 252


def harmonic2(n: int) -> float:
    if n < 0:
        raise AnalyticsDomainError(f"n must be >= 0, got {n}")
    if n <= HARMONIC_EXACT_MAX:
        k = np.arange(1, n + 1, dtype=np.float64)
        return compensated_sum(1.0 / (k * k))
    x = 1.0 / n
    tail = x - x**2 / 2 + x**3 / 6 - x**5 / 30 + x**7 / 42
    return ZETA2 - tail


def _check_tau_args(n: int, m: int) -> None:
    if n < 1 or not 0 <= m <= n:
        raise AnalyticsDomainError(f"need 0 <= m <= n and n >= 1, got n={n}, m={m}")


def expected_tau(n: int, m: int) -> float:
    """E tau(m) = n (H_n - H_{n-m}), summed term by term when m is moderate."""
    _check_tau_args(n, m)
    if m <= HARMONIC_EXACT_MAX:
        i = np.arange(n - m + 1, n + 1, dtype=np.float64)
        return n * compensated_sum(1.0 / i)
    return n * (harmonic(n) - harmonic(n - m))


def variance_tau(n: int, m: int) -> float:
    """Var tau(m) = n^2 (H_{n,2} - H_{n-m,2}) - n (H_n - H_{n-m})."""
    _check_tau_args(n, m)
    if m <= HARMONIC_EXACT_MAX:
        k = np.arange(1, m + 1, dtype=np.float64)
        return compensated_sum(n * (k - 1) / (n - k + 1) ** 2)
    return n * n * (harmonic2(n) - harmonic2(n - m)) - n * (harmonic(n) - harmonic(n - m))


def _primes_to(n: int, t: FactorizationTable) -> np.ndarray:
    if n > t.n_max:
        raise TableRangeError(f"n={n} exceeds table bound {t.n_max}")
    return t.primes_between(1, n)


def centering_c(n: int, y: float, t: FactorizationTable) -> float:
    """c_n(y) = sum_{p<=n} log p (1 - (1 - floor(n/p)/n)^y)."""
    if y < 0:
        raise AnalyticsDomainError(f"y must be >= 0, got {y}")
    ps = _primes_to(n, t)
    x = (n // ps) / n
    return compensated_sum(np.log(ps) * -np.expm1(y * np.log1p(-x)))


def time_changed_argument(n: int, m: int, t_time: float) -> float:
    """-n log(1 - m t / n), the deterministic time change of the subset model."""
    if m * t_time >= n:
        raise AnalyticsDomainError(f"m*t = {m * t_time} must be < n = {n}")
    return -n * math.log1p(-m * t_time / n)


def centering_c_timechanged(n: int, m: int, t_time: float, t: FactorizationTable) -> float:
    return centering_c(n, time_changed_argument(n, m, t_time), t)


def time_change_hypothesis(n: int, m: int) -> bool:
    """Whether m <= n / log n, the growth condition under which the time change is justified."""
    return m <= n / math.log(n)


def _check_norm_args(n: int, m: int) -> None:
    if not 2 <= m < n:
        raise AnalyticsDomainError(f"need 2 <= m < n, got n={n}, m={m}")


def normalization_a(n: int, m: int, case: RegimeLabel | str | None = None) -> tuple[float, RegimeLabel]:
    """Variance normalization of the true model and the regime it was computed for.

    ``case`` overrides the automatic choice (m <= sqrt(n) -> CaseA).
    """
    _check_norm_args(n, m)
    label = regime(n, m) if case is None else RegimeLabel(case)
    lm, ln = math.log(m), math.log(n)
    if label is RegimeLabel.CaseA:
        return 0.5 * m * lm * lm, label
    value = 0.5 * m * (ln - lm) * (3 * lm - ln)
    if value <= 0:
        raise AnalyticsDomainError(f"CaseB normalization nonpositive at n={n}, m={m}")
    return value, label


def normalization_b(n: int, m: int) -> float:
    """Variance normalization of the geometric-multiplicity model."""
    _check_norm_args(n, m)
    return 0.5 * m * (math.log(n) ** 2 - math.log(m) ** 2)


def asymptotic_variance(n: int, m: int, case: RegimeLabel | str | None = None) -> float:
    """Leading-order Var(log U-tilde^(n,m)), i.e. a_n / m."""
    return normalization_a(n, m, case)[0] / m


def multiplicity_tail(n: int, p: int, j: int) -> float:
    """P(p**j divides U^(n)) = floor(n / p**j) / n."""
    return (n // p**j) / n


def exact_mean_log_u_tilde(n: int, m: int, t: FactorizationTable) -> float:
    if not 1 <= m < n:
        raise AnalyticsDomainError(f"need 1 <= m < n, got n={n}, m={m}")
    ps = t.primes_between(m, n) if n <= t.n_max else _primes_to(n, t)
    return compensated_sum(np.log(ps) * (n // ps)) / n


def exact_variance_log_u_tilde(n: int, m: int, t: FactorizationTable) -> float:
    """Exact Var(log U-tilde^(n,m)) for U uniform on [n].

    Single-prime second moment, plus twice the pair term over primes
    m < p < q with pq <= n, minus the squared mean.
    """
    if not 1 <= m < n:
        raise AnalyticsDomainError(f"need 1 <= m < n, got n={n}, m={m}")
    ps = _primes_to(n, t)
    ps = ps[ps > m]
    logs = np.log(ps)
    fl = n // ps
    second = compensated_sum(logs * logs * fl)
    mean_num = compensated_sum(logs * fl)
    pair_terms = []
    for i, p in enumerate(ps):
        if p * p > n:
            break
        hi = np.searchsorted(ps, n // p, side="right")
        qs = ps[i + 1 : hi]
        if qs.size:
            pair_terms.append(logs[i] * compensated_sum(logs[i + 1 : hi] * (n // (p * qs))))
    pair = math.fsum(pair_terms)
    return (second + 2.0 * pair) / n - (mean_num / n) ** 2


def binomial_plus_variance(m: int, theta: float) -> float:
    """Var((Bin(m, theta) - 1)_+)."""
    if m < 1:
        raise AnalyticsDomainError(f"m must be >= 1, got {m}")
    if not 0.0 < theta < 1.0:
        raise AnalyticsDomainError(f"theta must lie in (0, 1), got {theta}")
    s = (1.0 - theta) ** m
    return m * theta * (1 - theta) - 2 * m * theta * s + s * (1 - s)


def expected_log_lcm(n: int, m: int, t: FactorizationTable) -> float:
    """E Y_n(m) = sum_p log p sum_{j>=1} (1 - (1 - floor(n/p^j)/n)^m)."""
    ps = _primes_to(n, t)
    total = []
    pw = ps.copy()
    alive = np.ones(ps.size, dtype=bool)
    while alive.any():
        x = (n // pw[alive]) / n
        total.append(compensated_sum(np.log(ps[alive]) * -np.expm1(m * np.log1p(-x))))
        pw[alive] = pw[alive] * ps[alive]
        alive &= pw <= n
    return math.fsum(total)


def _geometric_max_tails(ps: np.ndarray, m: int):
    """Yield P(max_{k<=m} G_k(p) >= j) for j = 1, 2, ... until negligible."""
    j = 1
    while True:
        tail = -np.expm1(m * np.log1p(-np.power(ps, -float(j))))
        if tail.max() < 1e-300:
            return
        yield j, tail
        j += 1


def expected_y_hat(n: int, m: int, t: FactorizationTable) -> float:
    ps = _primes_to(n, t).astype(np.float64)
    em = sum(tail for _, tail in _geometric_max_tails(ps, m))
    return compensated_sum(np.log(ps) * em)


def variance_y_hat(n: int, m: int, t: FactorizationTable) -> float:
    """Exact Var Y-hat_n(m); primes contribute independently."""
    ps = _primes_to(n, t).astype(np.float64)
    em = np.zeros_like(ps)
    em2 = np.zeros_like(ps)
    for j, tail in _geometric_max_tails(ps, m):
        em += tail
        em2 += (2 * j - 1) * tail
    return compensated_sum(np.log(ps) ** 2 * (em2 - em * em))


def expected_z_hat(n: int, m: int, t: FactorizationTable) -> float:
    """Centering of the geometric model: sum_{p<=n} log p (1 - (1 - 1/p)^m)."""
    ps = _primes_to(n, t).astype(np.float64)
    return compensated_sum(np.log(ps) * -np.expm1(m * np.log1p(-1.0 / ps)))


def variance_z_hat(n: int, m: int, t: FactorizationTable) -> float:
    ps = _primes_to(n, t).astype(np.float64)
    q = -np.expm1(m * np.log1p(-1.0 / ps))
    return compensated_sum(np.log(ps) ** 2 * q * (1 - q))


def log_uniform_central_moment(n: int, r: int) -> float:
    """Exact E(log U^(n) - E log U^(n))^r for U^(n) uniform on [n]."""
    logs = np.log(np.arange(1, n + 1, dtype=np.float64))
    mu = compensated_sum(logs) / n
    return compensated_sum((logs - mu) ** r) / n


def exponential_central_moment(r: int) -> int:
    """E(E_1 - 1)^r for a unit exponential: the derangement number !r."""
    d = [1, 0]
    for k in range(2, r + 1):
        d.append((k - 1) * (d[-1] + d[-2]))
    return d[r]
