"""Smallest-prime-factor sieve and the prime sums built on it."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# uint32 entries: 4 bytes per integer, so the bound below caps the table at ~1.6 GB.
MAX_TABLE_N = 400_000_000


class TableRangeError(ValueError):
    """An argument falls outside the range covered by a factorization table."""


class TableSizeError(ValueError):
    """A requested table bound is below 2 or above MAX_TABLE_N."""


def _sieve_spf(n_max: int) -> np.ndarray:
    spf = np.zeros(n_max + 1, dtype=np.uint32)
    spf[2::2] = 2
    for p in range(3, math.isqrt(n_max) + 1, 2):
        if spf[p]:
            continue
        spf[p] = p
        seg = spf[p * p :: 2 * p]
        seg[seg == 0] = p
    rest = np.flatnonzero(spf == 0)
    rest = rest[rest >= 2]
    spf[rest] = rest.astype(np.uint32)
    return spf


@dataclass(frozen=True)
class FactorizationTable:
    """Smallest prime factor of every integer in 2..n_max.

    ``spf[0]`` and ``spf[1]`` are 0. The table is never mutated after
    construction, so one instance can be shared between worker threads.
    """

    n_max: int
    spf: np.ndarray = field(repr=False)
    _primes: np.ndarray = field(repr=False, compare=False)

    def primes(self) -> np.ndarray:
        """All primes <= n_max, ascending (read-only view)."""
        return self._primes

    def primes_between(self, lo: float, hi: float) -> np.ndarray:
        """Primes p with lo < p <= hi."""
        ps = self._primes
        return ps[np.searchsorted(ps, lo, side="right") : np.searchsorted(ps, hi, side="right")]

    def is_prime(self, k: int) -> bool:
        return 2 <= k <= self.n_max and int(self.spf[k]) == k


def build_table(n_max: int) -> FactorizationTable:
    """Sieve smallest prime factors up to ``n_max`` (at most MAX_TABLE_N)."""
    n_max = int(n_max)
    if n_max < 2:
        raise TableSizeError(f"table bound must be >= 2, got {n_max}")
    if n_max > MAX_TABLE_N:
        need_mb = 4 * (n_max + 1) / 2**20
        raise TableSizeError(
            f"table bound {n_max} exceeds MAX_TABLE_N={MAX_TABLE_N} (would need ~{need_mb:.0f} MiB)"
        )
    spf = _sieve_spf(n_max)
    primes = np.flatnonzero(spf == np.arange(n_max + 1, dtype=np.uint32)).astype(np.int64)
    primes = primes[primes >= 2]
    spf.flags.writeable = False
    primes.flags.writeable = False
    return FactorizationTable(n_max=n_max, spf=spf, _primes=primes)


def _check_range(k: int, t: FactorizationTable, lo: int = 2) -> None:
    if not lo <= k <= t.n_max:
        raise TableRangeError(f"{k} outside table range {lo}..{t.n_max}")


def factorize(k: int, t: FactorizationTable) -> dict[int, int]:
    """Prime -> exponent map of ``k``, e.g. ``factorize(360) == {2: 3, 3: 2, 5: 1}``."""
    k = int(k)
    _check_range(k, t)
    exps: dict[int, int] = {}
    spf = t.spf
    while k > 1:
        p = int(spf[k])
        e = 0
        while k % p == 0:
            k //= p
            e += 1
        exps[p] = e
    return exps


def reconstruct(exps: dict[int, int]) -> int:
    return math.prod(p**e for p, e in exps.items())


def primes_up_to(x: int, t: FactorizationTable) -> list[int]:
    x = int(x)
    if x < 0 or x > t.n_max:
        raise TableRangeError(f"{x} outside table range 0..{t.n_max}")
    ps = t.primes()
    return ps[: np.searchsorted(ps, x, side="right")].tolist()


def prime_count(x: float, t: FactorizationTable) -> int:
    if x > t.n_max:
        raise TableRangeError(f"{x} outside table range 0..{t.n_max}")
    return int(np.searchsorted(t.primes(), x, side="right"))


def compensated_sum(values) -> float:
    """Correctly rounded sum of a float array (``math.fsum``)."""
    return math.fsum(np.asarray(values, dtype=np.float64).ravel().tolist())


def mertens_log_sum(x: int, a: int, t: FactorizationTable) -> float:
    """Sum over primes p <= x of (log p)**a / p."""
    x = int(x)
    if not 2 <= x <= t.n_max:
        raise TableRangeError(f"{x} outside table range 2..{t.n_max}")
    if a not in (1, 2, 3, 4):
        raise ValueError(f"exponent a must be in 1..4, got {a}")
    ps = t.primes()[: np.searchsorted(t.primes(), x, side="right")].astype(np.float64)
    return compensated_sum(np.log(ps) ** a / ps)


def prime_power_events(values: np.ndarray, t: FactorizationTable) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Expand integers into the prime powers dividing them.

    For each ``values[i] = prod p**e`` emits the ``e`` entries ``p, p**2, ..., p**e``.
    Returns ``(index, prime_power, prime)`` arrays, where ``index`` points back
    into ``values``. Entries equal to 1 contribute nothing.

    Since log lcm(S) is the sum of log p over the distinct prime powers that
    divide some element of S, this is the workhorse of the vectorized
    log-lcm evaluation.
    """
    vals = np.asarray(values, dtype=np.int64).ravel()
    if vals.size and (vals.min() < 1 or vals.max() > t.n_max):
        raise TableRangeError(f"values must lie in 1..{t.n_max}")
    idx_parts, pw_parts, p_parts = [], [], []
    idx = np.flatnonzero(vals > 1)
    rem = vals[idx]
    prev = np.zeros_like(rem)
    pw = np.ones_like(rem)
    spf = t.spf
    while idx.size:
        p = spf[rem].astype(np.int64)
        pw = np.where(p == prev, pw * p, p)
        idx_parts.append(idx)
        pw_parts.append(pw)
        p_parts.append(p)
        rem = rem // p
        keep = rem > 1
        idx, rem, prev, pw = idx[keep], rem[keep], p[keep], pw[keep]
    if not idx_parts:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty.copy(), empty.copy()
    return np.concatenate(idx_parts), np.concatenate(pw_parts), np.concatenate(p_parts)
