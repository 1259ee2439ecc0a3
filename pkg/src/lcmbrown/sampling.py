"""Random draws: uniform integers, coupon-collector paths, geometric variables.

Every sampler takes a ``numpy.random.Generator``. Reproducible generators come
from :func:`seeded_rng`, which keys a counter-based Philox stream on
``(seed, stream)``; experiment code hands out one stream per replica block.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats as _sps

from .primes import FactorizationTable


class SamplingDomainError(ValueError):
    """Sampler called outside its parameter domain."""


def seeded_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Independent, reproducible generator for the pair ``(seed, stream)``."""
    ss = np.random.SeedSequence(entropy=int(seed) & (2**64 - 1), spawn_key=(int(stream),))
    return np.random.Generator(np.random.Philox(ss))


def _check_nm(n: int, m: int, clamp: bool) -> int:
    if n < 1:
        raise SamplingDomainError(f"n must be >= 1, got {n}")
    if m < 1:
        raise SamplingDomainError(f"m must be >= 1, got {m}")
    if m > n:
        if not clamp:
            raise SamplingDomainError(f"m={m} exceeds n={n} (pass clamp=True to saturate at n)")
        return n
    return m


def sample_uniform(n: int, rng: np.random.Generator, size=None):
    """Uniform draw(s) from {1, ..., n}."""
    if n < 1:
        raise SamplingDomainError(f"n must be >= 1, got {n}")
    return rng.integers(1, n, size=size, endpoint=True)


@dataclass(frozen=True)
class CouponPath:
    n: int
    m: int
    draws: np.ndarray
    stop_times: np.ndarray  # 1-based: tau(1), ..., tau(m)

    def subset(self, k: int | None = None) -> frozenset[int]:
        """Distinct values among the first tau(k) draws (default k = m)."""
        k = self.m if k is None else k
        return frozenset(self.draws[self.stop_times[:k] - 1].tolist())


@dataclass(frozen=True)
class CouponBatch:
    """Several independent coupon paths stored as a padded matrix.

    Row ``r`` is meaningful up to column ``stop_times[r, -1] - 1``; later
    columns are further iid draws from the same sequence.
    """

    n: int
    m: int
    draws: np.ndarray
    stop_times: np.ndarray  # shape (rows, m), 1-based


def _first_occurrences(draws: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    rows, width = draws.shape
    keys = np.arange(rows, dtype=np.int64)[:, None] * (n + 1) + draws
    _, first = np.unique(keys.ravel(), return_index=True)
    first.sort()
    return first // width, first % width


def sample_coupon_batch(n: int, m: int, rng: np.random.Generator, rows: int, clamp: bool = False) -> CouponBatch:
    """``rows`` independent coupon paths run until ``m`` distinct values appear."""
    m = _check_nm(n, m, clamp)
    mean = n * (math.fsum(1.0 / i for i in range(n - m + 1, n + 1)))
    var = math.fsum(n * (k - 1) / (n - k + 1) ** 2 for k in range(1, m + 1))
    width = int(mean + 6.0 * math.sqrt(var)) + 8
    draws = rng.integers(1, n, size=(rows, width), endpoint=True)
    while True:
        row_of, pos = _first_occurrences(draws, n)
        counts = np.bincount(row_of, minlength=rows)
        if counts.min() >= m:
            break
        extra = rng.integers(1, n, size=(rows, width), endpoint=True)
        draws = np.concatenate([draws, extra], axis=1)
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
    stop = pos[starts[:, None] + np.arange(m)[None, :]] + 1
    return CouponBatch(n=n, m=m, draws=draws, stop_times=stop)


def sample_coupon_path(n: int, m: int, rng: np.random.Generator, clamp: bool = False) -> CouponPath:
    batch = sample_coupon_batch(n, m, rng, rows=1, clamp=clamp)
    stop = batch.stop_times[0]
    return CouponPath(n=n, m=batch.m, draws=batch.draws[0, : stop[-1]].copy(), stop_times=stop)


def sample_subset(n: int, m: int, rng: np.random.Generator, clamp: bool = False) -> frozenset[int]:
    """Uniform m-subset of [n], read off a coupon path."""
    return sample_coupon_path(n, m, rng, clamp=clamp).subset()


def sample_tau_geometric(n: int, m: int, rng: np.random.Generator, size=None, clamp: bool = False):
    """tau(m) as a sum of independent geometric waiting times."""
    m = _check_nm(n, m, clamp)
    succ = 1.0 - np.arange(m) / n
    shape = (m,) if size is None else (int(np.prod(size)), m)
    x = rng.geometric(np.broadcast_to(succ, shape))
    tau = x.sum(axis=-1)
    return int(tau) if size is None else tau.reshape(size)


def sample_geometric(p: float, rng: np.random.Generator, size=None):
    """Geometric variable on {0, 1, ...} with P(G >= j) = p**(-j).

    Inversion: G = floor(-log U / log p) with U uniform on (0, 1].
    """
    if p < 2:
        raise SamplingDomainError(f"p must be >= 2, got {p}")
    u = 1.0 - rng.random(size)
    g = np.floor(-np.log(u) / math.log(p)).astype(np.int64)
    return int(g) if size is None else g


def sparse_bernoulli(prob: np.ndarray, rows: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Successes of independent Bernoulli(prob[c]) trials for every (row, column).

    Returns ``(row, column)`` index arrays. Columns are processed in dyadic
    blocks; blocks with small probabilities are sampled by geometric skipping
    at the block maximum and thinned, so the cost scales with the number of
    successes rather than ``rows * len(prob)``.
    """
    prob = np.asarray(prob, dtype=np.float64)
    out_r, out_c = [], []
    start = 0
    while start < prob.size:
        stop = min(prob.size, 2 * start + 1)
        blk = prob[start:stop]
        width = stop - start
        qmax = float(blk.max())
        if qmax >= 0.1:
            r, c = np.nonzero(rng.random((rows, width)) < blk)
        elif qmax > 0.0:
            total = rows * width
            expect = total * qmax
            chunk = int(expect + 6.0 * math.sqrt(expect)) + 16
            pos = np.cumsum(rng.geometric(qmax, size=chunk)) - 1
            while pos[-1] < total:
                more = np.cumsum(rng.geometric(qmax, size=chunk)) + pos[-1]
                pos = np.concatenate([pos, more])
            pos = pos[pos < total]
            c = pos % width
            keep = rng.random(pos.size) * qmax < blk[c]
            r, c = pos[keep] // width, c[keep]
        else:
            r = c = np.zeros(0, dtype=np.int64)
        out_r.append(r)
        out_c.append(c + start)
        start = stop
    return np.concatenate(out_r).astype(np.int64), np.concatenate(out_c).astype(np.int64)


def _max_geom_tail(p: np.ndarray, j: int, k: int) -> np.ndarray:
    """P(max of k iid G(p) >= j) = 1 - (1 - p**-j)**k."""
    return -np.expm1(k * np.log1p(-np.power(p, -float(j))))


def sample_geometric_maxima(primes: np.ndarray, k: int, rng: np.random.Generator, rows: int):
    """Nonzero values of max_{i<=k} G_i(p) for each prime and each of ``rows`` replicas.

    Returns ``(row, prime_index, level)``; absent pairs have maximum 0.
    """
    ps = np.asarray(primes, dtype=np.float64)
    if k <= 0:
        z = np.zeros(0, dtype=np.int64)
        return z, z.copy(), z.copy()
    t1 = _max_geom_tail(ps, 1, k)
    r, c = sparse_bernoulli(t1, rows, rng)
    level = np.ones(r.size, dtype=np.int64)
    v = rng.random(r.size) * t1[c]
    active = np.arange(r.size)
    j = 2
    while active.size:
        hit = v[active] < _max_geom_tail(ps[c[active]], j, k)
        active = active[hit]
        level[active] += 1
        j += 1
    return r, c, level


@dataclass(frozen=True)
class FixedMLimitDraws:
    values: np.ndarray
    m: int
    p_max: int  # primes above this cutoff are omitted from the series


def sample_fixed_m_limit(
    m: int, p_max: int, rng: np.random.Generator, t: FactorizationTable, size: int = 1
) -> FixedMLimitDraws:
    """Draws of sum_j log U_j + sum_{p <= p_max} log p (max_k G_k(p) - sum_k G_k(p)).

    Only primes where at least two of the m copies are nonzero contribute to
    the prime series; those are located by sparse sampling of
    Binomial(m, 1/p) >= 2, and the nonzero copies are 1 + G'(p) by memorylessness.
    """
    if m < 1:
        raise SamplingDomainError(f"m must be >= 1, got {m}")
    if p_max < 2:
        raise SamplingDomainError(f"p_max must be >= 2, got {p_max}")
    values = np.log1p(-rng.random((size, m))).sum(axis=1)
    if m >= 2:
        ps = t.primes_between(1, p_max).astype(np.float64)
        x = 1.0 / ps
        r2 = _sps.binom.sf(1, m, x)
        rows, cols = sparse_bernoulli(r2, size, rng)
        xs = x[cols]
        cnt = np.full(rows.size, 2, dtype=np.int64)
        v = rng.random(rows.size) * r2[cols]
        active = np.arange(rows.size)
        for j in range(3, m + 1):
            if not active.size:
                break
            hit = v[active] < _sps.binom.sf(j - 1, m, xs[active])
            active = active[hit]
            cnt[active] += 1
        owner = np.repeat(np.arange(rows.size), cnt)
        logp_each = np.log(ps[cols])
        g = 1 + np.floor(np.log1p(-rng.random(owner.size)) / -logp_each[owner]).astype(np.int64)
        gmax = np.zeros(rows.size, dtype=np.int64)
        np.maximum.at(gmax, owner, g)
        gsum = np.bincount(owner, weights=g, minlength=rows.size)
        contrib = logp_each * (gmax - gsum)
        values = values + np.bincount(rows, weights=contrib, minlength=size)
    return FixedMLimitDraws(values=values, m=m, p_max=int(p_max))
