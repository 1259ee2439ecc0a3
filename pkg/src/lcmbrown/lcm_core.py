"""Log-lcm functionals of iid uniform samples and of the geometric model.

A sample's log lcm equals the sum of ``log p`` over the distinct prime powers
``p**j`` dividing at least one of its elements. All process evaluations below
reduce to finding, per replica and per prime power, the first position at which
it shows up, and then summing ``log p`` over everything seen before each cutoff.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .primes import FactorizationTable, TableRangeError, factorize, prime_power_events
from .sampling import sample_coupon_batch, sample_geometric_maxima, sample_uniform


class GridError(ValueError):
    """Negative or unsorted evaluation grid."""


@dataclass
class LcmAccumulator:
    """Running lcm of absorbed integers, stored as prime -> max exponent."""

    table: FactorizationTable
    exps: dict[int, int] = field(default_factory=dict)
    count: int = 0

    def absorb(self, k: int) -> None:
        if k != 1:
            for p, e in factorize(k, self.table).items():
                if e > self.exps.get(p, 0):
                    self.exps[p] = e
        self.count += 1

    def log_value(self) -> float:
        return math.fsum(e * math.log(p) for p, e in self.exps.items())


def log_lcm(values: Sequence[int], t: FactorizationTable) -> float:
    """log lcm of a finite collection of positive integers; the empty lcm is 1."""
    acc = LcmAccumulator(t)
    for k in values:
        acc.absorb(int(k))
    return acc.log_value()


@dataclass(frozen=True)
class ProcessSample:
    """One replica of a process evaluated on a time grid."""

    grid: tuple[float, ...]
    values: np.ndarray
    meta: dict


@dataclass(frozen=True)
class ProcessBatch:
    """Many replicas on a shared grid; ``values`` has shape (replicas, len(grid))."""

    grid: tuple[float, ...]
    values: np.ndarray
    meta: dict

    def samples(self) -> list[ProcessSample]:
        return [ProcessSample(self.grid, row, self.meta) for row in self.values]


def check_grid(grid: Sequence[float]) -> tuple[float, ...]:
    g = tuple(float(x) for x in grid)
    if not g:
        raise GridError("grid must be nonempty")
    if any(x < 0 for x in g):
        raise GridError(f"grid times must be nonnegative, got {g}")
    if any(b < a for a, b in zip(g, g[1:])):
        raise GridError(f"grid must be ascending, got {g}")
    return g


def grid_counts(m: float, grid: Sequence[float]) -> np.ndarray:
    """floor(m * t) for each grid time."""
    return np.array([math.floor(m * x) for x in grid], dtype=np.int64)


def _accumulate_first_hits(row, key, pos, weight_of_key, cutoffs, rows: int) -> np.ndarray:
    """Sum weights of distinct (row, key) pairs whose earliest position precedes each cutoff.

    ``cutoffs`` is either shape (G,) shared by all rows or (rows, G); each row of
    cutoffs must be nondecreasing. An event at position ``pos`` counts toward
    every cutoff ``c`` with ``pos < c``.
    """
    cutoffs = np.asarray(cutoffs, dtype=np.int64)
    G = cutoffs.shape[-1]
    if row.size == 0:
        return np.zeros((rows, G))
    span = int(pos.max()) + 1
    kspan = int(key.max()) + 1
    ck = (row * kspan + key) * span + pos
    ck.sort()
    rk = ck // span
    first = np.ones(ck.size, dtype=bool)
    first[1:] = rk[1:] != rk[:-1]
    rk = rk[first]
    pos = ck[first] % span
    row = rk // kspan
    w = weight_of_key(rk % kspan)
    if cutoffs.ndim == 1:
        gstar = np.searchsorted(cutoffs, pos, side="right")
    else:
        gstar = (cutoffs[row] <= pos[:, None]).sum(axis=1)
    binned = np.bincount(row * (G + 1) + gstar, weights=w, minlength=rows * (G + 1))
    return np.cumsum(binned.reshape(rows, G + 1)[:, :G], axis=1)


def prefix_log_lcm(draws: np.ndarray, cutoffs, t: FactorizationTable, indicator: bool = False) -> np.ndarray:
    """log lcm of ``draws[r, :c]`` for each row r and each cutoff c.

    With ``indicator=True`` every exponent is capped at 1 (log of the radical of
    the prefix lcm), which is the process Z.
    """
    draws = np.atleast_2d(np.asarray(draws, dtype=np.int64))
    rows, width = draws.shape
    idx, pw, p = prime_power_events(draws, t)
    if indicator:
        keep = pw == p
        idx, pw = idx[keep], pw[keep]
    spf = t.spf
    return _accumulate_first_hits(
        idx // width, pw, idx % width, lambda k: np.log(spf[k].astype(np.float64)), cutoffs, rows
    )


def paired_y_z(draws: np.ndarray, cutoffs, t: FactorizationTable) -> tuple[np.ndarray, np.ndarray]:
    """Y and Z evaluated on the same draws (common random numbers)."""
    draws = np.atleast_2d(np.asarray(draws, dtype=np.int64))
    rows, width = draws.shape
    idx, pw, p = prime_power_events(draws, t)
    logp = lambda k: np.log(t.spf[k].astype(np.float64))  # noqa: E731
    y = _accumulate_first_hits(idx // width, pw, idx % width, logp, cutoffs, rows)
    keep = pw == p
    z = _accumulate_first_hits(idx[keep] // width, pw[keep], idx[keep] % width, logp, cutoffs, rows)
    return y, z


def _meta(n, m, label, **extra) -> dict:
    return {"n": int(n), "m": m, "normalization": label, **extra}


def y_process_batch(n, m, grid, rng, t, rows: int, paired: bool = False):
    """Y_n(floor(m t)) on ``grid`` for ``rows`` replicas, nested along one iid sequence each.

    With ``paired=True`` returns ``(Y, Z)`` computed on the same draws.
    """
    g = check_grid(grid)
    if n > t.n_max:
        raise TableRangeError(f"n={n} exceeds table bound {t.n_max}")
    cut = grid_counts(m, g)
    draws = sample_uniform(n, rng, size=(rows, max(int(cut[-1]), 1)))
    if paired:
        y, z = paired_y_z(draws, cut, t)
        return (ProcessBatch(g, y, _meta(n, m, "Y")), ProcessBatch(g, z, _meta(n, m, "Z")))
    return ProcessBatch(g, prefix_log_lcm(draws, cut, t), _meta(n, m, "Y"))


def z_process_batch(n, m, grid, rng, t, rows: int) -> ProcessBatch:
    g = check_grid(grid)
    cut = grid_counts(m, g)
    draws = sample_uniform(n, rng, size=(rows, max(int(cut[-1]), 1)))
    return ProcessBatch(g, prefix_log_lcm(draws, cut, t, indicator=True), _meta(n, m, "Z"))


def y_process(n, m, grid, rng, t) -> ProcessSample:
    return y_process_batch(n, m, grid, rng, t, rows=1).samples()[0]


def z_process(n, m, grid, rng, t) -> ProcessSample:
    return z_process_batch(n, m, grid, rng, t, rows=1).samples()[0]


def subset_process_batch(n, m, grid, rng, t, rows: int) -> tuple[ProcessBatch, np.ndarray]:
    """log lcm(B_n(floor(m t))) = Y_n(tau(floor(m t))) via the coupon coupling.

    Returns the batch and the matrix of stopping times used as cutoffs.
    """
    g = check_grid(grid)
    cut = grid_counts(m, g)
    top = int(cut[-1])
    if top > n:
        raise GridError(f"floor(m * t_max) = {top} exceeds n = {n}")
    if top == 0:
        return ProcessBatch(g, np.zeros((rows, len(g))), _meta(n, m, "subset")), np.zeros((rows, len(g)), np.int64)
    batch = sample_coupon_batch(n, top, rng, rows)
    stop = np.concatenate([np.zeros((rows, 1), np.int64), batch.stop_times], axis=1)
    taus = stop[:, cut]
    width = int(taus.max())
    vals = prefix_log_lcm(batch.draws[:, :width], taus, t)
    return ProcessBatch(g, vals, _meta(n, m, "subset")), taus


def log_u_tilde(k: int, m: int, t: FactorizationTable) -> float:
    """Sum of log p over primes p > m dividing k."""
    k = int(k)
    if k == 1:
        return 0.0
    return math.fsum(math.log(p) for p in factorize(k, t) if p > m)


def log_u_tilde_many(ks: np.ndarray, m: int, t: FactorizationTable) -> np.ndarray:
    ks = np.asarray(ks, dtype=np.int64)
    idx, pw, p = prime_power_events(ks, t)
    keep = (pw == p) & (p > m)
    return np.bincount(idx[keep], weights=np.log(p[keep].astype(np.float64)), minlength=ks.size)


def y_hat_process_batch(n, m, grid, rng, t, rows: int, indicator: bool = False) -> ProcessBatch:
    """Geometric-model analogue: sum_{p<=n} log p * max_{k<=floor(m t)} G_k(p).

    Maxima over successive grid increments are sampled independently per prime
    and combined by running maximum, so values are nested in t. With
    ``indicator=True`` each maximum is capped at 1 (the process Z-hat).
    """
    g = check_grid(grid)
    cut = grid_counts(m, g)
    ps = t.primes_between(1, n)
    logs = np.log(ps.astype(np.float64))
    rows_l, keys_l, pos_l = [], [], []
    prev = 0
    for chunk, c in enumerate(cut):
        d = int(c) - prev
        prev = int(c)
        if d <= 0:
            continue
        r, col, level = sample_geometric_maxima(ps, d, rng, rows)
        if level.size and level.max() >= 64:
            raise OverflowError("geometric maximum exceeds key packing width")
        if indicator:
            level = np.minimum(level, 1)
        owner = np.repeat(np.arange(r.size), level)
        j = np.arange(owner.size) - np.repeat(np.cumsum(level) - level, level)
        rows_l.append(r[owner])
        keys_l.append(col[owner] * 64 + j)
        pos_l.append(np.full(owner.size, chunk, dtype=np.int64))
    if not rows_l:
        return ProcessBatch(g, np.zeros((rows, len(g))), _meta(n, m, "Yhat"))
    vals = _accumulate_first_hits(
        np.concatenate(rows_l),
        np.concatenate(keys_l),
        np.concatenate(pos_l),
        lambda k: logs[k // 64],
        np.arange(1, len(g) + 1),
        rows,
    )
    return ProcessBatch(g, vals, _meta(n, m, "Zhat" if indicator else "Yhat"))


def y_hat_process(n, m, grid, rng, t) -> ProcessSample:
    return y_hat_process_batch(n, m, grid, rng, t, rows=1).samples()[0]


def reciprocal_gcd_samples(n: int, rng, size: int) -> np.ndarray:
    u = sample_uniform(n, rng, size=(2, size))
    return 1.0 / np.gcd(u[0], u[1])


def reciprocal_gcd_mean(n: int, replicas: int, rng) -> tuple[float, float]:
    """Monte Carlo E[1 / gcd(U1, U2)] with its standard error."""
    x = reciprocal_gcd_samples(n, rng, replicas)
    if replicas < 2:
        return float(x.mean()), 0.0
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(replicas))


def lipschitz_violations(draws: Sequence[int], cutoffs: Sequence[int], n: int, t: FactorizationTable) -> list[tuple[int, int]]:
    """Consecutive cutoff pairs (l, k) where lcm(prefix k) / lcm(prefix l) > n**(k - l).

    Checked in exact integer arithmetic: the ratio of the two lcms is the
    product of the primes of prime powers first appearing in draws[l:k].
    """
    acc = LcmAccumulator(t)
    bad = []
    prev = 0
    cut = list(cutoffs)
    for c in cut:
        if c < prev:
            raise GridError("cutoffs must be nondecreasing")
        ratio = 1
        for k in draws[prev:c]:
            k = int(k)
            if k == 1:
                continue
            for p, e in factorize(k, t).items():
                old = acc.exps.get(p, 0)
                if e > old:
                    ratio *= p ** (e - old)
                    acc.exps[p] = e
        if ratio > n ** (c - prev):
            bad.append((prev, c))
        prev = c
    return bad
