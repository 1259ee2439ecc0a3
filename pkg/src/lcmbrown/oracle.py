"""Brute-force ground truth for tiny instances.

IID tuples are enumerated as multisets weighted by their multinomial counts;
subsets are enumerated directly. lcm values are exact integers.
"""

from __future__ import annotations

import enum
import itertools
import math
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .lcm_core import log_u_tilde
from .primes import FactorizationTable, TableRangeError

MAX_IID_TUPLES = 10**8
MAX_SUBSETS = 10**7


class OracleBudgetError(RuntimeError):
    """Enumeration would exceed its configured budget."""


class Model(str, enum.Enum):
    IID = "IID"
    SUBSET = "SUBSET"


@dataclass(frozen=True)
class ExactSummary:
    model: Model
    n: int
    m: int
    mean: float
    variance: float
    support_size: int


def _weighted_moments(values: list[float], weights: list[int], total: int) -> tuple[float, float]:
    mean = math.fsum(w * v for v, w in zip(values, weights)) / total
    var = math.fsum(w * (v - mean) ** 2 for v, w in zip(values, weights)) / total
    return mean, max(var, 0.0)


def _check_table(n: int, t: FactorizationTable) -> None:
    if n > t.n_max:
        raise TableRangeError(f"n={n} exceeds table bound {t.n_max}")


def enumerate_iid(n: int, m: int, t: FactorizationTable, budget: int = MAX_IID_TUPLES) -> ExactSummary:
    """Exact mean and variance of log lcm(U_1, ..., U_m) over all n**m tuples."""
    _check_table(n, t)
    if n ** m > budget:
        raise OracleBudgetError(f"n**m = {n ** m} tuples exceeds budget {budget}")
    fact_m = math.factorial(m)
    values, weights = [], []
    for ms in itertools.combinations_with_replacement(range(1, n + 1), m):
        w = fact_m
        for c in Counter(ms).values():
            w //= math.factorial(c)
        values.append(math.log(math.lcm(*ms)))
        weights.append(w)
    mean, var = _weighted_moments(values, weights, n**m)
    return ExactSummary(Model.IID, n, m, mean, var, n**m)


def enumerate_subsets(n: int, m: int, t: FactorizationTable, budget: int = MAX_SUBSETS) -> ExactSummary:
    """Exact mean and variance of log lcm over all m-subsets of [n], equally weighted."""
    _check_table(n, t)
    size = math.comb(n, m)
    if size > budget:
        raise OracleBudgetError(f"C({n},{m}) = {size} subsets exceeds budget {budget}")
    values = [math.log(math.lcm(*s)) for s in itertools.combinations(range(1, n + 1), m)]
    mean, var = _weighted_moments(values, [1] * len(values), size)
    return ExactSummary(Model.SUBSET, n, m, mean, var, size)


def enumerate_log_u_tilde(n: int, m: int, t: FactorizationTable) -> tuple[float, float]:
    """Mean and variance of log U-tilde^(n,m) by direct evaluation at every k in [n]."""
    _check_table(n, t)
    vals = [log_u_tilde(k, m, t) for k in range(1, n + 1)]
    return _weighted_moments(vals, [1] * n, n)


def subset_rank(subset, n: int) -> int:
    """Lexicographic rank of an m-subset of [n] among all m-subsets (combinatorial number system)."""
    s = sorted(subset)
    m = len(s)
    rank, prev = 0, 0
    for i, v in enumerate(s):
        for u in range(prev + 1, v):
            rank += math.comb(n - u, m - i - 1)
        prev = v
    return rank


def subset_ranks(rows: np.ndarray, n: int) -> np.ndarray:
    return np.array([subset_rank(r, n) for r in rows], dtype=np.int64)
