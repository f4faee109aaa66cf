"""Exact finite-n success probabilities of cutoff strategies.

A cutoff strategy with cutoff m rejects the first m items and then takes the
first item better than all of them (the last item if none is).  Under the
tilted law with parameter q its success probability is

    m >= 1:  q (m/n) prod_{l=m+1}^{n} l/(l-1+q) * sum_{j=m}^{n-1} 1/j
    m == 0:  prod_{l=1}^{n-1} l/(l+q)

Everything is accumulated in the log domain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Union

import numpy as np

from .errors import DomainError, NumericError, SizeLimitError
from .permutation_core import (
    MAX_ENUMERATION_N,
    TiltedModel,
    enumerate_all,
    raising_factorial,
)

MAX_SCAN_N = 10_000_000
_BLOCK = 256


@dataclass(frozen=True)
class CutoffStrategy:
    m: int

    def __post_init__(self) -> None:
        if isinstance(self.m, bool) or int(self.m) != self.m or self.m < 0:
            raise DomainError(f"cutoff must be a nonnegative integer, got {self.m!r}")
        object.__setattr__(self, "m", int(self.m))

    def check(self, n: int) -> None:
        if self.m > n - 1:
            raise DomainError(f"cutoff m={self.m} is outside 0..{n - 1}")


@dataclass(frozen=True)
class StrategyEvaluation:
    m: int
    log_prob: float
    prob: float


@dataclass(frozen=True)
class ScanTable:
    """Log success probability for every cutoff m = 0..n-1."""

    n: int
    q: float
    log_prob: np.ndarray

    @property
    def prob(self) -> np.ndarray:
        return np.exp(self.log_prob)

    def __len__(self) -> int:
        return self.n

    def __getitem__(self, m: int) -> StrategyEvaluation:
        lp = float(self.log_prob[m])
        return StrategyEvaluation(int(m), lp, math.exp(lp))


@dataclass(frozen=True)
class OptimalResult:
    m_star: int
    evaluation: StrategyEvaluation
    scan: Optional[ScanTable] = None


StrategyLike = Union[CutoffStrategy, int]


def _as_strategy(s: StrategyLike, n: int) -> CutoffStrategy:
    strategy = s if isinstance(s, CutoffStrategy) else CutoffStrategy(s)
    strategy.check(n)
    return strategy


def _finite(value: float, what: str) -> float:
    if not math.isfinite(value):
        raise NumericError(f"non-finite {what}: {value!r}")
    return value


def _fsum(values: np.ndarray) -> float:
    return math.fsum(values.tolist())


def log_success_probability(model: TiltedModel, s: StrategyLike) -> float:
    """Direct O(n) evaluation of the log success probability for one cutoff."""
    n, q = model.n, model.q
    m = _as_strategy(s, n).m
    if n == 1:
        return 0.0
    if m == 0:
        l = np.arange(1, n, dtype=np.float64)
        return _finite(_fsum(-np.log1p(q / l)), "log probability")
    l = np.arange(m + 1, n + 1, dtype=np.float64)
    log_product = _fsum(-np.log1p((q - 1.0) / l))
    harmonic = _fsum(1.0 / np.arange(m, n, dtype=np.float64))
    total = math.log(q) + math.log(m) - math.log(n) + log_product + math.log(harmonic)
    return _finite(total, "log probability")


def success_probability(model: TiltedModel, s: StrategyLike) -> StrategyEvaluation:
    m = _as_strategy(s, model.n).m
    lp = log_success_probability(model, m)
    return StrategyEvaluation(m, lp, math.exp(lp))


def success_terms(model: TiltedModel, s: StrategyLike) -> dict[int, float]:
    """Probability of succeeding by selecting the item at position j, for j > m.

    Only defined for m >= 1; the terms are disjoint events whose sum is the
    success probability.
    """
    n, q = model.n, model.q
    m = _as_strategy(s, n).m
    if m == 0:
        raise DomainError("per-position terms are defined for m ≥ 1")
    # q (n-1)! / ((j-1) (m-1)!) / prod_{l=m+1}^{n} (l-1+q)
    base = (
        math.log(q)
        + _fsum(np.log(np.arange(m, n, dtype=np.float64)))
        - _fsum(np.log(np.arange(m, n, dtype=np.float64) + q))
    )
    return {j: math.exp(base - math.log(j - 1)) for j in range(m + 1, n + 1)}


def suffix_sums(values: np.ndarray, block: int = _BLOCK) -> np.ndarray:
    """``out[i] = sum(values[i:])`` with blockwise compensation.

    Each block is summed by numpy's cumsum; the running total carried between
    blocks uses Neumaier summation, so the rounding error grows with the
    block length rather than with the array length.
    """
    x = np.asarray(values, dtype=np.float64)[::-1]
    size = x.size
    if size == 0:
        return x.copy()
    nblocks = -(-size // block)
    padded = np.zeros(nblocks * block)
    padded[:size] = x
    within = np.cumsum(padded.reshape(nblocks, block), axis=1)
    offsets = np.empty(nblocks)
    total = 0.0
    comp = 0.0
    for b, block_sum in enumerate(within[:, -1].tolist()):
        offsets[b] = total + comp
        t = total + block_sum
        if abs(total) >= abs(block_sum):
            comp += (total - t) + block_sum
        else:
            comp += (block_sum - t) + total
        total = t
    out = (within + offsets[:, None]).ravel()[:size]
    return out[::-1].copy()


def scan_log_probabilities(model: TiltedModel) -> np.ndarray:
    """Log success probability for every m = 0..n-1 in O(n)."""
    n, q = model.n, model.q
    if n > MAX_SCAN_N:
        raise SizeLimitError(f"scan is capped at n={MAX_SCAN_N}, got n={n}")
    out = np.empty(n)
    out[0] = log_success_probability(model, 0)
    if n == 1:
        return out
    m = np.arange(1, n, dtype=np.float64)
    # log of prod_{l=m+1}^{n} l/(l-1+q), indexed by m = 1..n-1
    l = np.arange(2, n + 1, dtype=np.float64)
    log_product = suffix_sums(-np.log1p((q - 1.0) / l))
    harmonic = suffix_sums(1.0 / m)
    out[1:] = math.log(q) + np.log(m) - math.log(n) + log_product + np.log(harmonic)
    if not np.all(np.isfinite(out)):
        raise NumericError("non-finite value in the cutoff scan")
    return out


def scan(model: TiltedModel) -> ScanTable:
    return ScanTable(model.n, model.q, scan_log_probabilities(model))


def optimal_cutoff(model: TiltedModel, keep_scan: bool = False) -> OptimalResult:
    """Best cutoff by a full scan; ties go to the smallest m."""
    table = scan(model)
    m_star = int(np.argmax(table.log_prob))
    return OptimalResult(m_star, table[m_star], table if keep_scan else None)


def expected_lr_min(model: TiltedModel) -> float:
    """Mean number of left-to-right minima, ``1 + sum_{j<n} q/(j+q)``."""
    q = model.q
    j = np.arange(1, model.n, dtype=np.float64)
    return 1.0 + _fsum(q / (j + q))


def play_cutoff(entries, m: int) -> bool:
    """Referee for a full permutation: does cutoff m select rank 1?"""
    n = len(entries)
    if m == 0:
        return entries[0] == 1
    threshold = min(entries[:m])
    for j in range(m, n):
        if entries[j] < threshold:
            return entries[j] == 1
    return entries[n - 1] == 1


def brute_force_success(
    model: TiltedModel, s: StrategyLike, exact: bool = False
) -> Union[float, Fraction]:
    """Play the cutoff on every permutation, weighting by ``q ** LR``.

    With ``exact=True`` the float q is converted to its exact rational value
    and the answer is a :class:`~fractions.Fraction` (n <= 7).
    """
    n = model.n
    m = _as_strategy(s, n).m
    if n > MAX_ENUMERATION_N:
        raise SizeLimitError(f"enumeration is capped at n={MAX_ENUMERATION_N}")
    if exact:
        if n > 7:
            raise SizeLimitError("rational enumeration is capped at n=7")
        q = Fraction(model.q)
        norm = Fraction(1)
        for i in range(n):
            norm *= q + i
        wins = sum(
            (q**lr for p, lr in enumerate_all(n) if play_cutoff(p.entries, m)),
            Fraction(0),
        )
        return wins / norm
    q = model.q
    wins = [q**lr for p, lr in enumerate_all(n) if play_cutoff(p.entries, m)]
    return math.fsum(wins) / raising_factorial(q, n)
