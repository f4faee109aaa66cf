"""Permutations, the left-to-right minimum statistic and the tilted law.

Positions and ranks are one-indexed everywhere in the public interface:
``entries[j - 1]`` is the rank of the j-th arriving item and rank 1 is the
best item.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterator, Sequence, Union

import numpy as np

from .errors import DomainError, SizeLimitError

MAX_ENUMERATION_N = 9
MAX_STIRLING_N = 30


@dataclass(frozen=True)
class Permutation:
    """Arrangement of the ranks 1..n in arrival order."""

    entries: tuple[int, ...]

    def __post_init__(self) -> None:
        entries = tuple(int(v) for v in self.entries)
        object.__setattr__(self, "entries", entries)
        n = len(entries)
        if n < 1:
            raise DomainError("a permutation needs at least one entry")
        if sorted(entries) != list(range(1, n + 1)):
            raise DomainError(f"entries are not a bijection on 1..{n}: {entries}")

    @classmethod
    def from_string(cls, text: str) -> "Permutation":
        """Parse the one-line notation used for n <= 9, e.g. ``"83546172"``."""
        return cls(tuple(int(ch) for ch in text.strip()))

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        return cls(tuple(range(1, n + 1)))

    @classmethod
    def reversed_order(cls, n: int) -> "Permutation":
        return cls(tuple(range(n, 0, -1)))

    @property
    def n(self) -> int:
        return len(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[int]:
        return iter(self.entries)

    def __getitem__(self, position: int) -> int:
        """Rank at the one-indexed ``position``."""
        if not 1 <= position <= len(self.entries):
            raise IndexError(position)
        return self.entries[position - 1]

    def inverse(self) -> "Permutation":
        inv = [0] * self.n
        for pos, rank in enumerate(self.entries, start=1):
            inv[rank - 1] = pos
        return Permutation(tuple(inv))

    def __str__(self) -> str:
        if self.n <= 9:
            return "".join(str(v) for v in self.entries)
        return " ".join(str(v) for v in self.entries)


@dataclass(frozen=True)
class TiltedModel:
    """The tilted law on S_n with weight ``q ** LR(sigma)``."""

    n: int
    q: float

    def __post_init__(self) -> None:
        if isinstance(self.n, bool) or int(self.n) != self.n:
            raise DomainError(f"n must be an integer, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "q", float(self.q))
        if self.n < 1:
            raise DomainError("n must be ≥ 1")
        if not math.isfinite(self.q) or self.q <= 0.0:
            raise DomainError(f"q must be positive and finite, got {self.q!r}")


@dataclass(frozen=True)
class LrHistogram:
    """Number of permutations of S_n having each value of the statistic."""

    n: int
    counts: dict[int, int]

    @property
    def total(self) -> int:
        return sum(self.counts.values())


PermutationLike = Union[Permutation, Sequence[int]]


def _entries(p: PermutationLike) -> Sequence[int]:
    return p.entries if isinstance(p, Permutation) else p


def lr_min_positions(p: PermutationLike) -> list[int]:
    """One-indexed positions j with ``p[j] == min(p[1..j])``."""
    positions = []
    running = math.inf
    for j, value in enumerate(_entries(p), start=1):
        if value < running:
            running = value
            positions.append(j)
    return positions


def lr_min_statistic(p: PermutationLike) -> int:
    """Number of left-to-right minima of ``p``."""
    count = 0
    running = math.inf
    for value in _entries(p):
        if value < running:
            running = value
            count += 1
    return count


def raising_factorial(q: float, n: int) -> float:
    """``q (q + 1) ... (q + n - 1)``; the empty product is 1."""
    _check_raising_args(q, n)
    result = 1.0
    for i in range(n):
        result *= q + i
    return result


def log_raising_factorial(q: float, n: int) -> float:
    """Natural log of :func:`raising_factorial`, safe for large ``n``."""
    _check_raising_args(q, n)
    if n == 0:
        return 0.0
    return math.fsum(np.log(q + np.arange(n, dtype=np.float64)).tolist())


def _check_raising_args(q: float, n: int) -> None:
    if not q > 0:
        raise DomainError(f"raising factorial needs q > 0, got {q!r}")
    if n < 0:
        raise DomainError(f"raising factorial needs n ≥ 0, got {n!r}")


def log_pmf(model: TiltedModel, p: PermutationLike) -> float:
    entries = _entries(p)
    if len(entries) != model.n:
        raise DomainError(
            f"permutation has length {len(entries)} but the model has n={model.n}"
        )
    return lr_min_statistic(entries) * math.log(model.q) - log_raising_factorial(
        model.q, model.n
    )


def pmf(model: TiltedModel, p: PermutationLike) -> float:
    """Probability of ``p`` under the tilted law, evaluated in the log domain."""
    return math.exp(log_pmf(model, p))


def pmf_exact(n: int, q: Fraction | int, p: PermutationLike) -> Fraction:
    """Rational-arithmetic pmf for rational ``q``; used as a test oracle."""
    q = Fraction(q)
    norm = Fraction(1)
    for i in range(n):
        norm *= q + i
    return q ** lr_min_statistic(p) / norm


@lru_cache(maxsize=None)
def _stirling_row(n: int) -> tuple[int, ...]:
    # row[j] = s(n, j) for j = 0..n
    if n == 0:
        return (1,)
    prev = _stirling_row(n - 1)
    row = [0] * (n + 1)
    for j in range(1, n + 1):
        left = prev[j - 1]
        right = prev[j] if j < n else 0
        row[j] = left + (n - 1) * right
    return tuple(row)


def stirling_first_kind(n: int, j: int) -> int:
    """Unsigned Stirling number of the first kind s(n, j), exact."""
    if n < 1:
        raise DomainError("n must be ≥ 1")
    if n > MAX_STIRLING_N:
        raise SizeLimitError(f"Stirling numbers are capped at n={MAX_STIRLING_N}")
    if j < 1 or j > n:
        return 0
    return _stirling_row(n)[j]


def stirling_row(n: int) -> dict[int, int]:
    """All nonzero s(n, j), keyed by j = 1..n."""
    return {j: stirling_first_kind(n, j) for j in range(1, n + 1)}


def enumerate_all(n: int) -> Iterator[tuple[Permutation, int]]:
    """Yield every permutation of S_n (lexicographic) with its statistic."""
    if n < 1:
        raise DomainError("n must be ≥ 1")
    if n > MAX_ENUMERATION_N:
        raise SizeLimitError(
            f"enumeration is capped at n={MAX_ENUMERATION_N}, got n={n}"
        )
    for entries in itertools.permutations(range(1, n + 1)):
        yield Permutation(entries), lr_min_statistic(entries)


def lr_histogram(n: int) -> LrHistogram:
    counts = {j: 0 for j in range(1, n + 1)}
    for _, lr in enumerate_all(n):
        counts[lr] += 1
    return LrHistogram(n, counts)
