"""Online constructions of a random permutation under the tilted law.

Two constructions are provided:

* ``location``: positions n, n-1, ..., 1 are filled in turn.  Position m gets
  the ``kappa[m]``-th smallest value not yet used, where ``kappa[m]`` is 1
  with probability q/(q+m-1) and uniform on 2..m otherwise.  ``kappa[m]``
  is the relative rank of item m among the first m arrivals, so position m
  is a left-to-right minimum exactly when ``kappa[m] == 1``.
* ``insertion``: values 1, 2, ..., n are laid down in turn; value m is
  placed with ``y[m]`` already-placed values to its left, where ``y[m]`` is
  0 with probability q/(q+m-1) and uniform on 1..m-1 otherwise.

Randomness comes from numpy's Philox counter-based generator keyed by
``(seed, stream_id)``.  Block ``b`` of a stream starts at counter
``[0, 0, b, 0]``, so blocks never overlap and any block can be regenerated
on its own.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import DomainError
from .permutation_core import Permutation, TiltedModel

Method = Literal["location", "insertion"]
METHODS: tuple[str, ...] = ("location", "insertion")

_U64 = (1 << 64) - 1


@dataclass(frozen=True)
class RandomSource:
    seed: int
    stream_id: int = 0

    def __post_init__(self) -> None:
        for name in ("seed", "stream_id"):
            value = getattr(self, name)
            if not 0 <= int(value) <= _U64:
                raise DomainError(f"{name} must be a 64-bit unsigned integer")
            object.__setattr__(self, name, int(value))

    def generator(self, block: int = 0) -> np.random.Generator:
        """Fresh generator for one block of this stream."""
        if not 0 <= block <= _U64:
            raise DomainError("block index must be a 64-bit unsigned integer")
        bitgen = np.random.Philox(
            key=np.array([self.seed, self.stream_id], dtype=np.uint64),
            counter=np.array([0, 0, block, 0], dtype=np.uint64),
        )
        return np.random.Generator(bitgen)

    def substream(self, stream_id: int) -> "RandomSource":
        return RandomSource(self.seed, stream_id)


@dataclass(frozen=True)
class KappaDraws:
    """``kappa[m - 1]`` holds the draw from the m-th distribution, m = 1..n."""

    kappa: tuple[int, ...]

    def __post_init__(self) -> None:
        kappa = tuple(int(k) for k in self.kappa)
        object.__setattr__(self, "kappa", kappa)
        for m, k in enumerate(kappa, start=1):
            if not 1 <= k <= m:
                raise DomainError(f"kappa[{m}]={k} is outside 1..{m}")

    @property
    def n(self) -> int:
        return len(self.kappa)

    def at(self, m: int) -> int:
        return self.kappa[m - 1]


@dataclass(frozen=True)
class InsertionDraws:
    """``y[m - 2]`` holds the draw for value m, m = 2..n."""

    y: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "y", tuple(int(v) for v in self.y))

    @property
    def n(self) -> int:
        return len(self.y) + 1

    def at(self, m: int) -> int:
        return self.y[m - 2]


def kappa_from_uniforms(u: np.ndarray, q: float, m: np.ndarray | int) -> np.ndarray:
    """Inverse-CDF draw of kappa on ``[1, m]`` from uniforms on ``[0, 1)``.

    The interval ``[0, q + m - 1)`` is split into a piece of length q for
    the value 1 followed by unit pieces for 2..m.
    """
    t = np.asarray(u, dtype=np.float64) * (q + np.asarray(m, dtype=np.float64) - 1.0)
    tail = np.floor(t - q).astype(np.int64) + 2
    # guards the top piece against floating round-up of t
    tail = np.minimum(tail, np.asarray(m, dtype=np.int64))
    return np.where(t < q, 1, tail)


def record_flags_from_uniforms(u: np.ndarray, q: float) -> np.ndarray:
    """``kappa[m] == 1`` for uniforms laid out with m along the last axis."""
    m = np.arange(1, u.shape[-1] + 1, dtype=np.float64)
    return u * (q + m - 1.0) < q


def draw_kappa(model: TiltedModel, rng: RandomSource) -> KappaDraws:
    u = rng.generator().random(model.n)
    m = np.arange(1, model.n + 1)
    return KappaDraws(tuple(kappa_from_uniforms(u, model.q, m).tolist()))


def draw_insertion(model: TiltedModel, rng: RandomSource) -> InsertionDraws:
    # one uniform per value, as in sample_batch; value 1's uniform is unused
    u = rng.generator().random(model.n)[1:]
    m = np.arange(2, model.n + 1)
    return InsertionDraws(tuple((kappa_from_uniforms(u, model.q, m) - 1).tolist()))


class _FreeSlots:
    """Fenwick tree over 1..n supporting 'take the k-th smallest free slot'."""

    def __init__(self, n: int) -> None:
        self.n = n
        tree = [0] * (n + 1)
        for i in range(1, n + 1):
            tree[i] += 1
            parent = i + (i & -i)
            if parent <= n:
                tree[parent] += tree[i]
        self.tree = tree
        self.top = 1 << (n.bit_length() - 1) if n else 0

    def take(self, k: int) -> int:
        pos = 0
        step = self.top
        tree = self.tree
        while step:
            nxt = pos + step
            if nxt <= self.n and tree[nxt] < k:
                pos = nxt
                k -= tree[nxt]
            step >>= 1
        slot = pos + 1
        i = slot
        while i <= self.n:
            tree[i] -= 1
            i += i & -i
        return slot


def kappa_to_permutation(k: KappaDraws) -> Permutation:
    n = k.n
    free = _FreeSlots(n)
    entries = [0] * n
    for m in range(n, 0, -1):
        entries[m - 1] = free.take(k.kappa[m - 1])
    return Permutation(tuple(entries))


def kappa_to_permutation_list(k: KappaDraws) -> Permutation:
    """Quadratic list-based version of :func:`kappa_to_permutation`."""
    unused = list(range(1, k.n + 1))
    entries = [0] * k.n
    for m in range(k.n, 0, -1):
        entries[m - 1] = unused.pop(k.kappa[m - 1] - 1)
    return Permutation(tuple(entries))


def _check_insertion(d: InsertionDraws, n: int) -> None:
    if d.n != n:
        raise DomainError(f"insertion draws cover m=2..{d.n}, expected m=2..{n}")
    for m in range(2, n + 1):
        y = d.at(m)
        if not 0 <= y <= m - 1:
            raise DomainError(f"y[{m}]={y} is outside 0..{m - 1}")


def insertion_to_permutation(d: InsertionDraws, n: int) -> Permutation:
    """Lay down 1..n, value m with ``y[m]`` values to its left.

    Runs backwards: value n lands in free position ``y[n] + 1``, then value
    n-1 in the ``y[n-1] + 1``-th still-free position, and so on, which gives
    the same line as forward insertion in O(n log n).
    """
    _check_insertion(d, n)
    free = _FreeSlots(n)
    entries = [0] * n
    for m in range(n, 1, -1):
        entries[free.take(d.y[m - 2] + 1) - 1] = m
    entries[free.take(1) - 1] = 1
    return Permutation(tuple(entries))


def insertion_to_permutation_list(d: InsertionDraws, n: int) -> Permutation:
    """Forward list insertion; quadratic, kept as the reference."""
    _check_insertion(d, n)
    line = [1]
    for m in range(2, n + 1):
        line.insert(d.at(m), m)
    return Permutation(tuple(line))


def sample(model: TiltedModel, rng: RandomSource, method: Method = "location") -> Permutation:
    if method == "location":
        return kappa_to_permutation(draw_kappa(model, rng))
    if method == "insertion":
        return insertion_to_permutation(draw_insertion(model, rng), model.n)
    raise DomainError(f"unknown sampling method {method!r}")


# Above this n the batch sampler falls back to one permutation per row.
_VECTOR_N_LIMIT = 64


def _take_kth_free(choice: np.ndarray) -> np.ndarray:
    """Row-wise backward 'k-th smallest free slot' for a (rows, n) matrix.

    ``choice[:, m - 1]`` (one-indexed k) is consumed for m = n..1; returns
    the zero-indexed slot taken at each m.
    """
    rows, n = choice.shape
    free = np.ones((rows, n), dtype=bool)
    taken = np.empty((rows, n), dtype=np.int64)
    idx = np.arange(rows)
    for m in range(n, 0, -1):
        rank = np.cumsum(free, axis=1)
        hit = free & (rank == choice[:, m - 1, None])
        slot = hit.argmax(axis=1)
        taken[:, m - 1] = slot
        free[idx, slot] = False
    return taken


def sample_batch(
    model: TiltedModel,
    rng: RandomSource,
    size: int,
    method: Method = "location",
    block: int = 0,
) -> np.ndarray:
    """``size`` permutations as a (size, n) int array of one-indexed ranks.

    Row r uses uniforms r*n .. r*n + n - 1 of the given block, so the first
    rows of a larger batch coincide with a smaller batch.
    """
    if method not in METHODS:
        raise DomainError(f"unknown sampling method {method!r}")
    n, q = model.n, model.q
    u = rng.generator(block).random((size, n))
    m = np.arange(1, n + 1)
    if method == "location":
        choice = kappa_from_uniforms(u, q, m)
    else:
        # column 0 is unused by insertion (value 1 takes the last free slot)
        choice = np.ones((size, n), dtype=np.int64)
        if n > 1:
            choice[:, 1:] = kappa_from_uniforms(u[:, 1:], q, m[1:])
    if n > _VECTOR_N_LIMIT:
        out = np.empty((size, n), dtype=np.int64)
        for r in range(size):
            if method == "location":
                perm = kappa_to_permutation(KappaDraws(tuple(choice[r].tolist())))
            else:
                draws = InsertionDraws(tuple((choice[r, 1:] - 1).tolist()))
                perm = insertion_to_permutation(draws, n)
            out[r] = perm.entries
        return out
    taken = _take_kth_free(choice)
    if method == "location":
        return taken + 1
    out = np.empty((size, n), dtype=np.int64)
    np.put_along_axis(out, taken, np.arange(1, n + 1)[None, :].repeat(size, 0), axis=1)
    return out
