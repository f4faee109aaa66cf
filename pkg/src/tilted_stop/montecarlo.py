"""Playing the secretary game on sampled arrival orders.

The player only ever learns, at each arrival, whether the current item is
the best seen so far.  :class:`ArrivalFeed` enforces this for a concrete
permutation; the batch engine used by :func:`estimate` works on the same
information, the relative ranks drawn by the location sampler.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from .errors import DomainError
from .exact_engine import CutoffStrategy, success_probability
from .permutation_core import Permutation, TiltedModel
from .samplers import METHODS, RandomSource, record_flags_from_uniforms, sample_batch

BLOCK_TRIALS = 1 << 16
SIGMA_GATE = 4.0
THREADS_ENV = "TILTED_STOP_THREADS"

# rows of uniforms materialised at once inside a block
_SLAB_CELLS = 1 << 22


class ArrivalFeed:
    """Reveals a permutation one arrival at a time.

    ``arrive()`` reads exactly one new entry and reports whether it beats
    everything before it.  The referee call :meth:`is_overall_best` is only
    legal for an item that has already arrived.
    """

    def __init__(self, entries: Sequence[int]) -> None:
        self._entries = entries
        self._n = len(entries)
        self._arrived = 0
        self._best = math.inf

    @property
    def n(self) -> int:
        return self._n

    @property
    def arrived(self) -> int:
        return self._arrived

    def arrive(self) -> bool:
        if self._arrived >= self._n:
            raise IndexError("no items left to arrive")
        value = self._entries[self._arrived]
        self._arrived += 1
        if value < self._best:
            self._best = value
            return True
        return False

    def is_overall_best(self, position: int) -> bool:
        if not 1 <= position <= self._arrived:
            raise IndexError("the referee may only judge items that have arrived")
        return self._entries[position - 1] == 1


def play_feed(feed: ArrivalFeed, m: int) -> bool:
    n = feed.n
    if not 0 <= m <= n - 1:
        raise DomainError(f"cutoff m={m} is outside 0..{n - 1}")
    for _ in range(m):
        feed.arrive()
    while True:
        record = feed.arrive()
        if m == 0 or record or feed.arrived == n:
            return feed.is_overall_best(feed.arrived)


def play_game(p: Permutation | Sequence[int], s: CutoffStrategy | int) -> bool:
    """Does the cutoff strategy pick the rank-1 item on this arrival order?"""
    entries = p.entries if isinstance(p, Permutation) else p
    m = s.m if isinstance(s, CutoffStrategy) else int(s)
    return play_feed(ArrivalFeed(entries), m)


def wins_from_records(records: np.ndarray, m: int) -> np.ndarray:
    """Row-wise outcome of cutoff m given 'best so far' flags per arrival.

    The pick is rank 1 iff exactly one record occurs after the first m
    arrivals (for m = 0: none after the first arrival).
    """
    if m == 0:
        return records[:, 1:].sum(axis=1) == 0
    return records[:, m:].sum(axis=1) == 1


def records_from_permutations(perms: np.ndarray) -> np.ndarray:
    return perms == np.minimum.accumulate(perms, axis=1)


@dataclass(frozen=True)
class TrialPlan:
    model: TiltedModel
    strategy: CutoffStrategy
    trials: int
    rng: RandomSource
    method: str = "location"

    def __post_init__(self) -> None:
        if self.trials < 1:
            raise DomainError("trials must be ≥ 1")
        if self.method not in METHODS:
            raise DomainError(f"unknown sampling method {self.method!r}")
        self.strategy.check(self.model.n)


@dataclass(frozen=True)
class EstimateReport:
    successes: int
    trials: int
    exact_ref: Optional[float] = None

    @property
    def p_hat(self) -> float:
        return self.successes / self.trials

    @property
    def ci95_half_width(self) -> float:
        p = self.p_hat
        return 1.96 * math.sqrt(p * (1.0 - p) / self.trials)

    def z_score(self) -> float:
        """Deviation from ``exact_ref`` in binomial standard deviations."""
        if self.exact_ref is None:
            raise ValueError("no exact reference attached")
        return _z(self.p_hat, self.exact_ref, self.trials)

    def gate_z(self) -> float:
        """Normal-equivalent deviation from the exact binomial tail.

        Matches :meth:`z_score` when the normal approximation holds and stays
        calibrated when the expected success count is tiny.
        """
        if self.exact_ref is None:
            raise ValueError("no exact reference attached")
        return binomial_gate_z(self.successes, self.trials, self.exact_ref)

    def to_dict(self) -> dict:
        return {
            "successes": self.successes,
            "trials": self.trials,
            "p_hat": self.p_hat,
            "ci95": self.ci95_half_width,
            "exact_ref": self.exact_ref,
        }


def _z(observed: float, expected: float, trials: int) -> float:
    sigma = math.sqrt(expected * (1.0 - expected) / trials)
    diff = observed - expected
    if sigma == 0.0:
        return 0.0 if diff == 0.0 else math.inf
    return diff / sigma


def binomial_gate_z(successes: int, trials: int, p: float) -> float:
    """Signed normal quantile of the two-sided exact binomial p-value."""
    lower = stats.binom.cdf(successes, trials, p)
    upper = stats.binom.sf(successes - 1, trials, p)
    p_two = min(1.0, 2.0 * min(lower, upper))
    z = float(stats.norm.isf(p_two / 2.0))
    if p_two >= 1.0:
        z = 0.0
    return math.copysign(z, successes - trials * p)


def default_workers() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw is None:
        return 1
    try:
        value = int(raw)
    except ValueError:
        value = 0
    if value < 1:
        raise DomainError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return value


def _block_sizes(trials: int) -> list[int]:
    full, rest = divmod(trials, BLOCK_TRIALS)
    return [BLOCK_TRIALS] * full + ([rest] if rest else [])


def _block_successes(plan: TrialPlan, block: int, size: int) -> int:
    n, q, m = plan.model.n, plan.model.q, plan.strategy.m
    if n == 1:
        return size
    if plan.method == "insertion":
        perms = sample_batch(plan.model, plan.rng, size, "insertion", block)
        return int(wins_from_records(records_from_permutations(perms), m).sum())
    # Location sampler: the flag kappa[j] == 1 is exactly "best so far" at j.
    gen = plan.rng.generator(block)
    rows = max(1, _SLAB_CELLS // n)
    wins = 0
    done = 0
    while done < size:
        take = min(rows, size - done)
        u = gen.random((take, n))
        wins += int(wins_from_records(record_flags_from_uniforms(u, q), m).sum())
        done += take
    return wins


def estimate(plan: TrialPlan, workers: Optional[int] = None, with_exact: bool = True) -> EstimateReport:
    """Monte Carlo success count for the plan.

    Trials are split into blocks of 2**16, block b drawing from block b of
    the plan's random stream; the count does not depend on ``workers``.
    """
    sizes = _block_sizes(plan.trials)
    workers = default_workers() if workers is None else workers
    if workers > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            counts = list(
                pool.map(lambda bs: _block_successes(plan, *bs), enumerate(sizes))
            )
    else:
        counts = [_block_successes(plan, b, size) for b, size in enumerate(sizes)]
    exact = success_probability(plan.model, plan.strategy).prob if with_exact else None
    return EstimateReport(sum(counts), plan.trials, exact)


@dataclass(frozen=True)
class RecordSuiteReport:
    """Empirical record frequencies against the independent-indicator law."""

    n: int
    q: float
    trials: int
    marginal: np.ndarray
    expected: np.ndarray
    marginal_z: np.ndarray
    joint: np.ndarray
    joint_z: np.ndarray

    @property
    def flagged(self) -> list[tuple[int, int]]:
        """(k, l) pairs (one-indexed; k == l for marginals) beyond the gate."""
        out = [(k + 1, k + 1) for k in np.flatnonzero(np.abs(self.marginal_z) > SIGMA_GATE)]
        ks, ls = np.nonzero(np.triu(np.abs(self.joint_z) > SIGMA_GATE, k=1))
        out.extend((int(k) + 1, int(l) + 1) for k, l in zip(ks, ls))
        return out

    @property
    def passed(self) -> bool:
        return not self.flagged

    def max_abs_z(self) -> float:
        iu = np.triu_indices(self.n, k=1)
        values = np.concatenate([np.abs(self.marginal_z), np.abs(self.joint_z[iu])])
        return float(values.max()) if values.size else 0.0


def record_indicator_suite(
    model: TiltedModel,
    trials: int,
    rng: RandomSource,
    method: str = "insertion",
) -> RecordSuiteReport:
    """Check the record law P(I_k) = q/(q+k-1) and pairwise independence.

    Records are read off materialised permutations by running minima; pairs
    are compared with the product of the exact marginals.
    """
    n, q = model.n, model.q
    if n > 1000:
        raise DomainError("the pairwise record table is capped at n=1000")
    if trials < 1:
        raise DomainError("trials must be ≥ 1")
    counts = np.zeros(n)
    pair_counts = np.zeros((n, n))
    for block, size in enumerate(_block_sizes(trials)):
        perms = sample_batch(model, rng, size, method, block)
        rec = records_from_permutations(perms).astype(np.float64)
        counts += rec.sum(axis=0)
        pair_counts += rec.T @ rec
    k = np.arange(1, n + 1, dtype=np.float64)
    expected = q / (q + k - 1.0)
    marginal = counts / trials
    joint = pair_counts / trials
    product = np.outer(expected, expected)
    np.fill_diagonal(product, expected)
    sd_m = np.sqrt(expected * (1.0 - expected) / trials)
    sd_j = np.sqrt(product * (1.0 - product) / trials)
    with np.errstate(divide="ignore", invalid="ignore"):
        mz = np.where(sd_m > 0, (marginal - expected) / sd_m, np.where(marginal == expected, 0.0, np.inf))
        jz = np.where(sd_j > 0, (joint - product) / sd_j, np.where(joint == product, 0.0, np.inf))
    return RecordSuiteReport(n, q, trials, marginal, expected, mz, joint, jz)


@dataclass(frozen=True)
class GridCell:
    n: int
    q: float
    m: int
    report: EstimateReport

    @property
    def z(self) -> float:
        return self.report.gate_z()

    @property
    def passed(self) -> bool:
        return abs(self.z) <= SIGMA_GATE


GRID_N = (10, 100, 1000)
GRID_Q = (0.3, 1.0, 4.0)


def grid_cutoffs(n: int) -> list[int]:
    """Cutoffs 0, 1, floor(n/e), n-1 without duplicates."""
    return sorted({0, 1, math.floor(n / math.e), n - 1})


def exact_agreement_grid(
    trials: int,
    rng: RandomSource,
    ns: Sequence[int] = GRID_N,
    qs: Sequence[float] = GRID_Q,
    workers: Optional[int] = None,
) -> list[GridCell]:
    """Monte Carlo vs exact success probability on an (n, q, m) grid.

    Each cell gets its own stream id so cells are independent of one another
    and of the order in which they run.
    """
    cells = []
    stream = 0
    for n in ns:
        for q in qs:
            model = TiltedModel(n, q)
            for m in grid_cutoffs(n):
                sub = rng.substream((rng.stream_id + stream) & ((1 << 64) - 1))
                plan = TrialPlan(model, CutoffStrategy(m), trials, sub)
                cells.append(GridCell(n, q, m, estimate(plan, workers)))
                stream += 1
    return cells
