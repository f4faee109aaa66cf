import math
import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tilted_stop.errors import DomainError, SizeLimitError
from tilted_stop.exact_engine import (
    CutoffStrategy,
    brute_force_success,
    expected_lr_min,
    log_success_probability,
    optimal_cutoff,
    play_cutoff,
    scan,
    scan_log_probabilities,
    success_probability,
    success_terms,
    suffix_sums,
)
from tilted_stop.permutation_core import TiltedModel, enumerate_all, raising_factorial

QS = (0.1, 0.5, 1.0, 2.0, 10.0)


def classical_exact(n, m):
    """Uniform arrivals: (m/n) sum_{j=m}^{n-1} 1/j, and 1/n for m = 0."""
    if m == 0:
        return Fraction(1, n)
    return Fraction(m, n) * sum(Fraction(1, j) for j in range(m, n))


def test_examples():
    assert success_probability(TiltedModel(2, 3.0), 0).prob == pytest.approx(0.25, rel=1e-15)
    assert success_probability(TiltedModel(4, 1.0), 1).prob == pytest.approx(11 / 24, rel=1e-14)
    assert success_probability(TiltedModel(5, 2.0), 0).prob == pytest.approx(1 / 15, rel=1e-14)


def test_examples_by_enumeration():
    assert brute_force_success(TiltedModel(2, 3.0), 0, exact=True) == Fraction(1, 4)
    assert brute_force_success(TiltedModel(4, 1.0), 1, exact=True) == Fraction(11, 24)
    assert brute_force_success(TiltedModel(5, 2.0), 0, exact=True) == Fraction(1, 15)
    assert brute_force_success(TiltedModel(3, 1.0), 1, exact=True) == Fraction(1, 2)
    assert brute_force_success(TiltedModel(1, 4.0), 0) == 1.0


@pytest.mark.parametrize("q", QS)
def test_two_items_last(q):
    expected = q / (1 + q)
    assert brute_force_success(TiltedModel(2, q), 1) == pytest.approx(expected, rel=1e-15)
    assert success_probability(TiltedModel(2, q), 1).prob == pytest.approx(expected, rel=1e-15)


@pytest.mark.parametrize("n", range(1, 9))
@pytest.mark.parametrize("q", QS)
def test_formula_matches_enumeration(n, q):
    model = TiltedModel(n, q)
    for m in range(n):
        assert abs(success_probability(model, m).prob - brute_force_success(model, m)) <= 1e-12


@pytest.mark.parametrize("n", range(1, 7))
def test_rational_enumeration_matches_float(n):
    model = TiltedModel(n, 0.75)
    for m in range(n):
        exact = brute_force_success(model, m, exact=True)
        assert isinstance(exact, Fraction)
        assert abs(float(exact) - brute_force_success(model, m)) <= 1e-15


def test_single_item_is_certain():
    ev = success_probability(TiltedModel(1, 7.0), 0)
    assert ev.prob == 1.0 and ev.log_prob == 0.0
    res = optimal_cutoff(TiltedModel(1, 0.2))
    assert res.m_star == 0 and res.evaluation.prob == 1.0


def test_cutoff_validation():
    with pytest.raises(DomainError):
        success_probability(TiltedModel(5, 1.0), 5)
    with pytest.raises(DomainError):
        CutoffStrategy(-1)
    with pytest.raises(SizeLimitError):
        brute_force_success(TiltedModel(10, 1.0), 3)
    with pytest.raises(SizeLimitError):
        brute_force_success(TiltedModel(8, 1.0), 3, exact=True)


@pytest.mark.parametrize("n", [3, 10, 137, 1000, 10_000])
def test_classical_reduction(n):
    model = TiltedModel(n, 1.0)
    table = scan(model)
    ms = range(1, n) if n <= 1000 else random.Random(n).sample(range(1, n), 200)
    for m in ms:
        exact = float(classical_exact(n, m)) if n <= 1000 else (m / n) * math.fsum(
            1 / j for j in range(m, n)
        )
        assert success_probability(model, m).prob == pytest.approx(exact, abs=1e-12)
        assert table[m].prob == pytest.approx(exact, abs=1e-12)


def test_classical_hundred():
    exact = [classical_exact(100, m) for m in range(100)]
    best = max(range(100), key=lambda m: (exact[m], -m))
    assert best == 37
    res = optimal_cutoff(TiltedModel(100, 1.0), keep_scan=True)
    assert res.m_star == 37
    assert res.evaluation.prob == pytest.approx(float(exact[37]), rel=1e-12)
    assert abs(res.evaluation.prob - 0.37104) < 1e-4
    assert len(res.scan) == 100


@pytest.mark.parametrize("n", [1000, 100_000])
@pytest.mark.parametrize("q", [0.3, 1.0, 2.5, 40.0])
def test_scan_matches_direct_evaluation(n, q):
    model = TiltedModel(n, q)
    log_scan = scan_log_probabilities(model)
    rng = random.Random(n + int(10 * q))
    for m in [0, 1, n - 1] + rng.sample(range(n), 100):
        direct = log_success_probability(model, m)
        assert math.exp(log_scan[m]) == pytest.approx(math.exp(direct), rel=1e-10)


def test_scan_accuracy_at_a_million():
    n = 1_000_000
    model = TiltedModel(n, 2.0)
    log_scan = scan_log_probabilities(model)
    for m in (1, 17, 606_531, n - 2, n - 1):
        direct = log_success_probability(model, m)
        assert math.exp(log_scan[m]) == pytest.approx(math.exp(direct), rel=1e-10)


def test_suffix_sums_against_fsum():
    rng = np.random.default_rng(0)
    x = rng.standard_normal(5000) * 10.0 ** rng.integers(-8, 8, 5000)
    out = suffix_sums(x, block=64)
    for i in (0, 1, 63, 64, 65, 2500, 4999):
        assert out[i] == pytest.approx(math.fsum(x[i:].tolist()), rel=1e-9, abs=1e-9)
    assert suffix_sums(np.array([])).size == 0


@pytest.mark.parametrize("n", range(2, 9))
@pytest.mark.parametrize("q", [0.5, 2.0])
def test_position_terms_sum_to_total(n, q):
    model = TiltedModel(n, q)
    for m in range(1, n):
        terms = success_terms(model, m)
        assert set(terms) == set(range(m + 1, n + 1))
        total = success_probability(model, m).prob
        assert abs(math.fsum(terms.values()) - total) <= 1e-12
        # each term by enumeration: rank 1 at j with no earlier record after m
        for j, term in terms.items():
            hit = math.fsum(
                q**lr
                for p, lr in enumerate_all(n)
                if p.entries[j - 1] == 1 and min(p.entries[: j - 1]) == min(p.entries[:m])
            )
            assert abs(hit / raising_factorial(q, n) - term) <= 1e-12


def test_position_terms_need_a_cutoff():
    with pytest.raises(DomainError):
        success_terms(TiltedModel(4, 1.0), 0)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 3000), st.floats(1e-3, 1e4))
def test_probabilities_are_probabilities(n, q):
    table = scan(TiltedModel(n, q))
    probs = table.prob
    # positivity lives in the log domain; exp may underflow to 0.0
    assert np.all(np.isfinite(table.log_prob)) and np.all(table.log_prob <= 1e-15)
    assert np.all(probs >= 0) and np.all(probs <= 1 + 1e-15)
    best = optimal_cutoff(TiltedModel(n, q))
    assert np.all(probs <= best.evaluation.prob * (1 + 1e-12))
    assert best.m_star == int(np.flatnonzero(table.log_prob == table.log_prob.max())[0])


def test_ties_go_to_smallest_cutoff():
    # n = 2, q = 1: both cutoffs succeed with probability 1/2
    res = optimal_cutoff(TiltedModel(2, 1.0), keep_scan=True)
    assert res.scan.prob[0] == pytest.approx(res.scan.prob[1], rel=1e-15)
    assert res.m_star == 0


def test_regime_vii_scan():
    n = 100_000
    assert optimal_cutoff(TiltedModel(n, 0.6 * n)).m_star == n - 2


def test_expected_lr_examples():
    assert expected_lr_min(TiltedModel(1, 3.0)) == 1.0
    assert expected_lr_min(TiltedModel(4, 1.0)) == pytest.approx(25 / 12, rel=1e-15)
    assert expected_lr_min(TiltedModel(3, 2.0)) == pytest.approx(13 / 6, rel=1e-15)
    # weighted enumeration for n=3, q=2: (2*1*2 + 3*2*4 + 1*3*8) / 24
    assert (2 * 1 * 2 + 3 * 2 * 4 + 1 * 3 * 8) / 24 == pytest.approx(13 / 6)


@pytest.mark.parametrize("n", range(1, 9))
@pytest.mark.parametrize("q", [0.5, 1.0, 2.0])
def test_expected_lr_matches_enumeration(n, q):
    weighted = math.fsum(lr * q**lr for _, lr in enumerate_all(n)) / raising_factorial(q, n)
    assert abs(expected_lr_min(TiltedModel(n, q)) - weighted) <= 1e-12


def test_referee():
    assert play_cutoff((2, 1, 3), 1)
    assert not play_cutoff((2, 3, 1), 0)
    assert play_cutoff((3, 2, 1), 2)
    assert not play_cutoff((3, 1, 2), 2)
