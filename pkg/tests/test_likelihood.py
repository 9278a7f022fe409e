import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import binom

from oracles import assignment_distribution, compositions, draw_distribution
from typecount.core import DomainError, GroupCounts, TypeCounts, free_var_bounds
from typecount.likelihood import (
    LogPmfTable,
    log_binom_pmf,
    log_likelihood,
    log_likelihood_many,
)


def test_log_binom_pmf_examples():
    assert log_binom_pmf(1, 1, 0.5) == pytest.approx(math.log(0.5), abs=1e-15)
    assert log_binom_pmf(-1, 3, 0.5) == -math.inf
    assert log_binom_pmf(4, 3, 0.5) == -math.inf
    assert log_binom_pmf(2, 4, 0.3) == pytest.approx(math.log(0.2646), rel=1e-13)


def test_log_binom_pmf_against_scipy():
    r = np.arange(0, 300, 7)
    for p in (0.01, 0.3, 0.5, 0.97):
        for rr in r:
            k = np.arange(rr + 1)
            np.testing.assert_allclose(log_binom_pmf(k, rr, p), binom.logpmf(k, rr, p), rtol=1e-11, atol=1e-11)


def test_log_binom_pmf_rejects_negative_trials():
    with pytest.raises(DomainError):
        log_binom_pmf(0, -1, 0.5)


def test_single_participant():
    assert log_likelihood((1, 0, 0, 0), (0, 1, 0, 0), 0.5) == pytest.approx(math.log(0.5))
    assert log_likelihood((1, 0, 0, 0), (1, 0, 0, 0), 0.5) == -math.inf


def test_total_mismatch_is_impossible():
    assert log_likelihood((2, 1, 1, 1), (1, 1, 1, 1), 0.5) == -math.inf


def test_empty_experiment():
    assert log_likelihood((0, 0, 0, 0), (0, 0, 0, 0), 0.3) == 0.0


def test_matches_assignment_enumeration_small_case():
    t, p = (2, 1, 1, 1), 0.5
    oracle = assignment_distribution(t, p)
    assert len(oracle) == 22  # reachable g among the 56 with total 5
    for g in compositions(5):
        expected = oracle.get(g, 0.0)
        got = math.exp(log_likelihood(t, g, p))
        assert got == pytest.approx(expected, abs=1e-12)
        if expected == 0.0:
            assert log_likelihood(t, g, p) == -math.inf


def test_two_oracles_agree():
    for t in [(1, 2, 0, 3), (3, 0, 2, 1), (2, 2, 2, 2)]:
        a = assignment_distribution(t, 0.3)
        b = draw_distribution(t, 0.3)
        assert a.keys() == b.keys()
        for g in a:
            assert a[g] == pytest.approx(b[g], rel=1e-12)


@pytest.mark.parametrize("p", [0.3, 0.5, 0.7])
def test_normalization_small(p):
    for n in range(0, 7):
        gs = list(compositions(n))
        for t in compositions(n):
            probs = [math.exp(log_likelihood(t, g, p)) for g in gs]
            assert math.fsum(probs) == pytest.approx(1.0, abs=1e-12)


def test_vectorized_matches_scalar():
    rng = np.random.default_rng(3)
    g = GroupCounts((13, 40, 22, 25))
    t = np.array(list(compositions(100)))[rng.choice(176851, 3000, replace=False)]
    table = LogPmfTable(100, 0.37)
    fast = log_likelihood_many(t, g, 0.37, table)
    slow = np.array([log_likelihood(tuple(row), g, 0.37) for row in t])
    assert np.array_equal(np.isinf(fast), np.isinf(slow))
    finite = np.isfinite(slow)
    np.testing.assert_allclose(fast[finite], slow[finite], rtol=1e-12)


def test_vectorized_wrong_total_rows():
    out = log_likelihood_many(np.array([[1, 1, 1, 1], [1, 0, 0, 0]]), (1, 1, 1, 1), 0.5)
    assert out[1] == -math.inf and np.isfinite(out[0])


def test_no_underflow_at_trial_scale():
    ll = log_likelihood((964, 308, 205, 213), (210, 640, 259, 581), 0.5)
    assert np.isfinite(ll) and -50 < ll < 0


@settings(max_examples=200, deadline=None)
@given(
    st.lists(st.integers(0, 30), min_size=4, max_size=4),
    st.lists(st.integers(0, 30), min_size=4, max_size=4),
    st.floats(0.05, 0.95),
)
def test_arm_swap_symmetry(t, g, p):
    # relabelling the arms turns saved participants into killed ones
    t = TypeCounts(t)
    g = GroupCounts(g)
    a = log_likelihood(t, g, p)
    b = log_likelihood(t.swap_saved_killed(), g.swap_arms(), 1 - p)
    if a == -math.inf:
        assert b == -math.inf
    else:
        assert b == pytest.approx(a, rel=1e-10, abs=1e-10)


def test_support_is_exactly_the_feasible_cell_matrices():
    # -inf iff no feasible cell matrix has row sums t
    for g in [(2, 1, 0, 3), (1, 1, 1, 1), (0, 3, 2, 0)]:
        hi = free_var_bounds(g)
        reachable = set()
        for x in np.ndindex(*(hi + 1)):
            x1, x2, x3, x4 = x
            g1, g2, g3, g4 = g
            reachable.add((x1 + x4, g2 - x1 + x2, x3 + g4 - x4, g1 - x3 + g3 - x2))
        for t in compositions(sum(g)):
            assert (log_likelihood(t, g, 0.4) > -math.inf) == (t in reachable)
