from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import lsq_brute, random_groups
from typecount.core import (
    CellMatrix,
    DomainError,
    GroupCounts,
    cell_matrix_from_free_vars,
    free_var_bounds,
    structural_zero_mask,
)
from typecount.lsq import (
    SUBSET_LABELS,
    LsqConfig,
    lower_bound,
    objective,
    objective_x,
    solve,
    subset_errors,
)

PROWESS_G = (210, 640, 259, 581)
# hand expansion of the 15 subset terms with eps = (3, 1, 1/2, 1/2), t = (964, 308, 205, 213)
PROWESS_OBJECTIVE = Fraction(326043751351496394537945166, 686321039582063721289949495)


def prowess_matrix():
    return cell_matrix_from_free_vars((485, 153, 103, 479), PROWESS_G)


def test_subsets_are_all_fifteen():
    assert len(SUBSET_LABELS) == 15
    assert len(set(SUBSET_LABELS)) == 15
    assert SUBSET_LABELS[-1] == (1, 2, 3, 4)


def test_prowess_subset_errors():
    errs = {e.subset: e for e in subset_errors(prowess_matrix(), 0.5)}
    assert [errs[(i,)].epsilon for i in (1, 2, 3, 4)] == [3.0, 1.0, 0.5, 0.5]
    assert errs[(1, 2, 3, 4)].weight_denom == 0.25 * 1690
    assert errs[(2, 3)].epsilon == 1.5


def test_prowess_objective_matches_hand_expansion():
    assert objective(prowess_matrix(), 0.5) == pytest.approx(float(PROWESS_OBJECTIVE), rel=1e-14)


def test_balanced_split_has_zero_objective():
    n = np.zeros((4, 4), dtype=int)
    n[0, 1] = n[0, 3] = 7
    assert objective(CellMatrix(n), 0.5) == 0.0
    assert objective(np.zeros((4, 4), dtype=int), 0.5) == 0.0


def test_objective_rejects_shaded_mass():
    n = np.zeros((4, 4), dtype=int)
    n[1, 0] = 2
    with pytest.raises(DomainError):
        objective(n, 0.5)


def test_vectorized_objective_matches_matrix_form():
    rng = np.random.default_rng(0)
    for g in random_groups(rng, 60, 30):
        hi = free_var_bounds(g)
        xs = rng.integers(0, hi + 1, size=(20, 4))
        p = float(rng.uniform(0.1, 0.9))
        fast = objective_x(xs, g, p)
        slow = [objective(cell_matrix_from_free_vars(x, g), p) for x in xs]
        np.testing.assert_allclose(fast, slow, rtol=1e-12, atol=1e-14)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 200), min_size=4, max_size=4), st.floats(0.05, 0.95), st.data())
def test_full_subset_error_is_fixed_by_data(g, p, data):
    hi = free_var_bounds(g)
    x = [data.draw(st.integers(0, int(h))) for h in hi]
    errs = subset_errors(cell_matrix_from_free_vars(x, g), p)
    full = errs[-1]
    assert full.epsilon == pytest.approx((g[0] + g[1]) - p * sum(g), abs=1e-9)
    assert all(e.weight_denom >= 0 for e in errs)


@pytest.mark.parametrize("k", [1, 2, 5, 13])
def test_all_alive_data(k):
    for mode in ("exact", "relax_and_search", "branch_and_bound"):
        res = solve((0, k, 0, k), 0.5, LsqConfig(mode=mode))
        assert res.t_hat.t == (2 * k, 0, 0, 0)
        assert res.objective_value == 0.0
        assert res.ties == 1


@pytest.mark.parametrize("k", [1, 3, 8])
def test_killed_split_evenly(k):
    res = solve((k, 0, 0, k), 0.5, LsqConfig(mode="exact"))
    assert res.t_hat.t == (0, 0, 2 * k, 0)
    assert res.objective_value == 0.0


@pytest.mark.parametrize("g", [(0, 0, 0, 0), (1, 0, 0, 0), (2, 1, 0, 3), (3, 3, 2, 1), (4, 0, 5, 1), (2, 3, 3, 2)])
@pytest.mark.parametrize("p", [0.5, 0.3])
def test_exact_mode_matches_brute_force(g, p):
    best, args = lsq_brute(g, p)
    res = solve(g, p, LsqConfig(mode="exact"))
    assert res.objective_value == pytest.approx(best, rel=1e-12, abs=1e-14)
    assert res.n_hat.free_vars() == min(args)
    assert res.ties == len(args)


def test_solutions_are_feasible():
    rng = np.random.default_rng(11)
    for g in random_groups(rng, 80, 20):
        res = solve(g, 0.5)
        n = res.n_hat.n
        assert np.all(n >= 0)
        assert np.all(n[structural_zero_mask()] == 0)
        assert tuple(n.sum(axis=0)) == g
        assert res.t_hat.t == tuple(n.sum(axis=1))
        assert sum(res.t_hat) == sum(g)


def test_relax_and_search_reaches_exact_minimum_small():
    rng = np.random.default_rng(2024)
    for k, g in enumerate(random_groups(rng, 25, 40)):
        exact = solve(g, 0.5, LsqConfig(mode="exact"))
        heur = solve(g, 0.5, LsqConfig(seed=k))
        assert heur.objective_value <= exact.objective_value * (1 + 1e-9) + 1e-12


def test_branch_and_bound_matches_exact():
    rng = np.random.default_rng(99)
    for g in random_groups(rng, 40, 10):
        exact = solve(g, 0.5, LsqConfig(mode="exact"))
        bnb = solve(g, 0.5, LsqConfig(mode="branch_and_bound"))
        assert bnb.objective_value == pytest.approx(exact.objective_value, rel=1e-12, abs=1e-14)
        assert bnb.n_hat == exact.n_hat
        assert bnb.ties == exact.ties


def test_lower_bound_is_valid():
    rng = np.random.default_rng(5)
    for g in random_groups(rng, 30, 10):
        hi = free_var_bounds(g)
        lo = rng.integers(0, hi + 1)
        up = np.minimum(lo + rng.integers(0, 4, size=4), hi)
        pts = np.stack(np.meshgrid(*[np.arange(a, b + 1) for a, b in zip(lo, up)], indexing="ij"), -1).reshape(-1, 4)
        lb, _ = lower_bound(lo, up, g, 0.5)
        assert lb <= objective_x(pts, g, 0.5).min() + 1e-12


@pytest.mark.parametrize("seed", [0, 3])
def test_arm_swap_covariance(seed):
    rng = np.random.default_rng(seed)
    for g in random_groups(rng, 40, 15):
        p = float(rng.choice([0.5, 0.3]))
        a = solve(g, p, LsqConfig(mode="exact"))
        b = solve(GroupCounts(g).swap_arms(), 1 - p, LsqConfig(mode="exact"))
        assert b.objective_value == pytest.approx(a.objective_value, rel=1e-12, abs=1e-14)
        if a.ties == 1:
            assert b.t_hat == a.t_hat.swap_saved_killed()


def test_prowess_estimate():
    res = solve(PROWESS_G, 0.5)
    assert res.t_hat.t == (964, 308, 205, 213)
    assert res.n_hat.n[2, 0] == 103
    assert res.objective_value == pytest.approx(float(PROWESS_OBJECTIVE), rel=1e-13)


def test_exact_mode_cap():
    with pytest.raises(DomainError, match="cap"):
        solve(PROWESS_G, 0.5, LsqConfig(mode="exact"))


def test_deterministic():
    g = (30, 41, 25, 37)
    a = solve(g, 0.5, LsqConfig(seed=9))
    b = solve(g, 0.5, LsqConfig(seed=9))
    assert a == b


@pytest.mark.parametrize("kw", [{"mode": "nope"}, {"restarts": 0}, {"max_iterations": 0}])
def test_config_validation(kw):
    with pytest.raises(DomainError):
        LsqConfig(**kw)
