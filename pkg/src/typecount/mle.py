"""Maximum likelihood estimation of the type counts.

The likelihood is maximized over integer type vectors with the same total
as the data. Small experiments are solved by enumerating the whole
simplex; larger ones by a seeded multi-start hill climb whose moves shift
participants between two types, which keeps the total fixed.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .core import (
    DomainError,
    EstimateResult,
    GroupCounts,
    TypeCounts,
    cell_matrix_from_free_vars,
    check_probability,
    free_var_bounds,
    types_from_free_vars,
)
from .likelihood import LogPmfTable, likelihood_terms, log_likelihood_many
from .lsq import LsqConfig, solve as lsq_solve
from .rng import stream

DEFAULT_EXACT_CAP = 200
TIE_RTOL = 1e-12



def transfer_moves(radius: int) -> np.ndarray:
    """Every nonzero move composed of at most ``radius`` unit transfers.

    A unit transfer moves one participant from one type to another (12
    choices); composing ``radius`` of them reaches exactly the zero-sum
    integer vectors with L1 norm at most ``2 * radius``.
    """
    r = int(radius)
    rng = range(-r, r + 1)
    moves = [
        d
        for d in itertools.product(rng, repeat=3)
        if abs(sum(d)) <= r and sum(map(abs, d)) + abs(sum(d)) <= 2 * r
    ]
    out = np.array([(*d, -sum(d)) for d in moves if any(d) or sum(d)], dtype=np.int64)
    return out[np.any(out != 0, axis=1)]


def _tie_tol(value: float) -> float:
    return TIE_RTOL * max(1.0, abs(value))


@dataclass(frozen=True)
class MleConfig:
    mode: str = "heuristic"
    restarts: int = 8
    neighborhood_radius: int = 2
    seed: int = 0
    exact_cap: int = DEFAULT_EXACT_CAP

    def __post_init__(self):
        if self.mode not in ("exact", "heuristic"):
            raise DomainError(f"unknown MLE mode {self.mode!r}; expected 'exact' or 'heuristic'")
        if self.restarts < 1:
            raise DomainError("restarts must be at least 1")
        if self.neighborhood_radius < 1:
            raise DomainError("neighborhood_radius must be at least 1")


def simplex_points(n: int) -> np.ndarray:
    """All nonnegative integer 4-vectors summing to ``n``, in lexicographic order."""
    out = []
    for t1 in range(n + 1):
        for t2 in range(n - t1 + 1):
            t3 = np.arange(n - t1 - t2 + 1)
            block = np.empty((t3.size, 4), dtype=np.int64)
            block[:, 0] = t1
            block[:, 1] = t2
            block[:, 2] = t3
            block[:, 3] = n - t1 - t2 - t3
            out.append(block)
    return np.concatenate(out) if out else np.zeros((1, 4), dtype=np.int64)


def modal_cells(t: TypeCounts, g: GroupCounts, p: float):
    """Most probable cell matrix for types ``t`` that produces ``g``."""
    terms = likelihood_terms(t, g, p)
    ell = int(np.argmax(terms))
    c = t[0] + t[2] - g[3] - ell
    return cell_matrix_from_free_vars((ell, t[1] - g[1] + ell, c, t[0] - ell), g)


def _result(t_best, loglik, ties, g, p, diag) -> EstimateResult:
    t_hat = TypeCounts([int(v) for v in t_best])
    return EstimateResult(
        t_hat=t_hat,
        n_hat=modal_cells(t_hat, g, p),
        log_likelihood=float(loglik),
        ties=int(ties),
        diagnostics=diag,
    )


def mle_exact(g, p: float, cap: int = DEFAULT_EXACT_CAP) -> EstimateResult:
    """Maximize the likelihood by enumerating every type vector.

    Ties are broken towards the lexicographically smallest ``t`` and
    counted in ``ties``.
    """
    g = g if isinstance(g, GroupCounts) else GroupCounts(g)
    p = check_probability(p)
    n = g.total
    if n > cap:
        raise DomainError(
            f"exact MLE enumerates the whole simplex and is capped at {cap} participants "
            f"(got {n}); use the heuristic mode for larger experiments"
        )
    pts = simplex_points(n)
    table = LogPmfTable(n, p)
    vals = np.concatenate(
        [log_likelihood_many(pts[i : i + 20_000], g, p, table) for i in range(0, len(pts), 20_000)]
    )
    best = float(vals.max())
    tied = np.flatnonzero(vals >= best - _tie_tol(best))
    diag = {"mode": "exact", "candidates": int(len(pts))}
    return _result(pts[tied[0]], best, tied.size, g, p, diag)


def _random_start(rng: np.random.Generator, g: GroupCounts) -> np.ndarray:
    """Type counts of a uniformly drawn feasible cell matrix (never impossible)."""
    hi = free_var_bounds(g)
    x = rng.integers(0, hi + 1)
    t, _ = types_from_free_vars(x.astype(float), g)
    return np.rint(t).astype(np.int64)


def vertex_starts(g: GroupCounts) -> np.ndarray:
    """Distinct type vectors at the 16 corners of the free-variable box.

    These are the vertices of the set of type vectors that can produce
    ``g``; likelihood maxima often sit on or near them.
    """
    hi = free_var_bounds(g)
    corners = np.array(list(itertools.product((0, 1), repeat=4))) * hi
    t, _ = types_from_free_vars(corners.astype(float), g)
    return np.unique(np.rint(t).astype(np.int64), axis=0)


def _climb(t, g, p, moves, table):
    """Steepest ascent; an accepted move is repeated while that helps."""
    f = float(log_likelihood_many(t[None, :], g, p, table)[0])
    steps = evals = 0
    n = int(t.sum())
    while True:
        cand = t + moves
        cand = cand[np.all(cand >= 0, axis=1)]
        vals = log_likelihood_many(cand, g, p, table)
        evals += len(cand)
        k = int(np.argmax(vals))
        if not vals[k] > f + _tie_tol(f):
            return t, f, steps, evals
        d = cand[k] - t
        ray = t + np.arange(1, n + 1)[:, None] * d
        ray = ray[np.all(ray >= 0, axis=1)]
        rvals = log_likelihood_many(ray, g, p, table)
        evals += len(ray)
        j = int(np.argmax(rvals))
        t, f = ray[j], float(rvals[j])
        steps += 1


def mle_heuristic(g, p: float, cfg: MleConfig | None = None) -> EstimateResult:
    """Multi-start steepest-ascent search over the type simplex.

    Starts are the least-squares estimate, the vertices of the feasible
    type set (see :func:`vertex_starts`) and ``cfg.restarts - 1`` type
    vectors of random feasible cell matrices drawn from per-restart
    streams. Deterministic for a given ``cfg.seed``.
    """
    g = g if isinstance(g, GroupCounts) else GroupCounts(g)
    p = check_probability(p)
    cfg = cfg or MleConfig()
    table = LogPmfTable(g.total, p)
    starts = [lsq_solve(g, p, LsqConfig(seed=cfg.seed)).t_hat.as_array()]
    starts += list(vertex_starts(g))
    starts += [_random_start(stream(cfg.seed, r), g) for r in range(1, cfg.restarts)]
    moves = transfer_moves(cfg.neighborhood_radius)
    finals, steps, evals = [], 0, 0
    start_vals = log_likelihood_many(np.array(starts), g, p, table)
    for t in starts:
        tf, _, s, e = _climb(t, g, p, moves, table)
        finals.append(tf)
        steps += s
        evals += e
    pts = np.unique(np.array(finals), axis=0)  # sorted lexicographically
    vals = log_likelihood_many(pts, g, p, table)
    best = float(vals.max())
    tied = np.flatnonzero(vals >= best - _tie_tol(best))
    diag = {
        "mode": "heuristic",
        "restarts": cfg.restarts,
        "neighborhood_radius": cfg.neighborhood_radius,
        "best_start_log_likelihood": float(start_vals.max()),
        "ascent_steps": steps,
        "evaluations": evals,
    }
    return _result(pts[tied[0]], best, tied.size, g, p, diag)


def estimate(g, p: float, cfg: MleConfig | None = None) -> EstimateResult:
    cfg = cfg or MleConfig()
    if cfg.mode == "exact":
        return mle_exact(g, p, cfg.exact_cap)
    return mle_heuristic(g, p, cfg)
