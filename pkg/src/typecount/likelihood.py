"""Exact probability of the observed group counts given the type counts.

Within each type the number assigned to the intervention arm is
Binomial(t(i), p), independently across types. Fixing the number ``l`` of
live-regardless participants in the intervention arm pins the other three
intervention counts, so the probability of ``g`` is a one-dimensional sum
over ``l`` of a product of four binomial masses. Everything is evaluated in
log space.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import gammaln, logsumexp

from .core import DomainError, GroupCounts, TypeCounts, check_probability

NEG_INF = -np.inf


def log_binom_pmf(k, r, p):
    """Log of the Binomial(r, p) mass at ``k``; ``-inf`` outside ``0..r``.

    Broadcasts over array arguments.
    """
    check_probability(p)
    k = np.asarray(k)
    r = np.asarray(r)
    if np.any(r < 0):
        raise DomainError("binomial trial count must be nonnegative")
    inside = (k >= 0) & (k <= r)
    kk = np.where(inside, k, 0).astype(float)
    rr = r.astype(float)
    with np.errstate(invalid="ignore"):
        val = (
            gammaln(rr + 1)
            - gammaln(kk + 1)
            - gammaln(rr - kk + 1)
            + kk * math.log(p)
            + (rr - kk) * math.log1p(-p)
        )
    out = np.where(inside, val, NEG_INF)
    return float(out) if out.ndim == 0 else out


def _intervention_counts(t, g, ell):
    """Intervention-arm counts of types 2..4 implied by ``l`` live-regardless."""
    t1, t2, t3, t4 = t
    g1, g2, g3, g4 = g
    return g2 - ell, t1 + t3 - g4 - ell, g1 + g4 + ell - t1 - t3


def ell_range(t, g) -> tuple[int, int]:
    """Inclusive range of ``l`` where all four binomial terms have support.

    Returns an empty range (lo > hi) when ``t`` cannot produce ``g``.
    """
    t1, t2, t3, t4 = t
    g1, g2, g3, g4 = g
    s = t1 + t3 - g4
    lo = max(0, g2 - t2, s - t3, s - g1)
    hi = min(t1, g2, s, s - g1 + t4)
    return lo, hi


def log_likelihood(t, g, p: float) -> float:
    """Log probability of observing ``g`` when the type counts are ``t``."""
    t = t if isinstance(t, TypeCounts) else TypeCounts(t)
    g = g if isinstance(g, GroupCounts) else GroupCounts(g)
    p = check_probability(p)
    if t.total != g.total:
        return NEG_INF
    lo, hi = ell_range(t.t, g.g)
    if lo > hi:
        return NEG_INF
    ell = np.arange(lo, hi + 1)
    b, c, d = _intervention_counts(t.t, g.g, ell)
    terms = (
        log_binom_pmf(ell, t[0], p)
        + log_binom_pmf(b, t[1], p)
        + log_binom_pmf(c, t[2], p)
        + log_binom_pmf(d, t[3], p)
    )
    return float(min(logsumexp(terms), 0.0))


def likelihood_terms(t, g, p: float) -> np.ndarray:
    """Log of each summand, indexed by ``l = 0..t(1)`` (``-inf`` off support)."""
    t = t if isinstance(t, TypeCounts) else TypeCounts(t)
    g = g if isinstance(g, GroupCounts) else GroupCounts(g)
    ell = np.arange(t[0] + 1)
    b, c, d = _intervention_counts(t.t, g.g, ell)
    return (
        log_binom_pmf(ell, t[0], p)
        + log_binom_pmf(b, t[1], p)
        + log_binom_pmf(c, t[2], p)
        + log_binom_pmf(d, t[3], p)
    )


class LogPmfTable:
    """Cached ``log Binomial(r, p)`` masses for ``0 <= k <= r <= n_max``.

    Used by the enumerating estimators, which evaluate the likelihood for
    very many type vectors at the same ``p``.
    """

    def __init__(self, n_max: int, p: float):
        self.n_max = int(n_max)
        self.p = check_probability(p)
        r = np.arange(self.n_max + 1)[:, None]
        k = np.arange(self.n_max + 1)[None, :]
        self.table = log_binom_pmf(k, np.broadcast_to(r, (r.size, k.size)), p)

    def lookup(self, k: np.ndarray, r: np.ndarray) -> np.ndarray:
        inside = (k >= 0) & (k <= r)
        kk = np.where(inside, k, 0)
        return np.where(inside, self.table[r, kk], NEG_INF)


def log_likelihood_many(t: np.ndarray, g, p: float, table: LogPmfTable | None = None):
    """Log-likelihood for each row of an ``(m, 4)`` integer array of type counts.

    Rows whose total differs from ``sum(g)`` get ``-inf``.
    """
    t = np.asarray(t, dtype=np.int64).reshape(-1, 4)
    g = np.asarray(tuple(g), dtype=np.int64)
    n = int(g.sum())
    if table is None or table.n_max < n or table.p != p:
        table = LogPmfTable(max(n, int(t.max(initial=0))), p)
    out = np.full(t.shape[0], NEG_INF)
    ok = t.sum(axis=1) == n
    if not ok.any():
        return out
    tt = t[ok]
    t1, t2, t3, t4 = tt.T
    g1, g2, g3, g4 = g
    s = t1 + t3 - g4
    lo = np.maximum.reduce([np.zeros_like(s), g2 - t2, s - t3, s - g1])
    hi = np.minimum.reduce([t1, np.full_like(s, g2), s, s - g1 + t4])
    width = np.maximum(hi - lo + 1, 0)
    res = np.full(tt.shape[0], NEG_INF)
    live = width > 0
    if live.any():
        span = int(width[live].max())
        off = np.arange(span)[None, :]
        ell = lo[live, None] + off
        valid = off < width[live, None]
        ell = np.where(valid, ell, lo[live, None])
        c = s[live, None] - ell
        terms = (
            table.lookup(ell, t1[live, None])
            + table.lookup(g2 - ell, t2[live, None])
            + table.lookup(c, t3[live, None])
            + table.lookup(g1 - c, t4[live, None])
        )
        terms = np.where(valid, terms, NEG_INF)
        res[live] = np.minimum(logsumexp(terms, axis=1), 0.0)
    out[ok] = res
    return out
