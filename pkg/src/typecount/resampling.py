"""Bootstrap standard errors and Monte Carlo evaluation of the estimator.

Every replicate ``k`` draws from its own stream ``rng.stream(seed, k)``, so
results do not depend on how replicates are scheduled across workers.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial

import numpy as np

from .core import DomainError, GroupCounts, TypeCounts, check_probability
from .lsq import LsqConfig, solve
from .rng import stream

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Replicate:
    """One bootstrap or Monte Carlo draw and its estimate."""

    index: int
    g: tuple[int, ...]
    t_hat: tuple[int, ...] | None
    n_hat: tuple[tuple[int, ...], ...] | None
    objective: float | None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass(frozen=True)
class BootstrapReport:
    iterations: int
    se: np.ndarray
    se_cells: np.ndarray
    replicate_estimates: np.ndarray
    failures: int
    replicates: tuple[Replicate, ...] = field(repr=False)


@dataclass(frozen=True)
class MonteCarloReport:
    m: int
    true_t: TypeCounts
    mean_bias: np.ndarray
    rmse: np.ndarray
    sd: np.ndarray
    failures: int
    replicates: tuple[Replicate, ...] = field(repr=False)


def simulate_experiment(t, p: float, rng: np.random.Generator) -> GroupCounts:
    """Randomize every participant and tally the observed groups.

    The number of each type assigned to the intervention arm is a binomial
    draw; outcomes then follow from the type.
    """
    t = t if isinstance(t, TypeCounts) else TypeCounts(t)
    p = check_probability(p)
    tt = t.as_array()
    k = rng.binomial(tt, p)
    t1, t2, t3, t4 = tt
    k1, k2, k3, k4 = k
    return GroupCounts(
        (
            int(k3 + k4),
            int(k1 + k2),
            int(t2 - k2 + t4 - k4),
            int(t1 - k1 + t3 - k3),
        )
    )


def _estimate(index, g, p, cfg) -> Replicate:
    try:
        res = solve(g, p, cfg)
    except Exception as exc:  # recorded, excluded from aggregates
        log.warning("replicate %d failed: %s", index, exc)
        return Replicate(index, tuple(g), None, None, None, f"{type(exc).__name__}: {exc}")
    return Replicate(
        index,
        tuple(g),
        res.t_hat.t,
        tuple(map(tuple, res.n_hat.n.tolist())),
        res.objective_value,
    )


def _bootstrap_one(index, g, p, seed, cfg) -> Replicate:
    g = np.asarray(g)
    n = int(g.sum())
    draw = stream(seed, index).multinomial(n, g / n)
    return _estimate(index, GroupCounts(draw), p, cfg)


def _monte_carlo_one(index, t, p, seed, cfg) -> Replicate:
    g = simulate_experiment(t, p, stream(seed, index))
    return _estimate(index, g, p, cfg)


def _run(fn, count, workers):
    if workers is None or workers <= 1:
        return [fn(i) for i in range(count)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        out = list(pool.map(fn, range(count), chunksize=max(1, count // (8 * workers))))
    return sorted(out, key=lambda r: r.index)


def bootstrap(
    g,
    p: float,
    iterations: int = 1000,
    seed: int = 0,
    solver_cfg: LsqConfig | None = None,
    workers: int = 1,
) -> BootstrapReport:
    """Nonparametric bootstrap of the least-squares estimate.

    Each iteration resamples ``sum(g)`` participants with replacement from
    the observed (arm, outcome) groups and re-estimates with ``p`` held at
    its design value. Standard errors are sample standard deviations
    (``ddof=1``) over successful iterations.
    """
    g = g if isinstance(g, GroupCounts) else GroupCounts(g)
    p = check_probability(p)
    if iterations < 1:
        raise DomainError("iterations must be at least 1")
    if g.total == 0:
        raise DomainError("cannot bootstrap an experiment with no participants")
    cfg = solver_cfg or LsqConfig()
    fn = partial(_bootstrap_one, g=g.g, p=p, seed=seed, cfg=cfg)
    reps = _run(fn, iterations, workers)
    good = [r for r in reps if r.ok]
    est = np.array([r.t_hat for r in good], dtype=np.int64).reshape(-1, 4)
    cells = np.array([r.n_hat for r in good], dtype=np.int64).reshape(-1, 4, 4)
    ddof = 1 if len(good) > 1 else 0
    return BootstrapReport(
        iterations=iterations,
        se=est.std(axis=0, ddof=ddof) if len(good) else np.full(4, np.nan),
        se_cells=cells.std(axis=0, ddof=ddof) if len(good) else np.full((4, 4), np.nan),
        replicate_estimates=est,
        failures=len(reps) - len(good),
        replicates=tuple(reps),
    )


def monte_carlo(
    true_t,
    p: float,
    m: int = 1000,
    seed: int = 0,
    solver_cfg: LsqConfig | None = None,
    workers: int = 1,
) -> MonteCarloReport:
    """Simulate ``m`` experiments from ``true_t`` and score the estimator.

    ``mean_bias[i]`` is the mean of ``t_hat[i] - t[i]`` and ``rmse[i]`` the
    root mean of its square, over successful replicates.
    """
    true_t = true_t if isinstance(true_t, TypeCounts) else TypeCounts(true_t)
    p = check_probability(p)
    if m < 1:
        raise DomainError("m must be at least 1")
    cfg = solver_cfg or LsqConfig()
    fn = partial(_monte_carlo_one, t=true_t, p=p, seed=seed, cfg=cfg)
    reps = _run(fn, m, workers)
    good = [r for r in reps if r.ok]
    err = np.array([r.t_hat for r in good], dtype=float).reshape(-1, 4) - true_t.as_array()
    if len(good):
        bias, rmse, sd = err.mean(axis=0), np.sqrt((err**2).mean(axis=0)), err.std(axis=0)
    else:
        bias = rmse = sd = np.full(4, np.nan)
    return MonteCarloReport(
        m=m,
        true_t=true_t,
        mean_bias=bias,
        rmse=rmse,
        sd=sd,
        failures=len(reps) - len(good),
        replicates=tuple(reps),
    )
