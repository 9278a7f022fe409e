"""Least-squares estimator of the type counts.

The estimator picks the feasible cell matrix whose per-type intervention
counts look most like a fair draw: for every nonempty subset of types, the
excess of its intervention-arm count over ``p`` times its size is squared
and divided by the binomial variance ``p(1-p)`` times the subset size.

All solvers work in the four free variables of
:func:`~typecount.core.cell_matrix_from_free_vars`, so column sums and
structural zeros hold by construction. The objective is a sum of
quadratic-over-linear terms in affine functions of those variables, hence
convex on the feasible box; the branch-and-bound mode relies on that.
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass

import numpy as np

from .core import (
    CellMatrix,
    DomainError,
    EstimateResult,
    GroupCounts,
    check_probability,
    cell_matrix_from_free_vars,
    free_var_bounds,
    structural_zero_mask,
    types_from_free_vars,
)
from .rng import stream

# 15 x 4 membership matrix of the nonempty subsets, ordered by size then
# lexicographically: {1}, {2}, {3}, {4}, {1,2}, ..., {1,2,3,4}
SUBSETS = np.array(
    [
        [1.0 if i in s else 0.0 for i in range(4)]
        for r in range(1, 5)
        for s in itertools.combinations(range(4), r)
    ]
)
SUBSET_LABELS = tuple(
    tuple(i + 1 for i in s) for r in range(1, 5) for s in itertools.combinations(range(4), r)
)

# Jacobians of (type totals, intervention counts) w.r.t. each free variable
_DT = np.array([[1, -1, 0, 0], [0, 1, 0, -1], [0, 0, 1, -1], [1, 0, -1, 0]], dtype=float)
_DA = np.array([[1, -1, 0, 0], [0, 0, 0, 0], [0, 0, 1, -1], [0, 0, 0, 0]], dtype=float)

TIE_RTOL = 1e-12
MODES = ("exact", "relax_and_search", "branch_and_bound")


def _tie_tol(value: float) -> float:
    return TIE_RTOL * max(1.0, abs(value))


@dataclass(frozen=True)
class SubsetError:
    """Randomization error of one subset of types."""

    subset: tuple[int, ...]
    epsilon: float
    weight_denom: float


@dataclass(frozen=True)
class LsqConfig:
    """Solver settings.

    ``exact_cap`` bounds the number of lattice points the ``exact`` mode
    will enumerate. ``branch_and_bound`` is exact as well but prunes with
    convex lower bounds, so it also handles trial-sized inputs.
    """

    mode: str = "relax_and_search"
    restarts: int = 16
    seed: int = 0
    max_iterations: int = 200
    exact_cap: int = 20_000_000

    def __post_init__(self):
        if self.mode not in MODES:
            raise DomainError(f"unknown least-squares mode {self.mode!r}; expected one of {MODES}")
        if self.restarts < 1:
            raise DomainError("restarts must be at least 1")
        if self.max_iterations < 1:
            raise DomainError("max_iterations must be at least 1")


def subset_errors(n: CellMatrix, p: float) -> list[SubsetError]:
    """Randomization error and variance denominator for each nonempty subset."""
    p = check_probability(p)
    arr = n.n if isinstance(n, CellMatrix) else CellMatrix(n).n
    t = arr.sum(axis=1).astype(float)
    eps = arr[:, 0] + arr[:, 1] - p * t
    out = []
    for label, row in zip(SUBSET_LABELS, SUBSETS):
        out.append(SubsetError(label, float(row @ eps), p * (1 - p) * float(row @ t)))
    return out


def objective(n, p: float) -> float:
    """Inverse-variance weighted sum of squared subset errors.

    Subsets with no members contribute zero.
    """
    arr = np.asarray(n.n if isinstance(n, CellMatrix) else n)
    if arr.shape != (4, 4) or np.any(arr[structural_zero_mask()] != 0):
        raise DomainError("objective needs a 4x4 matrix with zero structural cells")
    total = 0.0
    for err in subset_errors(CellMatrix(arr), p):
        if err.weight_denom > 0:
            total += err.epsilon**2 / err.weight_denom
    return total


def objective_x(x, g, p: float) -> np.ndarray:
    """Objective at free-variable points ``x`` of shape ``(..., 4)``.

    Accepts real-valued points for the continuous relaxation.
    """
    x = np.asarray(x, dtype=float)
    t, a = types_from_free_vars(x, g)
    e = (a - p * t) @ SUBSETS.T
    tt = t @ SUBSETS.T
    pos = tt > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(pos, e * e / (p * (1 - p) * np.where(pos, tt, 1.0)), 0.0)
    return terms.sum(axis=-1)


def _gradient(x: np.ndarray, g, p: float) -> np.ndarray:
    t, a = types_from_free_vars(x, g)
    e = (a - p * t) @ SUBSETS.T
    tt = t @ SUBSETS.T
    de = (_DA - p * _DT) @ SUBSETS.T  # (4 vars, 15 subsets)
    dt = _DT @ SUBSETS.T
    pos = tt > 1e-12
    tt_safe = np.where(pos, tt, 1.0)
    # d/dx (e^2 / t) = (2 e de t - e^2 dt) / t^2; zero-size subsets have a
    # zero subgradient since the term is nonnegative and vanishes there
    num = 2 * e * de * tt_safe - e * e * dt
    return np.where(pos, num / tt_safe**2, 0.0).sum(axis=1) / (p * (1 - p))


def _line_min(e, tt, de, dt, lo, hi, pq, tol=1e-11):
    """Minimize sum((e + s de)^2 / (pq (tt + s dt))) over s in [lo, hi].

    The function is convex in ``s``; safeguarded Newton on its derivative.
    """

    def derivs(s):
        u = e + s * de
        v = tt + s * dt
        ok = v > 1e-12
        v = np.where(ok, v, 1.0)
        d1 = np.where(ok, (2 * u * de * v - u * u * dt) / (v * v), 0.0).sum()
        w = de * v - u * dt
        d2 = np.where(ok, 2 * w * w / (v * v * v), 0.0).sum()
        return d1, d2

    a, b = lo, hi
    d_a, _ = derivs(a)
    if d_a >= 0:
        return a
    d_b, _ = derivs(b)
    if d_b <= 0:
        return b
    s = 0.0 if a < 0.0 < b else 0.5 * (a + b)
    for _ in range(100):
        d1, d2 = derivs(s)
        if d1 > 0:
            b = s
        else:
            a = s
        if b - a < tol:
            break
        step = s - d1 / d2 if d2 > 0 else None
        if step is None or not (a < step < b):
            step = 0.5 * (a + b)
        if abs(step - s) < tol:
            s = step
            break
        s = step
    return s


def _coordinate_descent(x0, lo, hi, g, p, max_iterations, tol=1e-10):
    """Exact per-coordinate minimization of the relaxed objective."""
    x = np.clip(np.asarray(x0, dtype=float), lo, hi)
    pq = p * (1 - p)
    de_all = (_DA - p * _DT) @ SUBSETS.T
    dt_all = _DT @ SUBSETS.T
    f = float(objective_x(x, g, p))
    sweeps = 0
    for sweeps in range(1, max_iterations + 1):
        f_old = f
        for j in range(4):
            t, a = types_from_free_vars(x, g)
            e = (a - p * t) @ SUBSETS.T
            tt = t @ SUBSETS.T
            s = _line_min(e, tt, de_all[j], dt_all[j], lo[j] - x[j], hi[j] - x[j], pq)
            x[j] = min(max(x[j] + s, lo[j]), hi[j])
        f = float(objective_x(x, g, p))
        if f_old - f < tol:
            break
    return x, f, sweeps


_NEIGHBORS = np.array([d for d in itertools.product((-1, 0, 1), repeat=4) if any(d)])
_NEIGHBORS2 = np.array([d for d in itertools.product(range(-2, 3), repeat=4) if any(d)])
_CORNERS = np.array(list(itertools.product((0, 1), repeat=4)))


def _pick(points: np.ndarray, values: np.ndarray):
    """Lexicographically smallest point among the minimal values."""
    best = values.min()
    tied = points[values <= best + _tie_tol(best)]
    order = np.lexsort(tied.T[::-1])
    return tied[order[0]], float(best), tied


def _descend(x, f, hi, g, p, neighbors):
    """Steepest lattice descent; each accepted direction is followed as far
    as it keeps improving (the objective is convex along any line)."""
    steps = 0
    while True:
        cand = x + neighbors
        cand = cand[np.all((cand >= 0) & (cand <= hi), axis=1)]
        if cand.size == 0:
            return x, f, steps
        vals = objective_x(cand, g, p)
        k = int(np.argmin(vals))
        if not vals[k] < f - _tie_tol(f):
            return x, f, steps
        d = cand[k] - x
        with np.errstate(divide="ignore", invalid="ignore"):
            room = np.where(d > 0, (hi - x) // np.where(d > 0, d, 1), np.where(d < 0, x // np.where(d < 0, -d, 1), np.iinfo(np.int64).max))
        reach = int(room.min())
        ray = x + np.arange(1, reach + 1)[:, None] * d
        rvals = objective_x(ray, g, p)
        j = int(np.argmin(rvals))
        x, f = ray[j], float(rvals[j])
        steps += j + 1


def _polish(xr, hi, g, p):
    """Round a relaxed point and descend on the integer lattice.

    Starts from the best of the floor/ceil corners, takes steepest steps in
    the 3^4 - 1 neighbourhood, then re-checks the radius-2 neighbourhood
    and resumes if that finds anything lower.
    """
    base = np.floor(xr).astype(np.int64)
    pts = np.clip(base + _CORNERS, 0, hi)
    x, f, _ = _pick(pts, objective_x(pts, g, p))
    steps = 0
    while True:
        x, f, k1 = _descend(x, f, hi, g, p, _NEIGHBORS)
        x, f, k2 = _descend(x, f, hi, g, p, _NEIGHBORS2)
        steps += k1 + k2
        if k2 == 0:
            return x, f, steps


def _start_point(index: int, seed: int, hi: np.ndarray) -> np.ndarray:
    """Restart 0 is the box centre; then alternate box corners and random points."""
    hi = hi.astype(float)
    if index == 0:
        return hi / 2
    if index % 2 == 1:
        return _CORNERS[(index // 2) % 16] * hi
    return stream(seed, index).uniform(0.0, hi)


def _relax_and_search(g, p, cfg: LsqConfig):
    hi = free_var_bounds(g)
    lo = np.zeros(4)
    finals = []
    sweeps_total = steps_total = 0
    for r in range(cfg.restarts):
        x0 = _start_point(r, cfg.seed, hi)
        xr, _, sweeps = _coordinate_descent(x0, lo, hi.astype(float), g, p, cfg.max_iterations)
        for start in (xr, x0):
            xi, fi, steps = _polish(start, hi, g, p)
            finals.append(xi)
            steps_total += steps
        sweeps_total += sweeps
    pts = np.unique(np.array(finals), axis=0)
    x, f, tied = _pick(pts, objective_x(pts, g, p))
    diag = {
        "restarts": cfg.restarts,
        "relaxation_sweeps": sweeps_total,
        "lattice_steps": steps_total,
        "distinct_local_minima": int(pts.shape[0]),
    }
    return x, f, int(tied.shape[0]), diag


def _box_points(lo, hi):
    axes = [np.arange(a, b + 1) for a, b in zip(lo, hi)]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 4)


def box_size(g) -> int:
    return int(np.prod(free_var_bounds(g) + 1, dtype=object))


def _exact(g, p, cfg: LsqConfig):
    hi = free_var_bounds(g)
    size = box_size(g)
    if size > cfg.exact_cap:
        raise DomainError(
            f"exact enumeration needs {size} lattice points, above the cap of "
            f"{cfg.exact_cap}; use relax_and_search or branch_and_bound"
        )
    best, best_x, ties = np.inf, None, 0
    inner = int(np.prod(hi[1:] + 1))
    rows = max(1, 2_000_000 // inner)
    for start in range(0, int(hi[0]) + 1, rows):
        stop = min(int(hi[0]), start + rows - 1)
        pts = _box_points([start, 0, 0, 0], [stop, *hi[1:]])
        vals = objective_x(pts, g, p)
        k = int(np.argmin(vals))
        v = float(vals[k])
        if best_x is None or v < best - _tie_tol(best):
            best = v
            near = vals <= v + _tie_tol(v)
            best_x, ties = pts[np.argmax(near)], int(near.sum())
        elif v <= best + _tie_tol(best):
            ties += int((vals <= best + _tie_tol(best)).sum())
    return best_x, best, ties, {"lattice_points": size}


def lower_bound(lo, hi, g, p, max_iterations=50):
    """Certified lower bound of the relaxed objective over an integer box.

    Runs coordinate descent inside the box, then adds the most negative
    first-order change the box admits (a Frank-Wolfe gap bound, valid
    because the objective is convex).
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    x, f, _ = _coordinate_descent((lo + hi) / 2, lo, hi, g, p, max_iterations, tol=1e-13)
    grad = _gradient(x, g, p)
    gap = np.minimum(grad * (lo - x), grad * (hi - x)).sum()
    return f + min(gap, 0.0), x


def _branch_and_bound(g, p, cfg: LsqConfig, leaf_size=4096):
    x_inc, f_inc, _, seed_diag = _relax_and_search(g, p, cfg)
    hi = free_var_bounds(g)
    ties = [x_inc]
    nodes = leaves = pruned = 0
    root_lb, _ = lower_bound(np.zeros(4), hi, g, p)
    heap = [(root_lb, 0, np.zeros(4, dtype=np.int64), hi.copy())]
    counter = 1
    while heap:
        lb, _, blo, bhi = heapq.heappop(heap)
        if lb > f_inc + _tie_tol(f_inc):
            pruned += 1 + len(heap)
            break
        nodes += 1
        if np.prod(bhi - blo + 1) <= leaf_size:
            leaves += 1
            pts = _box_points(blo, bhi)
            vals = objective_x(pts, g, p)
            v = float(vals.min())
            if v < f_inc - _tie_tol(f_inc):
                f_inc, ties = v, []
            if v <= f_inc + _tie_tol(f_inc):
                ties.extend(pts[vals <= f_inc + _tie_tol(f_inc)])
            continue
        k = int(np.argmax(bhi - blo))
        mid = (blo[k] + bhi[k]) // 2
        for clo, chi in ((blo.copy(), bhi.copy()), (blo.copy(), bhi.copy())):
            if counter % 2:
                chi[k] = mid
            else:
                clo[k] = mid + 1
            clb, _ = lower_bound(clo, chi, g, p)
            if clb <= f_inc + _tie_tol(f_inc):
                heapq.heappush(heap, (clb, counter, clo, chi))
            else:
                pruned += 1
            counter += 1
    pts = np.unique(np.array(ties), axis=0)
    x, f, tied = _pick(pts, objective_x(pts, g, p))
    diag = dict(seed_diag, nodes=nodes, leaves=leaves, pruned=pruned)
    return x, f, int(tied.shape[0]), diag


def solve(g, p: float, cfg: LsqConfig | None = None) -> EstimateResult:
    """Least-squares estimate of the type counts from group counts ``g``."""
    g = g if isinstance(g, GroupCounts) else GroupCounts(g)
    p = check_probability(p)
    cfg = cfg or LsqConfig()
    if cfg.mode == "exact":
        x, _, ties, diag = _exact(g, p, cfg)
    elif cfg.mode == "branch_and_bound":
        x, _, ties, diag = _branch_and_bound(g, p, cfg)
    else:
        x, _, ties, diag = _relax_and_search(g, p, cfg)
    n = cell_matrix_from_free_vars([int(v) for v in x], g)
    diag = dict(diag, mode=cfg.mode)
    return EstimateResult(
        t_hat=n.type_counts,
        n_hat=n,
        objective_value=objective(n, p),
        ties=ties,
        diagnostics=diag,
    )
