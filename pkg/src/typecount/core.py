"""Domain types for the type-by-group count model.

Potential-outcome types are indexed ``0..3`` as live-regardless, saved,
killed, die-regardless. Observed groups are indexed ``0..3`` as
(dead, intervention), (alive, intervention), (dead, control),
(alive, control). Every array and report in the package uses this order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

TYPE_NAMES = ("live_regardless", "saved", "killed", "die_regardless")
GROUP_NAMES = (
    "dead_intervention",
    "alive_intervention",
    "dead_control",
    "alive_control",
)

# (type, group) cells that are logically impossible
STRUCTURAL_ZEROS = ((0, 0), (0, 2), (1, 0), (1, 3), (2, 1), (2, 2), (3, 1), (3, 3))

# (type, group) cell holding each free variable, and the cell absorbing the
# rest of that group's count. Free variable k lives in group FREE_GROUP[k].
FREE_CELLS = ((0, 1), (1, 2), (2, 0), (0, 3))
PARTNER_CELLS = ((1, 1), (3, 2), (3, 0), (2, 3))
FREE_GROUP = (1, 2, 0, 3)


class DomainError(ValueError):
    """Raised when an input violates a model invariant."""


def _as_counts(values, name: str) -> tuple[int, ...]:
    arr = np.asarray(values)
    if arr.shape != (4,):
        raise DomainError(f"{name} must have exactly 4 entries, got shape {arr.shape}")
    out = []
    for v in arr.tolist():
        if isinstance(v, float):
            if not v.is_integer():
                raise DomainError(f"{name} entries must be integers, got {v!r}")
            v = int(v)
        if not isinstance(v, int):
            raise DomainError(f"{name} entries must be integers, got {v!r}")
        if v < 0:
            raise DomainError(f"{name} entries must be nonnegative, got {v}")
        out.append(v)
    return tuple(out)


def check_probability(p: float) -> float:
    p = float(p)
    if not 0.0 < p < 1.0:
        raise DomainError(f"assignment probability must lie in (0, 1), got {p}")
    return p


@dataclass(frozen=True)
class Design:
    """Assignment probability and participant count of a two-arm trial."""

    p: float
    n_total: int

    def __post_init__(self):
        object.__setattr__(self, "p", check_probability(self.p))
        if int(self.n_total) != self.n_total or self.n_total < 0:
            raise DomainError(f"n_total must be a nonnegative integer, got {self.n_total}")
        object.__setattr__(self, "n_total", int(self.n_total))


@dataclass(frozen=True)
class GroupCounts:
    """Observed counts per outcome group."""

    g: tuple[int, ...]

    def __init__(self, g):
        object.__setattr__(self, "g", _as_counts(g, "group counts"))

    def __iter__(self):
        return iter(self.g)

    def __getitem__(self, j):
        return self.g[j]

    @property
    def total(self) -> int:
        return sum(self.g)

    def as_array(self) -> np.ndarray:
        return np.array(self.g, dtype=np.int64)

    def swap_arms(self) -> GroupCounts:
        g1, g2, g3, g4 = self.g
        return GroupCounts((g3, g4, g1, g2))


@dataclass(frozen=True)
class TypeCounts:
    """Counts per potential-outcome type."""

    t: tuple[int, ...]

    def __init__(self, t):
        object.__setattr__(self, "t", _as_counts(t, "type counts"))

    def __iter__(self):
        return iter(self.t)

    def __getitem__(self, i):
        return self.t[i]

    @property
    def total(self) -> int:
        return sum(self.t)

    def as_array(self) -> np.ndarray:
        return np.array(self.t, dtype=np.int64)

    def swap_saved_killed(self) -> TypeCounts:
        t1, t2, t3, t4 = self.t
        return TypeCounts((t1, t3, t2, t4))


def structural_zero_mask() -> np.ndarray:
    """Boolean 4x4 mask, True at the eight cells forced to zero."""
    mask = np.zeros((4, 4), dtype=bool)
    for i, j in STRUCTURAL_ZEROS:
        mask[i, j] = True
    return mask


@dataclass(frozen=True)
class CellMatrix:
    """Participants per (type, group) cell.

    The array is copied and made read-only on construction.
    """

    n: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.array(self.n, dtype=np.int64)
        if arr.shape != (4, 4):
            raise DomainError(f"cell matrix must be 4x4, got shape {arr.shape}")
        if np.any(arr < 0):
            raise DomainError("cell matrix entries must be nonnegative")
        if np.any(arr[structural_zero_mask()] != 0):
            bad = [(i + 1, j + 1) for i, j in STRUCTURAL_ZEROS if arr[i, j] != 0]
            raise DomainError(f"structural-zero cells are nonzero: {bad}")
        arr.setflags(write=False)
        object.__setattr__(self, "n", arr)

    def __repr__(self):
        return f"CellMatrix({self.n.tolist()})"

    def __eq__(self, other):
        return isinstance(other, CellMatrix) and np.array_equal(self.n, other.n)

    def __hash__(self):
        return hash(self.n.tobytes())

    @property
    def type_counts(self) -> TypeCounts:
        return TypeCounts(self.n.sum(axis=1))

    @property
    def group_counts(self) -> GroupCounts:
        return GroupCounts(self.n.sum(axis=0))

    def free_vars(self) -> tuple[int, ...]:
        """Inverse of :func:`cell_matrix_from_free_vars`."""
        return tuple(int(self.n[c]) for c in FREE_CELLS)


def free_var_bounds(g) -> np.ndarray:
    """Upper bounds of the four free variables (lower bounds are zero)."""
    g = GroupCounts(g) if not isinstance(g, GroupCounts) else g
    return np.array([g[j] for j in FREE_GROUP], dtype=np.int64)


def cell_matrix_from_free_vars(x, g) -> CellMatrix:
    """Build the unique feasible cell matrix with free variables ``x``.

    Parameters
    ----------
    x : sequence of 4 ints
        Counts placed in cells (1,2), (2,3), (3,1), (1,4) (1-based), i.e.
        live-regardless in the intervention arm, saved in control, killed
        in intervention and live-regardless in control.
    g : GroupCounts or sequence of 4 ints
        Observed group counts; each free cell's group partner absorbs the
        remainder so that column sums equal ``g``.
    """
    g = g if isinstance(g, GroupCounts) else GroupCounts(g)
    x = _as_counts(x, "free variables")
    hi = free_var_bounds(g)
    for k, (xk, hk) in enumerate(zip(x, hi)):
        if xk > hk:
            raise DomainError(f"free variable x{k + 1}={xk} exceeds its bound {hk}")
    n = np.zeros((4, 4), dtype=np.int64)
    for k, xk in enumerate(x):
        n[FREE_CELLS[k]] = xk
        n[PARTNER_CELLS[k]] = g[FREE_GROUP[k]] - xk
    return CellMatrix(n)


def types_from_free_vars(x: np.ndarray, g) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized row sums and intervention-arm counts for free variables.

    ``x`` has shape ``(..., 4)`` and may be real-valued (continuous
    relaxation). Returns ``(t, a)`` where ``t[..., i]`` is the type total
    and ``a[..., i]`` the number of type ``i`` in the intervention arm.
    """
    g1, g2, g3, g4 = (float(v) for v in g)
    x1, x2, x3, x4 = x[..., 0], x[..., 1], x[..., 2], x[..., 3]
    t = np.stack([x1 + x4, g2 - x1 + x2, x3 + g4 - x4, g1 - x3 + g3 - x2], axis=-1)
    a = np.stack([x1, g2 - x1, x3, g1 - x3], axis=-1)
    return t, a


def reduced_form(g) -> float:
    """Mortality rate in the intervention arm minus that in control."""
    g1, g2, g3, g4 = g if isinstance(g, GroupCounts) else GroupCounts(g)
    if g1 + g2 == 0 or g3 + g4 == 0:
        raise DomainError("reduced form needs at least one participant in each arm")
    return g1 / (g1 + g2) - g3 / (g3 + g4)


@dataclass(frozen=True)
class EstimateResult:
    """Point estimate of the type counts with solver bookkeeping.

    Exactly one of ``objective_value`` (least squares) and
    ``log_likelihood`` (maximum likelihood) is the optimized score; the
    other may be filled in for information.
    """

    t_hat: TypeCounts
    n_hat: CellMatrix | None
    objective_value: float | None = None
    log_likelihood: float | None = None
    ties: int = 1
    diagnostics: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.n_hat is not None and self.n_hat.type_counts != self.t_hat:
            raise DomainError("t_hat must equal the row sums of n_hat")
        if self.objective_value is not None and not np.isfinite(self.objective_value):
            raise DomainError("objective value must be finite")
