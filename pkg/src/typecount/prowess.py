"""The PROWESS sepsis trial: published inputs and reference estimates."""

from __future__ import annotations

from dataclasses import dataclass

from .core import GroupCounts, TypeCounts, cell_matrix_from_free_vars, reduced_form
from .lsq import LsqConfig, objective, solve
from .resampling import BootstrapReport, bootstrap

G = GroupCounts((210, 640, 259, 581))
P = 0.5

# published least-squares estimates and the cell matrix they imply
REFERENCE_T = TypeCounts((964, 308, 205, 213))
REFERENCE_KILLED_TREATED = 103
REFERENCE_FREE_VARS = (485, 153, 103, 479)

# published Monte Carlo summary for the calibrated design (persons)
REFERENCE_MC_BIAS = 42.0
REFERENCE_MC_RMSE = 124.0


def reference_matrix():
    return cell_matrix_from_free_vars(REFERENCE_FREE_VARS, G)


@dataclass(frozen=True)
class ProwessAnalysis:
    estimate: object
    reference_objective: float
    matches_reference: bool
    dominates_reference: bool
    reduced_form: float
    bootstrap: BootstrapReport | None

    @property
    def killed_per_saved(self) -> float:
        t = self.estimate.t_hat
        return t[2] / t[1] if t[1] else float("nan")


def analyze(cfg: LsqConfig | None = None, iterations: int = 1000, seed: int = 0, workers: int = 1):
    """Point estimate, comparison with the published matrix, reduced form and bootstrap."""
    cfg = cfg or LsqConfig(seed=seed)
    est = solve(G, P, cfg)
    ref_obj = objective(reference_matrix(), P)
    matches = est.t_hat == REFERENCE_T and int(est.n_hat.n[2, 0]) == REFERENCE_KILLED_TREATED
    boot = bootstrap(G, P, iterations, seed, cfg, workers) if iterations > 0 else None
    return ProwessAnalysis(
        estimate=est,
        reference_objective=ref_obj,
        matches_reference=matches,
        dominates_reference=est.objective_value < ref_obj - 1e-12 * max(1.0, ref_obj),
        reduced_form=reduced_form(G),
        bootstrap=boot,
    )
