"""Command-line front end.

Examples
--------
    typecount prowess --iterations 1000
    typecount estimate --g 210 640 259 581 --p 0.5
    typecount likelihood --t 2 1 1 1 --g 1 2 1 1 --p 0.5
    typecount montecarlo --t 964 308 205 213 --iterations 50 --format text
    typecount bootstrap --input run.json --format csv --output reps.csv

An ``--input`` JSON file may carry any of ``g``, ``t``, ``p``, ``seed``,
``iterations``, ``restarts``, ``mode``; flags given on the command line
take precedence. ``TYPECOUNT_SEED`` sets the default seed.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys

from . import likelihood, lsq, mle, prowess, report, resampling
from .core import DomainError, GroupCounts, TypeCounts, check_probability, reduced_form

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_SOLVER = 3

COMMANDS = ("estimate", "likelihood", "mle", "bootstrap", "montecarlo", "reduced-form", "prowess")
SEED_ENV = "TYPECOUNT_SEED"

log = logging.getLogger("typecount")


class InputError(DomainError):
    pass


class SolverError(RuntimeError):
    pass


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise InputError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="typecount",
        description="Estimate counts of potential-outcome types in a two-arm binary-outcome trial.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--input", help="JSON file with inputs")
        sp.add_argument("--g", type=int, nargs=4, metavar="G", help="observed group counts")
        sp.add_argument("--t", type=int, nargs=4, metavar="T", help="type counts")
        sp.add_argument("--p", type=float, help="assignment probability (default 0.5)")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--iterations", type=int, help="bootstrap iterations or Monte Carlo replicates")
        sp.add_argument("--restarts", type=int)
        sp.add_argument(
            "--mode",
            choices=["exact", "heuristic", "relax_and_search", "branch_and_bound"],
        )
        sp.add_argument("--radius", type=int, help="MLE neighbourhood radius")
        sp.add_argument("--workers", type=int, default=1)
        sp.add_argument("--format", choices=["json", "csv", "text"], default="json")
        sp.add_argument("--output", help="write the report here instead of stdout")
    return parser


def _load_input(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise InputError(f"cannot read input file {path}: {exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise InputError(f"{path}: top level must be a JSON object")
    return data


def resolve(args) -> dict:
    """Merge file inputs, flags and defaults; validate what the command needs."""
    data = _load_input(args.input) if args.input else {}
    spec = {}
    for key in ("g", "t", "p", "seed", "iterations", "restarts", "mode", "radius"):
        flag = getattr(args, key)
        spec[key] = flag if flag is not None else data.get(key)
    spec["p"] = 0.5 if spec["p"] is None else spec["p"]
    spec["seed"] = _default_seed() if spec["seed"] is None else spec["seed"]
    try:
        check_probability(spec["p"])
    except (TypeError, ValueError) as exc:
        raise InputError(f"field 'p': {exc}") from None
    for key in ("seed", "iterations", "restarts", "radius"):
        v = spec[key]
        if v is not None and (isinstance(v, bool) or not isinstance(v, int)):
            raise InputError(f"field '{key}' must be an integer, got {v!r}")
    need_g = args.command in ("estimate", "likelihood", "mle", "bootstrap", "reduced-form")
    need_t = args.command in ("likelihood", "montecarlo")
    for key, needed, cls in (("g", need_g, GroupCounts), ("t", need_t, TypeCounts)):
        if spec[key] is None:
            if needed:
                raise InputError(f"command '{args.command}' needs field '{key}' (4 counts)")
            continue
        try:
            spec[key] = cls(spec[key])
        except (DomainError, TypeError) as exc:
            raise InputError(f"field '{key}': {exc}") from None
    return spec


def _lsq_cfg(spec, default_mode="relax_and_search"):
    mode = spec["mode"] or default_mode
    if mode == "heuristic":
        raise InputError("mode 'heuristic' applies to the mle command only")
    kw = {"mode": mode, "seed": spec["seed"]}
    if spec["restarts"] is not None:
        kw["restarts"] = spec["restarts"]
    return lsq.LsqConfig(**kw)


def _reference_mc(true_t, p):
    if true_t == prowess.REFERENCE_T and p == prowess.P:
        return {
            "mean_bias": prowess.REFERENCE_MC_BIAS,
            "rmse": prowess.REFERENCE_MC_RMSE,
            "source": "published Monte Carlo, PROWESS calibration, M=1000 (approximate, all types)",
        }
    return None


def execute(spec: dict, command: str, fmt: str, workers: int = 1) -> str:
    p, seed = spec["p"], spec["seed"]
    rows = None
    if command == "estimate":
        res = lsq.solve(spec["g"], p, _lsq_cfg(spec))
        payload = report.estimate_payload(res, spec["g"], p)
    elif command == "mle":
        kw = {"mode": spec["mode"] or "heuristic", "seed": seed}
        if spec["restarts"] is not None:
            kw["restarts"] = spec["restarts"]
        if spec["radius"] is not None:
            kw["neighborhood_radius"] = spec["radius"]
        if kw["mode"] not in ("exact", "heuristic"):
            raise InputError("mle mode must be 'exact' or 'heuristic'")
        res = mle.estimate(spec["g"], p, mle.MleConfig(**kw))
        payload = report.estimate_payload(res, spec["g"], p)
    elif command == "likelihood":
        ll = likelihood.log_likelihood(spec["t"], spec["g"], p)
        payload = report.clean(
            {
                "t": list(spec["t"]),
                "g": list(spec["g"]),
                "p": p,
                "log_likelihood": ll,
                "probability": math.exp(ll),
            }
        )
    elif command == "reduced-form":
        payload = report.clean({"g": list(spec["g"]), "reduced_form": reduced_form(spec["g"])})
    elif command == "bootstrap":
        iters = 1000 if spec["iterations"] is None else spec["iterations"]
        rep = resampling.bootstrap(spec["g"], p, iters, seed, _lsq_cfg(spec), workers)
        if rep.failures == iters:
            raise SolverError("every bootstrap iteration failed")
        payload = report.bootstrap_payload(rep, spec["g"], p, seed)
        rows = report.replicate_rows(rep.replicates)
    elif command == "montecarlo":
        m = 1000 if spec["iterations"] is None else spec["iterations"]
        rep = resampling.monte_carlo(spec["t"], p, m, seed, _lsq_cfg(spec), workers)
        if rep.failures == m:
            raise SolverError("every Monte Carlo replicate failed")
        payload = report.monte_carlo_payload(rep, p, seed, _reference_mc(spec["t"], p))
        rows = report.replicate_rows(rep.replicates)
    elif command == "prowess":
        iters = 1000 if spec["iterations"] is None else spec["iterations"]
        a = prowess.analyze(_lsq_cfg(spec), iters, seed, workers)
        payload = prowess_payload(a, seed)
    else:  # pragma: no cover - argparse restricts choices
        raise InputError(f"unknown command {command!r}")

    if fmt == "json":
        return report.to_json(payload)
    if fmt == "csv":
        return report.to_csv(rows if rows is not None else [report.flatten(payload)])
    return report.to_text(command, payload)


def prowess_payload(a, seed) -> dict:
    est = a.estimate
    t = est.t_hat
    n_total = t.total
    if a.matches_reference:
        comparison = "matches published estimate"
    elif a.dominates_reference:
        comparison = (
            f"dominates published estimate: objective {report.num(est.objective_value)} "
            f"< {report.num(a.reference_objective)}"
        )
    else:
        comparison = (
            f"differs from published estimate: objective {report.num(est.objective_value)} "
            f"vs {report.num(a.reference_objective)}"
        )
    out = {
        "estimate": report.estimate_payload(est, prowess.G, prowess.P),
        "killed_treated": int(est.n_hat.n[2, 0]),
        "reference_t": list(prowess.REFERENCE_T),
        "reference_killed_treated": prowess.REFERENCE_KILLED_TREATED,
        "reference_objective": a.reference_objective,
        "matches_reference": a.matches_reference,
        "dominates_reference": a.dominates_reference,
        "comparison": comparison,
        "reduced_form": a.reduced_form,
        "killed_per_saved": a.killed_per_saved,
        "killed_saved_ratio": [t[2], t[1]],
        "saved_minus_killed_share": abs(t[1] - t[2]) / n_total,
    }
    if a.bootstrap is not None:
        out["bootstrap"] = report.bootstrap_payload(a.bootstrap, prowess.G, prowess.P, seed)
    return report.clean(out)


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        spec = resolve(args)
        out = execute(spec, args.command, args.format, args.workers)
    except DomainError as exc:
        print(f"typecount: invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (SolverError, ArithmeticError, RuntimeError) as exc:
        print(f"typecount: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(out)
    else:
        sys.stdout.write(out)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
