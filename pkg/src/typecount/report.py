"""Report payloads and their JSON, CSV and text renderings.

Payloads are plain dicts with a fixed key order. Floats are rounded to 12
significant digits before serialization so identical runs give identical
bytes, and a JSON report parses back to exactly the values written.
"""

from __future__ import annotations

import csv
import io
import json
import math

import numpy as np

from .core import GROUP_NAMES, TYPE_NAMES, EstimateResult

SIG_DIGITS = 12


def num(x):
    """Round a float to 12 significant digits; non-finite values become None."""
    if x is None:
        return None
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return int(x)
    x = float(x)
    if not math.isfinite(x):
        return None
    return float(f"{x:.{SIG_DIGITS}g}")


def clean(obj):
    if isinstance(obj, dict):
        return {k: clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, float, np.integer, np.floating)):
        return num(obj)
    return obj


def estimate_payload(res: EstimateResult, g, p) -> dict:
    out = {
        "g": list(g),
        "p": p,
        "t_hat": list(res.t_hat),
        "n_hat": res.n_hat.n.tolist() if res.n_hat is not None else None,
    }
    if res.objective_value is not None:
        out["objective_value"] = res.objective_value
    if res.log_likelihood is not None:
        out["log_likelihood"] = res.log_likelihood
    out["ties"] = res.ties
    out["diagnostics"] = dict(res.diagnostics)
    return clean(out)


def bootstrap_payload(rep, g, p, seed) -> dict:
    return clean(
        {
            "g": list(g),
            "p": p,
            "seed": seed,
            "iterations": rep.iterations,
            "failures": rep.failures,
            "se": rep.se,
            "se_cells": rep.se_cells,
            "mean_t_hat": rep.replicate_estimates.mean(axis=0) if len(rep.replicate_estimates) else None,
        }
    )


def monte_carlo_payload(rep, p, seed, reference=None) -> dict:
    out = {
        "true_t": list(rep.true_t),
        "p": p,
        "seed": seed,
        "m": rep.m,
        "failures": rep.failures,
        "mean_bias": rep.mean_bias,
        "rmse": rep.rmse,
        "sd": rep.sd,
    }
    if reference is not None:
        out["reference"] = reference
    return clean(out)


def replicate_rows(replicates) -> list[dict]:
    rows = []
    for r in replicates:
        row = {"index": r.index}
        row.update({f"g{j + 1}": v for j, v in enumerate(r.g)})
        t = r.t_hat or (None,) * 4
        row.update({f"t{i + 1}": v for i, v in enumerate(t)})
        row["objective"] = num(r.objective)
        row["status"] = "ok" if r.ok else r.error
        rows.append(row)
    return rows


def flatten(payload: dict, prefix: str = "") -> dict:
    """Flatten nested lists/dicts to ``key_1_2`` style scalar columns."""
    out = {}
    for k, v in payload.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(flatten(v, key + "_"))
        elif isinstance(v, list):
            for i, item in enumerate(v):
                if isinstance(item, list):
                    for j, inner in enumerate(item):
                        out[f"{key}_{i + 1}_{j + 1}"] = inner
                else:
                    out[f"{key}_{i + 1}"] = item
        else:
            out[key] = v
    return out


def to_json(payload: dict) -> str:
    return json.dumps(payload, indent=2) + "\n"


def to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    if rows:
        writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    return buf.getvalue()


def _vec(values, names=TYPE_NAMES, fmt="{}"):
    return "  ".join(f"{n}={fmt.format(v) if v is not None else 'n/a'}" for n, v in zip(names, values))


def _matrix_lines(n):
    head = "type \\ group".ljust(18) + "".join(name.rjust(20) for name in GROUP_NAMES)
    lines = [head]
    for name, row in zip(TYPE_NAMES, n):
        lines.append(name.ljust(18) + "".join(str(v).rjust(20) for v in row))
    return lines


def to_text(kind: str, payload: dict) -> str:
    lines = []
    if kind in ("estimate", "mle"):
        lines.append(f"g = {payload['g']}  p = {payload['p']}")
        lines.append("t_hat: " + _vec(payload["t_hat"]))
        if payload.get("n_hat"):
            lines.extend(_matrix_lines(payload["n_hat"]))
        for key in ("objective_value", "log_likelihood"):
            if key in payload:
                lines.append(f"{key}: {payload[key]}")
        lines.append(f"tied optima: {payload['ties']}")
    elif kind == "likelihood":
        lines.append(f"t = {payload['t']}  g = {payload['g']}  p = {payload['p']}")
        lines.append(f"log_likelihood: {payload['log_likelihood']}")
        lines.append(f"probability: {payload['probability']}")
    elif kind == "reduced-form":
        lines.append(f"g = {payload['g']}")
        lines.append(f"reduced form (mortality, intervention minus control): {payload['reduced_form']}")
    elif kind == "bootstrap":
        lines.append(f"g = {payload['g']}  p = {payload['p']}  seed = {payload['seed']}")
        lines.append(f"iterations: {payload['iterations']}  failures: {payload['failures']}")
        lines.append("standard errors: " + _vec(payload["se"], fmt="{:.3f}"))
    elif kind == "montecarlo":
        lines.append(f"true t = {payload['true_t']}  p = {payload['p']}  seed = {payload['seed']}")
        lines.append(f"replicates: {payload['m']}  failures: {payload['failures']}")
        ref = payload.get("reference")
        lines.append("type".ljust(18) + "mean bias".rjust(12) + "rmse".rjust(12) + (
            "ref |bias|".rjust(12) + "ref rmse".rjust(12) if ref else ""))
        for i, name in enumerate(TYPE_NAMES):
            row = name.ljust(18) + f"{payload['mean_bias'][i]:12.2f}{payload['rmse'][i]:12.2f}"
            if ref:
                row += f"{ref['mean_bias']:12.1f}{ref['rmse']:12.1f}"
            lines.append(row)
        if ref:
            lines.append(f"reference: {ref['source']}")
    elif kind == "prowess":
        est = payload["estimate"]
        lines.append(f"PROWESS  g = {est['g']}  p = {est['p']}")
        lines.append("t_hat: " + _vec(est["t_hat"]))
        lines.extend(_matrix_lines(est["n_hat"]))
        lines.append(f"killed and treated, n(3,1): {payload['killed_treated']}")
        lines.append(f"objective: {est['objective_value']}  (published matrix: {payload['reference_objective']})")
        lines.append(f"comparison with published estimate: {payload['comparison']}")
        lines.append(f"reduced form: {payload['reduced_form']}")
        lines.append(
            f"killed per saved: {payload['killed_per_saved']}  "
            f"(|saved - killed| / N = {payload['saved_minus_killed_share']})"
        )
        if payload.get("bootstrap"):
            b = payload["bootstrap"]
            lines.append(f"bootstrap ({b['iterations']} iterations, {b['failures']} failures)")
            lines.append("standard errors: " + _vec(b["se"], fmt="{:.3f}"))
    else:
        lines.append(json.dumps(payload))
    return "\n".join(lines) + "\n"
