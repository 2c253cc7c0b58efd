"""Experiment drivers: batch evaluation reports over instance grids.

Outputs are delimited tabular text plus a JSON manifest with every seed and
artifact hash needed to reproduce the run.  Aggregates are plain means of the
per-instance rows, so each summary can be recomputed from its table.  Within
oracle reach the reports carry ΔV against the exact optimum; beyond it only
the pairwise rule-over-network quotient is reported.
"""
from __future__ import annotations

import hashlib
import json
import os

import numpy as np

from . import __version__
from .datagen import GenParams, LabeledState, gen_problem
from .metrics import bucketed_delta_q, delta_v, rule_over_network
from .model import ParamStore
from .oracle import OracleSolver
from .policies import NetworkPolicy, OptimalPolicy, Policy, RulePolicy, rollout


class MissingArtifactError(FileNotFoundError):
    pass


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def instance_seeds(seed: int, J: int, M: int, n: int) -> list[int]:
    """Distinct instance seeds for one (J, M) evaluation cell."""
    rng = np.random.default_rng([seed, J, M])
    out: list[int] = []
    seen = set()
    while len(out) < n:
        s = int(rng.integers(0, 2 ** 62))
        if s not in seen:
            seen.add(s)
            out.append(s)
    return out


def _policy(name: str, store: ParamStore | None) -> Policy:
    if name == "rule":
        return RulePolicy()
    if name == "optimal":
        return OptimalPolicy()
    if name == "network":
        if store is None:
            raise MissingArtifactError("network policy requires trained weights")
        return NetworkPolicy(store)
    raise ValueError(f"unknown policy {name!r}")


def _write_csv(path, header: list[str], rows: list[list]):
    with open(path, "w") as f:
        f.write(",".join(header) + "\n")
        for row in rows:
            f.write(",".join(repr(x) if isinstance(x, float) else str(x)
                            for x in row) + "\n")


def delta_v_table(J: int, M: int, n: int, seed: int, policies: list[str],
                  store: ParamStore | None = None, exact_tail: bool = True,
                  gen_kwargs: dict | None = None):
    """Per-instance schedule costs and ΔV for each policy, plus mean summary."""
    pols = [(name, _policy(name, store)) for name in policies]
    header = ["seed", "v_star"]
    for name, _ in pols:
        header += [f"cost_{name}", f"dv_{name}"]
    rows = []
    sums = {name: 0.0 for name, _ in pols}
    for s in instance_seeds(seed, J, M, n):
        prob = gen_problem(GenParams(J=J, M=M, seed=s, **(gen_kwargs or {})))
        solver = OracleSolver(prob)
        v_star = solver.ensure(solver.root_key)
        row = [s, v_star]
        for name, pol in pols:
            cost = rollout(prob, pol, exact_tail=exact_tail).cost.total
            dv = delta_v(cost, v_star)
            sums[name] += dv
            row += [cost, dv]
        rows.append(row)
    summary = {name: sums[name] / n for name, _ in pols}
    return header, rows, summary


def compare_table(cells: list[tuple[int, int]], n: int, seed: int,
                  store: ParamStore, exact_tail: bool = True,
                  gen_kwargs: dict | None = None):
    """Rule-over-network quotient per instance on cells beyond oracle reach."""
    net = NetworkPolicy(store)
    rule = RulePolicy()
    header = ["J", "M", "seed", "cost_rule", "cost_network", "quotient"]
    rows = []
    summary = {}
    for (J, M) in cells:
        total = 0.0
        for s in instance_seeds(seed, J, M, n):
            prob = gen_problem(GenParams(J=J, M=M, seed=s, **(gen_kwargs or {})))
            c_rule = rollout(prob, rule, exact_tail=exact_tail).cost.total
            c_net = rollout(prob, net, exact_tail=exact_tail).cost.total
            quot = rule_over_network(c_rule, c_net)
            total += quot
            rows.append([J, M, s, c_rule, c_net, quot])
        summary[f"{J}x{M}"] = total / n
    return header, rows, summary


def run_experiment(config: dict, out_dir) -> dict:
    """Run the configured evaluations and write report files plus a manifest.

    Config keys (all sections optional):
      seed            master seed for fresh evaluation instances
      weights         path to trained parameters (needed by network sections)
      delta_q         {"data": labeled-state file}
      delta_v         {"J", "M", "n", "policies": [...], "exact_tail": bool}
      compare         {"cells": [[J, M], ...], "n", "exact_tail": bool}
    """
    os.makedirs(out_dir, exist_ok=True)
    seed = int(config.get("seed", 0))
    manifest = {"version": __version__, "config": config, "seed": seed,
                "artifacts": {}, "results": {}}
    store = None
    if "weights" in config:
        path = config["weights"]
        if not os.path.exists(path):
            raise MissingArtifactError(f"weights file not found: {path}")
        from .model import load_params
        store = load_params(path)
        manifest["artifacts"]["weights_sha256"] = file_sha256(path)

    if "delta_q" in config:
        data = config["delta_q"]["data"]
        if not os.path.exists(data):
            raise MissingArtifactError(f"labeled-state file not found: {data}")
        if store is None:
            raise MissingArtifactError("delta_q section requires weights")
        manifest["artifacts"]["delta_q_data_sha256"] = file_sha256(data)
        from .datagen import load_records
        records = load_records(data)
        rep = bucketed_delta_q(store, records)
        rows = [[j, m, c, v] for (j, m), (v, c) in sorted(rep["buckets"].items())]
        _write_csv(os.path.join(out_dir, "delta_q.csv"),
                   ["bucket_jobs", "bucket_machines", "n_states", "mean_delta_q"],
                   rows)
        manifest["results"]["delta_q_overall"] = rep["overall"]

    if "delta_v" in config:
        c = config["delta_v"]
        header, rows, summary = delta_v_table(
            int(c["J"]), int(c["M"]), int(c["n"]), seed,
            list(c.get("policies", ["rule"])), store=store,
            exact_tail=bool(c.get("exact_tail", True)))
        _write_csv(os.path.join(out_dir, "delta_v.csv"), header, rows)
        _write_csv(os.path.join(out_dir, "delta_v_summary.csv"),
                   ["policy", "mean_delta_v"],
                   [[k, v] for k, v in summary.items()])
        manifest["results"]["delta_v"] = summary

    if "compare" in config:
        c = config["compare"]
        if store is None:
            raise MissingArtifactError("compare section requires weights")
        cells = [tuple(int(x) for x in cell) for cell in c["cells"]]
        header, rows, summary = compare_table(
            cells, int(c["n"]), seed, store,
            exact_tail=bool(c.get("exact_tail", True)))
        _write_csv(os.path.join(out_dir, "compare.csv"), header, rows)
        _write_csv(os.path.join(out_dir, "compare_summary.csv"),
                   ["cell", "mean_quotient"],
                   [[k, v] for k, v in summary.items()])
        manifest["results"]["compare"] = summary

    with open(os.path.join(out_dir, "manifest.json"), "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")
    return manifest
