"""Command-line interface.

Exit codes: 2 for configuration errors (bad options, malformed grids), 3 for
data errors (missing or corrupt files), 4 for solver guard errors (state or
leaf caps exceeded).  Every command is deterministic: identical seeds and
thread count reproduce byte-identical output files.

The ``UPMSCHED_THREADS`` environment variable caps the compiled-kernel thread
pool (default 1; rollouts themselves are single-threaded per instance).
"""
from __future__ import annotations

import json
import os
import sys

import click

from .datagen import GenParams, build_dataset, load_records
from .experiment import MissingArtifactError, run_experiment
from .model import ModelConfig, ShapeError, load_params, save_params
from .oracle import (
    BruteForceGuardError,
    MemoGuardError,
    OracleSolver,
    optimal_rollout,
)
from .problem import InvalidInstanceError, ProblemInstance
from .training import Hyper, train, write_history

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_GUARD = 4


def _configure_threads():
    n = os.environ.get("UPMSCHED_THREADS", "1")
    try:
        n = max(1, int(n))
    except ValueError:
        raise click.UsageError(f"UPMSCHED_THREADS must be an integer, got {n!r}")
    if n == 1:
        return  # single-threaded kernels; nothing to configure
    try:
        import numba
        numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))
    except ImportError:
        pass


def _fail(code: int, msg: str):
    click.echo(f"error: {msg}", err=True)
    sys.exit(code)


def _guarded(fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except (MemoGuardError, BruteForceGuardError) as e:
        _fail(EXIT_GUARD, str(e))
    except MissingArtifactError as e:
        _fail(EXIT_DATA, str(e))
    except (FileNotFoundError, json.JSONDecodeError, KeyError,
            InvalidInstanceError, ShapeError, ValueError) as e:
        _fail(EXIT_DATA, f"bad input data: {e}")


def _parse_grid(text: str) -> list[tuple[int, int]]:
    cells = []
    for part in text.split(","):
        try:
            j, m = part.lower().split("x")
            cells.append((int(j), int(m)))
        except ValueError:
            raise click.UsageError(f"grid cell {part!r} is not of the form JxM")
    return cells


@click.group()
def main():
    """Scheduling toolkit: dataset simulation, exact solving, policy
    training and evaluation."""
    _configure_threads()


@main.command()
@click.option("--problems", "n_problems", type=int, required=True,
              help="Number of instances to simulate.")
@click.option("--jobs", type=int, required=True)
@click.option("--machines", type=int, required=True)
@click.option("--seed", type=int, required=True)
@click.option("--out", "out_dir", type=click.Path(), required=True,
              help="Output directory for the dataset files.")
@click.option("--wmax", type=int, default=10, show_default=True)
@click.option("--dmax", type=int, default=30, show_default=True)
@click.option("--scan-cap", type=int, default=4096, show_default=True,
              help="States inspected per bucket when balancing.")
def gen(n_problems, jobs, machines, seed, out_dir, wmax, dmax, scan_cap):
    """Simulate instances and write labeled-state train/validation/test files."""
    if n_problems < 1 or jobs < 1 or machines < 1:
        raise click.UsageError("counts must be positive")
    try:
        params = GenParams(J=jobs, M=machines, seed=seed, w_max=wmax, d_max=dmax)
    except ValueError as e:
        raise click.UsageError(str(e))
    manifest = _guarded(build_dataset, n_problems, params, out_dir,
                        scan_cap=scan_cap)
    for name, info in manifest["splits"].items():
        click.echo(f"{name}: {info['n_records']} states from "
                   f"{info['n_problems']} problems ({info['skipped']} skipped)")


@main.command()
@click.option("--instance", "path", type=click.Path(), required=True,
              help="JSON instance file.")
@click.option("--schedule/--no-schedule", default=True, show_default=True,
              help="Include the optimal schedule in the output.")
def solve(path, schedule):
    """Solve one instance exactly; print value, action values and schedule."""
    def body():
        with open(path) as f:
            prob = ProblemInstance.from_json(f.read())
        solver = OracleSolver(prob)
        av = solver.action_values_key(solver.root_key)
        out = {"v_star": av.v_star, "q_star": list(av.q_star), "best": av.best}
        if schedule:
            sched, cost = optimal_rollout(prob, solver)
            out["schedule"] = [list(step) for step in sched]
            out["cost"] = {"c_max": cost.c_max, "job_tardiness": cost.job_tardiness,
                           "machine_tardiness": cost.machine_tardiness,
                           "total": cost.total}
        click.echo(json.dumps(out, sort_keys=True))
    _guarded(body)


@main.command(name="train")
@click.option("--data", "data_dir", type=click.Path(), required=True,
              help="Dataset directory (train.jsonl, optional validation.jsonl).")
@click.option("--out", "out_path", type=click.Path(), required=True,
              help="Output weights file (.npz).")
@click.option("--seed", type=int, required=True)
@click.option("--epochs", type=int, default=30, show_default=True)
@click.option("--lr", type=float, default=0.001, show_default=True)
@click.option("--batch-size", type=int, default=128, show_default=True)
@click.option("--wmax", type=int, default=10, show_default=True)
def train_cmd(data_dir, out_path, seed, epochs, lr, batch_size, wmax):
    """Train the policy network on a labeled-state dataset."""
    if epochs < 1 or batch_size < 1 or lr <= 0:
        raise click.UsageError("epochs/batch size must be positive, lr > 0")

    def body():
        train_path = os.path.join(data_dir, "train.jsonl")
        val_path = os.path.join(data_dir, "validation.jsonl")
        records = load_records(train_path)
        val = load_records(val_path) if os.path.exists(val_path) else None

        def progress(entry):
            line = f"epoch {entry['epoch']}: loss {entry['train_loss']:.6f}"
            if "val_delta_q" in entry:
                line += f", validation dq {entry['val_delta_q']:.4f}"
            click.echo(line)

        store, history = train(
            records, val,
            hyper=Hyper(lr=lr, batch_size=batch_size, epochs=epochs, seed=seed),
            config=ModelConfig(w_max=wmax), callback=progress)
        save_params(store, out_path)
        write_history(out_path + ".history.csv", history)
        click.echo(f"wrote {out_path}")
    _guarded(body)


@main.command(name="eval")
@click.option("--weights", type=click.Path(), required=True)
@click.option("--grid", type=str, required=True, help="Evaluation cell JxM.")
@click.option("--n", "n_instances", type=int, required=True)
@click.option("--seed", type=int, required=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--policies", type=str, default="network,rule", show_default=True)
@click.option("--data", "data_path", type=click.Path(), default=None,
              help="Labeled-state file for per-bucket decision dq.")
@click.option("--exact-tail/--no-exact-tail", default=True, show_default=True)
def eval_cmd(weights, grid, n_instances, seed, out_dir, policies, data_path,
             exact_tail):
    """Evaluate policies against the exact optimum on fresh instances."""
    cells = _parse_grid(grid)
    if len(cells) != 1:
        raise click.UsageError("eval takes exactly one grid cell; use compare for many")
    if n_instances < 1:
        raise click.UsageError("instance count must be positive")
    J, M = cells[0]
    config = {
        "seed": seed, "weights": weights,
        "delta_v": {"J": J, "M": M, "n": n_instances,
                    "policies": policies.split(","), "exact_tail": exact_tail},
    }
    if data_path:
        config["delta_q"] = {"data": data_path}
    manifest = _guarded(run_experiment, config, out_dir)
    for name, dv in manifest["results"]["delta_v"].items():
        click.echo(f"mean dv {name}: {dv:.4f}")


@main.command()
@click.option("--weights", type=click.Path(), required=True)
@click.option("--grid", type=str, required=True,
              help="Comma-separated cells, e.g. 15x5,20x6.")
@click.option("--n", "n_instances", type=int, required=True)
@click.option("--seed", type=int, required=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--exact-tail/--no-exact-tail", default=True, show_default=True)
def compare(weights, grid, n_instances, seed, out_dir, exact_tail):
    """Rule-over-network cost quotient on cells beyond oracle reach."""
    cells = _parse_grid(grid)
    if n_instances < 1:
        raise click.UsageError("instance count must be positive")
    config = {
        "seed": seed, "weights": weights,
        "compare": {"cells": [list(c) for c in cells], "n": n_instances,
                    "exact_tail": exact_tail},
    }
    manifest = _guarded(run_experiment, config, out_dir)
    for cell, quot in manifest["results"]["compare"].items():
        click.echo(f"mean quotient {cell}: {quot:.4f}")


if __name__ == "__main__":
    main()
