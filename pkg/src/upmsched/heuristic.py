"""Dispatching rule tailored to the compound makespan/tardiness objective.

Jobs are scanned in canonical order; the free machine takes the first job
that could not finish strictly sooner on another active machine (counting the
other machine's remaining runtime).  If every job has a strictly faster
alternative, the free machine deactivates when another machine is active; a
single remaining machine must take the first job instead.
"""
from __future__ import annotations

from .mdp import Action, DecisionState


def rule_action(ds: DecisionState) -> Action:
    n_machines = ds.n_machines
    for i, (p_row, _e, _w) in enumerate(ds.job_feats):
        p_free = p_row[0]
        sooner_elsewhere = any(
            ds.machine_feats[m][0] + p_row[m] < p_free for m in range(1, n_machines)
        )
        if not sooner_elsewhere:
            return Action.assign(i)
    if n_machines >= 2:
        return Action.deactivate()
    return Action.assign(0)
