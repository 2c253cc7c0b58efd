"""Decision policies and schedule rollout.

A policy maps a canonical decision state to one feasible action.  Rollouts
optionally hand the endgame to the exact solver once the remaining state is
small, which keeps the learned and rule policies focused on the decisions
that matter while the tail stays cheap to solve exactly.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .encoding import encode_state
from .heuristic import rule_action
from .mdp import (
    Action,
    CostBreakdown,
    DecisionState,
    SimState,
    apply_action,
    feasible_actions,
    initial_state,
    sort_state,
    total_cost,
)
from .model import ParamStore, forward
from .oracle import DEFAULT_MEMO_CAP, OracleSolver
from .problem import ProblemInstance

# exact completion is cheap below these sizes
CUTOFF_PENDING = 2
CUTOFF_PENDING_SINGLE_MACHINE = 8


class Policy:
    """Maps a decision state to a feasible action."""

    name = "policy"

    def select(self, ds: DecisionState, sim: SimState) -> Action:
        raise NotImplementedError


class RulePolicy(Policy):
    """Tailored dispatching rule; needs no lookahead."""

    name = "rule"

    def select(self, ds: DecisionState, sim: SimState) -> Action:
        return rule_action(ds)


class NetworkPolicy(Policy):
    """Argmax of the pointer network's action distribution.

    Ties break toward the lowest canonical slot; the deactivation slot is
    masked whenever deactivation is infeasible.
    """

    name = "network"

    def __init__(self, store: ParamStore):
        self.store = store

    def scores(self, ds: DecisionState) -> np.ndarray:
        return forward(self.store, encode_state(ds, self.store.config.w_max))

    def select(self, ds: DecisionState, sim: SimState) -> Action:
        y = self.scores(ds)
        if ds.n_machines < 2:
            y = y[:-1]
        i = int(np.argmax(y))
        return Action.deactivate() if i == ds.n_jobs else Action.assign(i)


class OptimalPolicy(Policy):
    """Argmin-Q against the exact solver; one solver per instance."""

    name = "optimal"

    def __init__(self, memo_cap: int = DEFAULT_MEMO_CAP):
        self.memo_cap = memo_cap
        self._solvers: dict[int, OracleSolver] = {}

    def _solver(self, sim: SimState) -> OracleSolver:
        key = id(sim.problem)
        if key not in self._solvers:
            self._solvers.clear()  # one live instance at a time
            self._solvers[key] = OracleSolver(sim, memo_cap=self.memo_cap)
        return self._solvers[key]

    def select(self, ds: DecisionState, sim: SimState) -> Action:
        av = self._solver(sim).action_values(sim)
        return feasible_actions(ds)[av.best]


@dataclass(frozen=True)
class RolloutResult:
    schedule: tuple[tuple[int, int, int | None], ...]  # (t, machine, job|None)
    cost: CostBreakdown
    n_decisions: int       # decisions taken by the policy itself
    n_exact_tail: int      # decisions delegated to the exact endgame solver


def _in_cutoff(sim: SimState) -> bool:
    pend = len(sim.pending)
    return pend <= CUTOFF_PENDING or (
        sim.n_active() == 1 and pend <= CUTOFF_PENDING_SINGLE_MACHINE)


def rollout(start: SimState | ProblemInstance, policy: Policy,
            exact_tail: bool = True,
            tail_memo_cap: int = DEFAULT_MEMO_CAP) -> RolloutResult:
    """Run ``policy`` to a complete schedule.

    With ``exact_tail`` the endgame (two or fewer pending jobs, or a single
    active machine with at most eight) is completed by the exact solver.
    Schedule entries carry original machine and job indices.
    """
    sim = initial_state(start) if isinstance(start, ProblemInstance) else start
    schedule: list[tuple[int, int, int | None]] = []
    n_dec = 0
    n_tail = 0
    tail_solver: OracleSolver | None = None
    while not sim.is_terminal:
        ds = sort_state(sim)
        if exact_tail and _in_cutoff(sim):
            if tail_solver is None:
                tail_solver = OracleSolver(sim, memo_cap=tail_memo_cap)
            act = feasible_actions(ds)[tail_solver.action_values(sim).best]
            n_tail += 1
        else:
            act = policy.select(ds, sim)
            n_dec += 1
        m0 = ds.machine_perm[0]
        job = None if act.is_deactivate else ds.job_perm[act.job]
        schedule.append((sim.t, m0, job))
        sim = apply_action(sim, act)
    return RolloutResult(schedule=tuple(schedule), cost=total_cost(sim),
                         n_decisions=n_dec, n_exact_tail=n_tail)
