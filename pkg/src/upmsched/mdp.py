"""Deterministic scheduling MDP: states, actions, transitions and costs.

A decision is required each time a machine becomes free while jobs are
pending.  The free machine either receives one of the pending jobs or is
deactivated (possible only while another machine stays active).  Once no jobs
are pending, every still-active machine deactivates at the end of its last
occupation, and the schedule cost is

    makespan + sum_j w_j * max(0, C_j - d_j) + sum_m omega_m * max(0, D_m - delta_m)

where the makespan is the latest machine deactivation time D_m.
"""
from __future__ import annotations

from dataclasses import dataclass

from .problem import ProblemInstance


class TerminalStateError(ValueError):
    """Raised when a decision is requested for a state with no pending jobs."""


class ContractViolationError(ValueError):
    """Raised when a SimState violates the decision-epoch invariant."""


class InfeasibleActionError(ValueError):
    """Raised when an action is not feasible in the current state."""


class NonTerminalError(ValueError):
    """Raised when a terminal-only operation is applied to a live state."""


@dataclass(frozen=True)
class Action:
    """Assign a pending job (by canonical index) or deactivate the free machine."""

    job: int | None  # canonical job index, or None for deactivation

    @classmethod
    def assign(cls, canonical_job: int) -> "Action":
        return cls(job=int(canonical_job))

    @classmethod
    def deactivate(cls) -> "Action":
        return cls(job=None)

    @property
    def is_deactivate(self) -> bool:
        return self.job is None


@dataclass(frozen=True)
class SimState:
    """Dynamic scheduling state.

    ``busy_until`` is meaningful only for active machines.  ``completions[j]``
    is None while job ``j`` is pending; ``deact_time[m]`` is None while machine
    ``m`` is active.  Deactivated machines never reactivate.
    """

    problem: ProblemInstance
    t: int
    pending: frozenset[int]
    active: tuple[bool, ...]
    busy_until: tuple[int, ...]
    completions: tuple[int | None, ...]
    deact_time: tuple[int | None, ...]

    @property
    def is_terminal(self) -> bool:
        return not self.pending and not any(self.active)

    def n_active(self) -> int:
        return sum(self.active)


def initial_state(problem: ProblemInstance) -> SimState:
    M = problem.n_machines
    return SimState(
        problem=problem,
        t=min(problem.r0),
        pending=frozenset(range(problem.n_jobs)),
        active=(True,) * M,
        busy_until=problem.r0,
        completions=(None,) * problem.n_jobs,
        deact_time=(None,) * M,
    )


@dataclass(frozen=True)
class DecisionState:
    """A SimState put into canonical order, ready for featurization.

    Machines are sorted ascending by remaining runtime, then by higher weight,
    then by earlier deadline; jobs ascending by processing time on the free
    machine, then by higher weight, then by earlier deadline.  Ties keep the
    original index order.  ``job_perm``/``machine_perm`` map canonical
    positions back to original indices.
    """

    free_machine: int  # canonical index; always 0 by construction
    machine_feats: tuple[tuple[int, int, int], ...]  # (rem_runtime, earliness, weight)
    job_feats: tuple[tuple[tuple[int, ...], int, int], ...]  # (p over machines, earliness, weight)
    job_perm: tuple[int, ...]
    machine_perm: tuple[int, ...]
    t: int

    @property
    def n_jobs(self) -> int:
        return len(self.job_feats)

    @property
    def n_machines(self) -> int:
        return len(self.machine_feats)


def sort_state(sim: SimState) -> DecisionState:
    """Canonicalize a SimState into the sorted decision view."""
    if not sim.pending:
        raise TerminalStateError("no pending jobs: no decision required")
    prob = sim.problem
    t = sim.t
    act = [m for m in range(prob.n_machines) if sim.active[m]]
    if not act:
        raise ContractViolationError("no active machine")
    rem = {m: sim.busy_until[m] - t for m in act}
    if any(r < 0 for r in rem.values()) or min(rem.values()) != 0:
        raise ContractViolationError(
            "clock is not at a decision epoch (no machine becomes free at t)")

    eps = {m: max(0, prob.delta[m] - t) for m in act}
    machine_perm = sorted(act, key=lambda m: (rem[m], -prob.omega[m], eps[m], m))
    m0 = machine_perm[0]

    jobs = sorted(sim.pending)
    e = {j: max(0, prob.d[j] - t) for j in jobs}
    job_perm = sorted(jobs, key=lambda j: (prob.p[j][m0], -prob.w[j], e[j], j))

    machine_feats = tuple((rem[m], eps[m], prob.omega[m]) for m in machine_perm)
    job_feats = tuple(
        (tuple(prob.p[j][m] for m in machine_perm), e[j], prob.w[j]) for j in job_perm
    )
    return DecisionState(
        free_machine=0,
        machine_feats=machine_feats,
        job_feats=job_feats,
        job_perm=tuple(job_perm),
        machine_perm=tuple(machine_perm),
        t=t,
    )


def feasible_actions(ds: DecisionState) -> list[Action]:
    acts = [Action.assign(i) for i in range(ds.n_jobs)]
    if ds.n_machines >= 2:
        acts.append(Action.deactivate())
    return acts


def apply_action(sim: SimState, a: Action) -> SimState:
    """Execute an action and advance the clock to the next decision epoch.

    If the transition empties the pending set, all still-active machines
    auto-deactivate at the end of their occupations and the returned state is
    terminal.
    """
    ds = sort_state(sim)
    prob = sim.problem
    t = sim.t
    m0 = ds.machine_perm[0]
    busy = list(sim.busy_until)
    active = list(sim.active)
    pending = set(sim.pending)
    completions = list(sim.completions)
    deact = list(sim.deact_time)

    if a.is_deactivate:
        if ds.n_machines < 2:
            raise InfeasibleActionError("cannot deactivate the only active machine")
        active[m0] = False
        deact[m0] = t
    else:
        if not 0 <= a.job < ds.n_jobs:
            raise InfeasibleActionError(
                f"canonical job index {a.job} out of range for {ds.n_jobs} pending jobs")
        j = ds.job_perm[a.job]
        done = t + prob.p[j][m0]
        busy[m0] = done
        completions[j] = done
        pending.discard(j)

    if pending:
        new_t = min(busy[m] for m in range(prob.n_machines) if active[m])
    else:
        for m in range(prob.n_machines):
            if active[m]:
                deact[m] = max(t, busy[m])
                active[m] = False
        new_t = max(d for d in deact if d is not None)

    return SimState(
        problem=prob,
        t=new_t,
        pending=frozenset(pending),
        active=tuple(active),
        busy_until=tuple(busy),
        completions=tuple(completions),
        deact_time=tuple(deact),
    )


@dataclass(frozen=True)
class CostBreakdown:
    c_max: int
    job_tardiness: int
    machine_tardiness: int

    @property
    def total(self) -> int:
        return self.c_max + self.job_tardiness + self.machine_tardiness


def total_cost(sim: SimState) -> CostBreakdown:
    """Cost of a completed schedule."""
    if not sim.is_terminal:
        raise NonTerminalError("schedule is not complete")
    prob = sim.problem
    c_max = max(sim.deact_time)
    job_tard = sum(
        prob.w[j] * max(0, sim.completions[j] - prob.d[j]) for j in range(prob.n_jobs)
    )
    mach_tard = sum(
        prob.omega[m] * max(0, sim.deact_time[m] - prob.delta[m])
        for m in range(prob.n_machines)
    )
    return CostBreakdown(c_max=c_max, job_tardiness=job_tard, machine_tardiness=mach_tard)


def committed_cost(sim: SimState) -> int:
    """Tardiness already locked in by past assignments and deactivations.

    The cost-to-go of ``sim`` plus this amount equals the total cost of any
    completed continuation (the makespan is always part of the cost-to-go,
    since active machines finish no earlier than already-deactivated ones).
    """
    prob = sim.problem
    c = sum(
        prob.w[j] * max(0, sim.completions[j] - prob.d[j])
        for j in range(prob.n_jobs)
        if sim.completions[j] is not None
    )
    c += sum(
        prob.omega[m] * max(0, sim.deact_time[m] - prob.delta[m])
        for m in range(prob.n_machines)
        if sim.deact_time[m] is not None
    )
    return c
