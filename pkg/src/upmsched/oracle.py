"""Exact Bellman solver for the scheduling MDP.

``OracleSolver`` memoizes optimal cost-to-go values over packed integer state
keys and answers per-action values, optimal rollouts, and full reachable-state
enumeration.  A numba backend handles states whose keys fit into 63 bits; a
pure-Python twin with identical semantics covers everything else.
``brute_force_value`` is an independent enumeration oracle used to validate
the solver.
"""
from __future__ import annotations

import sys
from dataclasses import dataclass

import numpy as np

from .mdp import (
    DecisionState,
    SimState,
    TerminalStateError,
    apply_action,
    committed_cost,
    feasible_actions,
    initial_state,
    sort_state,
    total_cost,
)
from .problem import ProblemInstance

try:
    from . import _kernels
    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    _kernels = None
    _HAVE_NUMBA = False

DEFAULT_MEMO_CAP = 50_000_000
DEFAULT_LEAF_CAP = 100_000_000


class MemoGuardError(RuntimeError):
    """The memoization table exceeded its configured entry cap."""


class BruteForceGuardError(RuntimeError):
    """The brute-force enumeration exceeded its configured leaf cap."""


@dataclass(frozen=True)
class ActionValues:
    """Optimal cost-to-go of a state and of each feasible action.

    ``q_star`` is ordered like :func:`upmsched.mdp.feasible_actions`:
    assignments in canonical job order, then deactivation if feasible.
    ``best`` is the argmin with ties going to the lowest index.
    """

    v_star: int
    q_star: tuple[int, ...]
    best: int


def targets(av: ActionValues) -> np.ndarray:
    """Supervised target vector: softmax over actions of v_star / q_star."""
    q = np.asarray(av.q_star, dtype=np.float64)
    if np.any(q == 0):
        raise ValueError("zero Q-value: state has no positive cost-to-go")
    scores = av.v_star / q
    ex = np.exp(scores - scores.max())
    return ex / ex.sum()


class OracleSolver:
    """Memoized exact solver rooted at one state of one problem instance.

    The solver compacts the root's pending jobs and active machines to
    indices 0..J'-1 / 0..M'-1 and is valid for every state reachable from the
    root.  One instance is single-threaded; use separate solvers per thread.
    """

    def __init__(self, root: SimState | ProblemInstance,
                 memo_cap: int = DEFAULT_MEMO_CAP, use_numba: bool | None = None):
        if isinstance(root, ProblemInstance):
            root = initial_state(root)
        if not root.pending:
            raise TerminalStateError("cannot build a solver for a terminal state")
        self.root = root
        self.problem = root.problem
        self.memo_cap = memo_cap

        self.job_ids = tuple(sorted(root.pending))
        self.mach_ids = tuple(m for m in range(self.problem.n_machines) if root.active[m])
        self._job_index = {j: i for i, j in enumerate(self.job_ids)}
        self._mach_index = {m: i for i, m in enumerate(self.mach_ids)}
        self.J = len(self.job_ids)
        self.M = len(self.mach_ids)

        self.p = np.array(
            [[self.problem.p[j][m] for m in self.mach_ids] for j in self.job_ids],
            dtype=np.int64)
        self.d = np.array([self.problem.d[j] for j in self.job_ids], dtype=np.int64)
        self.w = np.array([self.problem.w[j] for j in self.job_ids], dtype=np.int64)
        self.delta = np.array([self.problem.delta[m] for m in self.mach_ids], dtype=np.int64)
        self.omega = np.array([self.problem.omega[m] for m in self.mach_ids], dtype=np.int64)

        busy0 = [root.busy_until[m] for m in self.mach_ids]
        bound = max(busy0) + int(self.p.max(axis=1).sum())
        self.BB = max(1, bound.bit_length())
        bits = self.J + self.M + self.M * self.BB
        if use_numba is None:
            use_numba = _HAVE_NUMBA and bits <= 62
        elif use_numba and (not _HAVE_NUMBA or bits > 62):
            raise ValueError("state keys do not fit the numba backend")
        self._numba = use_numba
        self.memo = _kernels.new_memo() if use_numba else {}
        self.root_key = self.key_for(root)

    # -- key handling -------------------------------------------------------

    def key_for(self, sim: SimState) -> int:
        """Packed key of a state reachable from the solver root."""
        mask = 0
        for j in sim.pending:
            i = self._job_index.get(j)
            if i is None:
                raise ValueError(f"job {j} is outside this solver's job set")
            mask |= 1 << i
        active = 0
        rest = 0
        for m in range(self.problem.n_machines):
            if sim.active[m]:
                i = self._mach_index.get(m)
                if i is None:
                    raise ValueError(f"machine {m} is outside this solver's machine set")
                active |= 1 << i
                rest |= int(sim.busy_until[m]) << (i * self.BB)
        return mask | (active << self.J) | (rest << (self.J + self.M))

    def _unpack(self, key: int):
        mask = key & ((1 << self.J) - 1)
        active = (key >> self.J) & ((1 << self.M) - 1)
        rest = key >> (self.J + self.M)
        busy = [(rest >> (m * self.BB)) & ((1 << self.BB) - 1) for m in range(self.M)]
        return mask, active, busy

    def sim_for(self, key: int) -> SimState:
        """Reconstruct a featurization-ready SimState from a key.

        True completion and deactivation times of entities scheduled between
        the root and this state are not tracked by the key; they are filled
        with the state clock, which leaves every cost-to-go unchanged (the
        same placeholder appears in committed and terminal cost alike and a
        placeholder never exceeds any later deactivation time).
        """
        mask, active, busy = self._unpack(key)
        pending = frozenset(self.job_ids[i] for i in range(self.J) if mask >> i & 1)
        act = [False] * self.problem.n_machines
        bus = [0] * self.problem.n_machines
        for i, m in enumerate(self.mach_ids):
            if active >> i & 1:
                act[m] = True
                bus[m] = busy[i]
        t = min(busy[i] for i in range(self.M) if active >> i & 1)
        return SimState(
            problem=self.problem, t=t, pending=pending, active=tuple(act),
            busy_until=tuple(bus),
            completions=tuple(None if j in pending else t
                              for j in range(self.problem.n_jobs)),
            deact_time=tuple(None if a else t for a in act),
        )

    # -- core DP ------------------------------------------------------------

    def _terminal_value(self, active: int, busy) -> int:
        c_max = 0
        tard = 0
        for m in range(self.M):
            if active >> m & 1:
                b = busy[m]
                c_max = max(c_max, b)
                if b > self.delta[m]:
                    tard += int(self.omega[m]) * (b - int(self.delta[m]))
        return c_max + tard

    def _free_machine(self, active: int, busy):
        t = min(busy[m] for m in range(self.M) if active >> m & 1)
        m0 = -1
        best = None
        for m in range(self.M):
            if active >> m & 1 and busy[m] == t:
                k = (-int(self.omega[m]), max(0, int(self.delta[m]) - t))
                if best is None or k < best:
                    best = k
                    m0 = m
        return t, m0

    def _dp_python(self, key0: int) -> int:
        memo = self.memo
        J, M, BB = self.J, self.M, self.BB
        p, d, w = self.p, self.d, self.w
        delta, omega = self.delta, self.omega
        bbmask = (1 << BB) - 1
        sys.setrecursionlimit(max(sys.getrecursionlimit(), 10_000))

        def value(key: int) -> int:
            mask, active, busy = self._unpack(key)
            if mask == 0:
                return self._terminal_value(active, busy)
            v = memo.get(key)
            if v is not None:
                return v
            t, m0 = self._free_machine(active, busy)
            rest = key >> (J + M)
            v = 1 << 62
            for j in range(J):
                if mask >> j & 1:
                    nb = t + int(p[j, m0])
                    commit = int(w[j]) * max(0, nb - int(d[j]))
                    nrest = (rest & ~(bbmask << (m0 * BB))) | (nb << (m0 * BB))
                    cv = commit + value((mask & ~(1 << j)) | (active << J) | (nrest << (J + M)))
                    v = min(v, cv)
            if bin(active).count("1") >= 2:
                commit = int(omega[m0]) * max(0, t - int(delta[m0]))
                nrest = rest & ~(bbmask << (m0 * BB))
                cv = commit + value(mask | ((active & ~(1 << m0)) << J) | (nrest << (J + M)))
                v = min(v, cv)
            memo[key] = v
            if len(memo) > self.memo_cap:
                raise MemoGuardError(f"memo cap of {self.memo_cap} entries exceeded")
            return v

        return value(key0)

    def ensure(self, key: int) -> int:
        """Solve from ``key`` if needed and return its optimal cost-to-go."""
        mask = key & ((1 << self.J) - 1)
        if mask == 0:
            _, active, busy = self._unpack(key)
            return self._terminal_value(active, busy)
        v = self.memo.get(key) if not self._numba else (
            self.memo[key] if key in self.memo else None)
        if v is not None:
            return int(v)
        if self._numba:
            v = _kernels.dp_fill(self.memo, key, self.J, self.M, self.BB,
                                 self.p, self.d, self.w, self.delta, self.omega,
                                 self.memo_cap)
            if v < 0:
                raise MemoGuardError(f"memo cap of {self.memo_cap} entries exceeded")
            return int(v)
        return self._dp_python(key)

    def value(self, sim: SimState) -> int:
        return self.ensure(self.key_for(sim))

    # -- per-state labels ---------------------------------------------------

    def _q_canonical(self, key: int):
        """Q per feasible action in canonical order, plus the job order used."""
        mask, active, busy = self._unpack(key)
        if mask == 0:
            raise TerminalStateError("terminal state has no actions")
        self.ensure(key)
        t, m0 = self._free_machine(active, busy)
        rest = key >> (self.J + self.M)
        bbmask = (1 << self.BB) - 1
        jobs = [j for j in range(self.J) if mask >> j & 1]
        jobs.sort(key=lambda j: (int(self.p[j, m0]), -int(self.w[j]),
                                 max(0, int(self.d[j]) - t), j))
        q = []
        for j in jobs:
            nb = t + int(self.p[j, m0])
            commit = int(self.w[j]) * max(0, nb - int(self.d[j]))
            nmask = mask & ~(1 << j)
            if nmask == 0:
                nbusy = list(busy)
                nbusy[m0] = nb
                q.append(commit + self._terminal_value(active, nbusy))
            else:
                nrest = (rest & ~(bbmask << (m0 * self.BB))) | (nb << (m0 * self.BB))
                q.append(commit + self.ensure(nmask | (active << self.J) | (nrest << (self.J + self.M))))
        if bin(active).count("1") >= 2:
            commit = int(self.omega[m0]) * max(0, t - int(self.delta[m0]))
            nrest = rest & ~(bbmask << (m0 * self.BB))
            q.append(commit + self.ensure(mask | ((active & ~(1 << m0)) << self.J) | (nrest << (self.J + self.M))))
        return q, jobs

    def action_values_key(self, key: int) -> ActionValues:
        q, _ = self._q_canonical(key)
        v = min(q)
        return ActionValues(v_star=v, q_star=tuple(q), best=q.index(v))

    def action_values(self, sim: SimState) -> ActionValues:
        return self.action_values_key(self.key_for(sim))

    def best_rank(self, key: int) -> int:
        """Canonical index of the optimal action (fast path used in sampling)."""
        if self._numba:
            self.ensure(key)
            return int(_kernels.rank_of_best(self.memo, key, self.J, self.M, self.BB,
                                             self.p, self.d, self.w, self.delta,
                                             self.omega))
        return self.action_values_key(key).best

    # -- enumeration --------------------------------------------------------

    def reachable_states(self) -> dict[tuple[int, int], np.ndarray]:
        """All decision states reachable from the root, keyed by
        (pending count, active count) bucket."""
        self.ensure(self.root_key)
        buckets: dict[tuple[int, int], np.ndarray] = {}
        if self._numba:
            keys, npend, nact, _ = _kernels.collect_states(self.memo, self.J, self.M, self.BB)
            for jp in range(1, self.J + 1):
                for ma in range(1, self.M + 1):
                    sel = (npend == jp) & (nact == ma)
                    if sel.any():
                        buckets[(jp, ma)] = np.sort(keys[sel])
        else:
            lists: dict[tuple[int, int], list[int]] = {}
            for k in self.memo:
                jp = bin(k & ((1 << self.J) - 1)).count("1")
                ma = bin((k >> self.J) & ((1 << self.M) - 1)).count("1")
                lists.setdefault((jp, ma), []).append(k)
            for b, ks in lists.items():
                buckets[b] = np.array(sorted(ks), dtype=object)
        return buckets

    def label_key(self, key: int) -> tuple[DecisionState, ActionValues, np.ndarray]:
        ds = sort_state(self.sim_for(key))
        av = self.action_values_key(key)
        return ds, av, targets(av)

    def bellman_consistent(self) -> bool:
        """Verify v == min_a q over every memoized state."""
        self.ensure(self.root_key)
        if self._numba:
            keys, _, _, _ = _kernels.collect_states(self.memo, self.J, self.M, self.BB)
            ok = _kernels.bellman_ok(self.memo, keys, self.J, self.M, self.BB,
                                     self.p, self.d, self.w, self.delta, self.omega)
            return bool(ok.all())
        return all(self.action_values_key(k).v_star == v for k, v in self.memo.items())


# -- module-level operations ------------------------------------------------

def solve(sim: SimState, memo_cap: int = DEFAULT_MEMO_CAP) -> ActionValues:
    """Exact optimal cost-to-go and per-action values of a decision state."""
    if not sim.pending:
        raise TerminalStateError("terminal state has no actions")
    return OracleSolver(sim, memo_cap=memo_cap).action_values(sim)


def brute_force_value(sim: SimState, leaf_cap: int = DEFAULT_LEAF_CAP) -> int:
    """Minimum cost-to-go by complete enumeration of action sequences.

    Independent of the memoized solver: walks the plain simulation API with no
    state deduplication.  Intended for small states.
    """
    if not sim.pending:
        raise TerminalStateError("terminal state has no actions")
    leaves = 0

    def rec(s: SimState) -> int:
        nonlocal leaves
        if s.is_terminal:
            leaves += 1
            if leaves > leaf_cap:
                raise BruteForceGuardError(f"leaf cap of {leaf_cap} exceeded")
            return total_cost(s).total
        ds = sort_state(s)
        return min(rec(apply_action(s, a)) for a in feasible_actions(ds))

    return rec(sim) - committed_cost(sim)


def optimal_rollout(start: SimState | ProblemInstance,
                    solver: OracleSolver | None = None):
    """Greedy argmin-Q trajectory; returns (schedule, CostBreakdown).

    Schedule entries are ``(t, machine, job)`` with original indices and
    ``job is None`` for deactivations.
    """
    sim = initial_state(start) if isinstance(start, ProblemInstance) else start
    if solver is None:
        solver = OracleSolver(sim)
    schedule = []
    while not sim.is_terminal:
        ds = sort_state(sim)
        av = solver.action_values(sim)
        act = feasible_actions(ds)[av.best]
        m0 = ds.machine_perm[0]
        job = None if act.is_deactivate else ds.job_perm[act.job]
        schedule.append((sim.t, m0, job))
        sim = apply_action(sim, act)
    return schedule, total_cost(sim)


def enumerate_labeled_states(problem: ProblemInstance,
                             memo_cap: int = DEFAULT_MEMO_CAP):
    """Label every reachable decision state of an instance.

    Returns ``{(pending, active): [(DecisionState, ActionValues, y), ...]}``.
    """
    solver = OracleSolver(problem, memo_cap=memo_cap)
    out = {}
    for bucket, keys in solver.reachable_states().items():
        out[bucket] = [solver.label_key(int(k)) for k in keys]
    return out
