"""Numba kernels for the exact Bellman solver.

States are packed into int64 keys: bits [0, J) = pending-job mask,
bits [J, J+M) = active-machine mask, then one BB-bit busy-until field per
machine.  Busy fields of inactive machines are zeroed so that the key
identifies the logical state.  All indices refer to the solver's compacted
job/machine numbering.
"""
from __future__ import annotations

import numpy as np
from numba import int64, njit
from numba.typed import Dict as NumbaDict

__all__ = [
    "NumbaDict",
    "new_memo",
    "dp_fill",
    "rank_of_best",
    "collect_states",
    "bellman_ok",
]


def new_memo():
    return NumbaDict.empty(int64, int64)


@njit(cache=True)
def _terminal_value(active, busy, delta, omega, M):
    c_max = 0
    tard = 0
    for m in range(M):
        if active >> m & 1:
            b = busy[m]
            if b > c_max:
                c_max = b
            if b > delta[m]:
                tard += omega[m] * (b - delta[m])
    return c_max + tard


@njit(cache=True)
def _unpack_busy(key, J, M, BB, busy):
    rest = key >> (J + M)
    for m in range(M):
        busy[m] = (rest >> (m * BB)) & ((int64(1) << BB) - 1)


@njit(cache=True)
def _free_machine(active, busy, delta, omega, M):
    """Decision epoch t and the canonically-first free machine."""
    t = int64(1) << 62
    for m in range(M):
        if active >> m & 1 and busy[m] < t:
            t = busy[m]
    m0 = -1
    bw = int64(-1)
    be = int64(1) << 62
    for m in range(M):
        if active >> m & 1 and busy[m] == t:
            e = delta[m] - t
            if e < 0:
                e = 0
            if omega[m] > bw or (omega[m] == bw and e < be):
                bw = omega[m]
                be = e
                m0 = m
    return t, m0


@njit(cache=True)
def dp_fill(memo, key0, J, M, BB, p, d, w, delta, omega, cap):
    """Fill ``memo`` with the optimal cost-to-go of every state reachable
    from ``key0``.  Returns the root value, or -1 if ``cap`` entries were
    exceeded."""
    if key0 & ((int64(1) << J) - 1) == 0:
        # terminal root: nothing to memoize
        busy = np.empty(M, np.int64)
        _unpack_busy(key0, J, M, BB, busy)
        return _terminal_value((key0 >> J) & ((int64(1) << M) - 1), busy, delta, omega, M)
    capacity = 1 << 12
    stack = np.empty(capacity, np.int64)
    phase = np.empty(capacity, np.uint8)
    top = 0
    stack[top] = key0
    phase[top] = 0
    top += 1
    busy = np.empty(M, np.int64)
    bbmask = (int64(1) << BB) - 1
    while top > 0:
        top -= 1
        key = stack[top]
        ph = phase[top]
        if ph == 0 and key in memo:
            continue
        mask = key & ((int64(1) << J) - 1)
        active = (key >> J) & ((int64(1) << M) - 1)
        rest = key >> (J + M)
        for m in range(M):
            busy[m] = (rest >> (m * BB)) & bbmask
        t, m0 = _free_machine(active, busy, delta, omega, M)
        nact = 0
        for m in range(M):
            nact += active >> m & 1

        if ph == 1:
            v = int64(1) << 62
            for j in range(J):
                if mask >> j & 1:
                    nb = t + p[j, m0]
                    commit = w[j] * (nb - d[j]) if nb > d[j] else 0
                    nmask = mask & ~(int64(1) << j)
                    nrest = (rest & ~(bbmask << (m0 * BB))) | (nb << (m0 * BB))
                    if nmask == 0:
                        ob = busy[m0]
                        busy[m0] = nb
                        cv = commit + _terminal_value(active, busy, delta, omega, M)
                        busy[m0] = ob
                    else:
                        cv = commit + memo[nmask | (active << J) | (nrest << (J + M))]
                    if cv < v:
                        v = cv
            if nact >= 2:
                commit = omega[m0] * (t - delta[m0]) if t > delta[m0] else 0
                nactive = active & ~(int64(1) << m0)
                nrest = rest & ~(bbmask << (m0 * BB))
                cv = commit + memo[mask | (nactive << J) | (nrest << (J + M))]
                if cv < v:
                    v = cv
            memo[key] = v
            if len(memo) > cap:
                return -1
            continue

        # expand
        if top + J + 2 >= capacity:
            capacity *= 2
            nstack = np.empty(capacity, np.int64)
            nphase = np.empty(capacity, np.uint8)
            nstack[:top] = stack[:top]
            nphase[:top] = phase[:top]
            stack = nstack
            phase = nphase
        stack[top] = key
        phase[top] = 1
        top += 1
        for j in range(J):
            if mask >> j & 1:
                nmask = mask & ~(int64(1) << j)
                if nmask == 0:
                    continue
                nb = t + p[j, m0]
                nrest = (rest & ~(bbmask << (m0 * BB))) | (nb << (m0 * BB))
                ckey = nmask | (active << J) | (nrest << (J + M))
                if ckey not in memo:
                    stack[top] = ckey
                    phase[top] = 0
                    top += 1
        if nact >= 2:
            nactive = active & ~(int64(1) << m0)
            nrest = rest & ~(bbmask << (m0 * BB))
            ckey = mask | (nactive << J) | (nrest << (J + M))
            if ckey not in memo:
                stack[top] = ckey
                phase[top] = 0
                top += 1
    return memo[key0]


@njit(cache=True)
def _q_of(memo, key, j, m0, t, J, M, BB, p, d, w, delta, omega, busy):
    """Cost-to-go of assigning compact job j to machine m0 (children memoized)."""
    mask = key & ((int64(1) << J) - 1)
    active = (key >> J) & ((int64(1) << M) - 1)
    rest = key >> (J + M)
    bbmask = (int64(1) << BB) - 1
    nb = t + p[j, m0]
    commit = w[j] * (nb - d[j]) if nb > d[j] else 0
    nmask = mask & ~(int64(1) << j)
    if nmask == 0:
        ob = busy[m0]
        busy[m0] = nb
        cv = commit + _terminal_value(active, busy, delta, omega, M)
        busy[m0] = ob
        return cv
    nrest = (rest & ~(bbmask << (m0 * BB))) | (nb << (m0 * BB))
    return commit + memo[nmask | (active << J) | (nrest << (J + M))]


@njit(cache=True)
def rank_of_best(memo, key, J, M, BB, p, d, w, delta, omega):
    """Canonical index of the optimal action of a memoized state.

    Returns the position of the argmin-Q action in canonical action order
    (jobs sorted by processing time on the free machine, then higher weight,
    then earlier deadline, then index; deactivation last).  Q-ties resolve to
    the lowest canonical index.
    """
    mask = key & ((int64(1) << J) - 1)
    active = (key >> J) & ((int64(1) << M) - 1)
    busy = np.empty(M, np.int64)
    _unpack_busy(key, J, M, BB, busy)
    t, m0 = _free_machine(active, busy, delta, omega, M)

    best_j = -1
    bq = int64(1) << 62
    bp = int64(0)
    bw_ = int64(0)
    be = int64(0)
    for j in range(J):
        if mask >> j & 1:
            q = _q_of(memo, key, j, m0, t, J, M, BB, p, d, w, delta, omega, busy)
            pj = p[j, m0]
            wj = w[j]
            ej = d[j] - t
            if ej < 0:
                ej = 0
            better = False
            if q < bq:
                better = True
            elif q == bq:
                if pj < bp or (pj == bp and (wj > bw_ or (wj == bw_ and ej < be))):
                    better = True
            if better:
                best_j = j
                bq = q
                bp = pj
                bw_ = wj
                be = ej
    nact = 0
    for m in range(M):
        nact += active >> m & 1
    if nact >= 2:
        rest = key >> (J + M)
        bbmask = (int64(1) << BB) - 1
        commit = omega[m0] * (t - delta[m0]) if t > delta[m0] else 0
        nactive = active & ~(int64(1) << m0)
        nrest = rest & ~(bbmask << (m0 * BB))
        qd = commit + memo[mask | (nactive << J) | (nrest << (J + M))]
        if qd < bq:
            njobs = 0
            for j in range(J):
                njobs += mask >> j & 1
            return njobs  # deactivation slot
    # canonical rank of best_j among pending jobs
    rank = 0
    for j in range(J):
        if j != best_j and mask >> j & 1:
            pj = p[j, m0]
            wj = w[j]
            ej = d[j] - t
            if ej < 0:
                ej = 0
            if pj < bp or (pj == bp and (wj > bw_ or (wj == bw_ and (ej < be or (ej == be and j < best_j))))):
                rank += 1
    return rank


@njit(cache=True)
def collect_states(memo, J, M, BB):
    """Export memo keys with their pending/active counts and values."""
    n = len(memo)
    keys = np.empty(n, np.int64)
    npend = np.empty(n, np.int64)
    nact = np.empty(n, np.int64)
    vals = np.empty(n, np.int64)
    i = 0
    for key in memo:
        keys[i] = key
        vals[i] = memo[key]
        mask = key & ((int64(1) << J) - 1)
        c = 0
        for j in range(J):
            c += mask >> j & 1
        npend[i] = c
        active = (key >> J) & ((int64(1) << M) - 1)
        c = 0
        for m in range(M):
            c += active >> m & 1
        nact[i] = c
        i += 1
    return keys, npend, nact, vals


@njit(cache=True)
def bellman_ok(memo, keys, J, M, BB, p, d, w, delta, omega):
    """Check v == min_a q for each memoized key; returns a bool array."""
    out = np.empty(len(keys), np.bool_)
    busy = np.empty(M, np.int64)
    bbmask = (int64(1) << BB) - 1
    for i in range(len(keys)):
        key = keys[i]
        mask = key & ((int64(1) << J) - 1)
        active = (key >> J) & ((int64(1) << M) - 1)
        _unpack_busy(key, J, M, BB, busy)
        t, m0 = _free_machine(active, busy, delta, omega, M)
        v = int64(1) << 62
        for j in range(J):
            if mask >> j & 1:
                q = _q_of(memo, key, j, m0, t, J, M, BB, p, d, w, delta, omega, busy)
                if q < v:
                    v = q
        nact = 0
        for m in range(M):
            nact += active >> m & 1
        if nact >= 2:
            rest = key >> (J + M)
            commit = omega[m0] * (t - delta[m0]) if t > delta[m0] else 0
            nactive = active & ~(int64(1) << m0)
            nrest = rest & ~(bbmask << (m0 * BB))
            q = commit + memo[mask | (nactive << J) | (nrest << (J + M))]
            if q < v:
                v = q
        out[i] = v == memo[key]
    return out
