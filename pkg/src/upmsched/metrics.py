"""Relative-cost metrics for single decisions and full schedules.

All quotients are relative to a strictly positive reference cost; zero or
negative references indicate a broken input and raise.
"""
from __future__ import annotations

import numpy as np

from .datagen import LabeledState
from .model import ParamStore, forward_graph, make_param_vars
from .training import _Grouped, mean_delta_q


def delta_q(q_picked: float, v_star: float) -> float:
    """Relative excess of one action's value over the optimal state value."""
    if v_star <= 0:
        raise ValueError("optimal value must be positive")
    return (q_picked - v_star) / v_star


def delta_v(v_policy: float, v_star: float) -> float:
    """Relative excess of a policy's schedule cost over the optimal cost."""
    if v_star <= 0:
        raise ValueError("optimal value must be positive")
    return (v_policy - v_star) / v_star


def rule_over_network(v_rule: float, v_net: float) -> float:
    """Relative excess of the rule's cost over the network's cost.

    Positive means the network schedules cheaper than the rule.
    """
    if v_net <= 0:
        raise ValueError("network cost must be positive")
    return (v_rule - v_net) / v_net


def bucketed_delta_q(store: ParamStore, records: list[LabeledState]) -> dict:
    """Mean decision ΔQ of the network per (pending, active) bucket.

    Returns {"overall": x, "buckets": {(J, M): (mean, count)}}.
    """
    if not records:
        raise ValueError("no labeled states to evaluate")
    by_bucket: dict[tuple[int, int], list[LabeledState]] = {}
    for r in records:
        by_bucket.setdefault(tuple(r.bucket), []).append(r)
    buckets = {}
    total = 0.0
    for b in sorted(by_bucket):
        recs = by_bucket[b]
        m = mean_delta_q(store, recs)
        buckets[b] = (m, len(recs))
        total += m * len(recs)
    return {"overall": total / len(records), "buckets": buckets}


def action_accuracy(store: ParamStore, records: list[LabeledState]) -> float:
    """Fraction of states where the network's argmax attains the optimal Q."""
    grouped = _Grouped(records)
    pv = make_param_vars(store)
    hits = 0
    for key in grouped.keys:
        g = grouped.buckets[key]
        y_hat = forward_graph(pv, g["resource"], g["urgency"], g["mask"],
                              store.config.alpha).data
        picked = np.argmax(y_hat, axis=1)
        q = g["q"][np.arange(len(picked)), picked]
        hits += int(np.sum(q == g["v"]))
    return hits / grouped.n
