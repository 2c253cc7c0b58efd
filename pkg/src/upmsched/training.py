"""Supervised training of the policy network on labeled states.

Batches mix states of different (J, M) shapes; each batch is split into
same-shape groups whose losses are summed before one optimizer step, so the
effective batch size is preserved.  Everything is deterministic given the
seed (single-threaded numpy, fixed accumulation order).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datagen import LabeledState
from .model import (
    ModelConfig,
    ParamStore,
    batch_loss_graph,
    forward_graph,
    init_params,
    make_param_vars,
)


@dataclass
class Hyper:
    lr: float = 0.001
    batch_size: int = 128
    epochs: int = 30
    seed: int = 0


class Adam:
    def __init__(self, arrays: dict[str, np.ndarray], lr: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in arrays.items()}
        self.v = {k: np.zeros_like(v) for k, v in arrays.items()}

    def step(self, arrays: dict[str, np.ndarray], grads: dict[str, np.ndarray]):
        self.t += 1
        b1c = 1.0 - self.beta1 ** self.t
        b2c = 1.0 - self.beta2 ** self.t
        for k, a in arrays.items():
            g = grads[k]
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g * g
            a -= self.lr * (self.m[k] / b1c) / (np.sqrt(self.v[k] / b2c) + self.eps)


class _Grouped:
    """Records regrouped into contiguous same-shape arrays."""

    def __init__(self, records: list[LabeledState]):
        buckets: dict[tuple[int, int], list[int]] = {}
        for i, r in enumerate(records):
            J, M = r.encoded.resource.shape[:2]
            buckets.setdefault((J, M), []).append(i)
        self.buckets = {}
        self.bucket_of = np.empty(len(records), dtype=np.int64)
        self.pos_of = np.empty(len(records), dtype=np.int64)
        self.keys = sorted(buckets)
        for b, (J, M) in enumerate(self.keys):
            idxs = buckets[(J, M)]
            res = np.stack([records[i].encoded.resource for i in idxs])
            urg = np.stack([records[i].encoded.urgency for i in idxs])
            y = np.zeros((len(idxs), J + 1))
            q = np.full((len(idxs), J + 1), np.inf)
            v = np.empty(len(idxs))
            masked = np.zeros(len(idxs), dtype=bool)
            for p, i in enumerate(idxs):
                r = records[i]
                y[p, :r.n_actions] = r.y
                q[p, :r.n_actions] = r.q_star
                v[p] = r.v_star
                masked[p] = r.n_actions == J  # deactivation infeasible
                self.bucket_of[i] = b
                self.pos_of[i] = p
            if masked.any() and not masked.all():
                raise ValueError("mixed deactivation feasibility within one shape group")
            self.buckets[(J, M)] = {
                "resource": res, "urgency": urg, "y": y, "q": q, "v": v,
                "mask": bool(masked.all()),
            }
        self.n = len(records)


def mean_delta_q(store: ParamStore, records: list[LabeledState] | _Grouped) -> float:
    """Mean relative cost excess of the network's argmax action over V*."""
    grouped = records if isinstance(records, _Grouped) else _Grouped(records)
    pv = make_param_vars(store)
    cfg = store.config
    total = 0.0
    for key in grouped.keys:
        g = grouped.buckets[key]
        y_hat = forward_graph(pv, g["resource"], g["urgency"], g["mask"], cfg.alpha).data
        picked = np.argmax(y_hat, axis=1)
        q = g["q"][np.arange(len(picked)), picked]
        total += float(np.sum((q - g["v"]) / g["v"]))
    return total / grouped.n


def train(train_records: list[LabeledState], val_records: list[LabeledState] | None = None,
          hyper: Hyper = Hyper(), config: ModelConfig = ModelConfig(),
          callback=None) -> tuple[ParamStore, list[dict]]:
    """Adam on MSE; returns the trained store and per-epoch history."""
    if not train_records:
        raise ValueError("empty training set")
    store = init_params(config, seed=hyper.seed)
    grouped = _Grouped(train_records)
    val_grouped = _Grouped(val_records) if val_records else None
    opt = Adam(store.arrays, lr=hyper.lr)
    rng = np.random.default_rng([hyper.seed, 0xA11])
    n = grouped.n
    history = []
    for epoch in range(hyper.epochs):
        perm = rng.permutation(n)
        epoch_sq = 0.0
        for start in range(0, n, hyper.batch_size):
            batch = perm[start:start + hyper.batch_size]
            pv = make_param_vars(store, requires_grad=True)
            total = None
            for b in np.unique(grouped.bucket_of[batch]):
                key = grouped.keys[b]
                g = grouped.buckets[key]
                pos = grouped.pos_of[batch[grouped.bucket_of[batch] == b]]
                part = batch_loss_graph(pv, g["resource"][pos], g["urgency"][pos],
                                        g["y"][pos], g["mask"], config.alpha)
                total = part if total is None else total + part
            epoch_sq += float(total.data)
            scaled = total * (1.0 / len(batch))
            scaled.backward()
            grads = {k: (v.grad if v.grad is not None else np.zeros_like(v.data))
                     for k, v in pv.items()}
            opt.step(store.arrays, grads)
        entry = {"epoch": epoch + 1, "train_loss": epoch_sq / n}
        if val_grouped is not None:
            entry["val_delta_q"] = mean_delta_q(store, val_grouped)
        history.append(entry)
        if callback is not None:
            callback(entry)
    return store, history


def write_history(path, history: list[dict]):
    cols = ["epoch", "train_loss"] + (["val_delta_q"] if history and "val_delta_q" in history[0] else [])
    with open(path, "w") as f:
        f.write(",".join(cols) + "\n")
        for h in history:
            f.write(",".join(repr(h[c]) if c != "epoch" else str(h[c]) for c in cols) + "\n")
