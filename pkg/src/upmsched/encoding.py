"""Network input encoding of decision states.

Each pending job contributes one 4-feature row per active machine
(processing time, remaining runtime, machine earliness, machine weight) plus a
2-feature urgency row (job earliness, job weight).  Weights are divided by the
configured maximum weight; every time-valued entry is divided by the largest
time-valued entry of the state, so all inputs lie in [0, 1] and the encoding
is invariant to rescaling all time data.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mdp import DecisionState


@dataclass(frozen=True)
class EncodedState:
    """Normalized network input: resource tensor (J, M, 4) and urgency matrix (J, 2)."""

    resource: np.ndarray
    urgency: np.ndarray

    @property
    def n_jobs(self) -> int:
        return self.resource.shape[0]

    @property
    def n_machines(self) -> int:
        return self.resource.shape[1]


def encode_state(ds: DecisionState, w_max: int) -> EncodedState:
    if w_max <= 0:
        raise ValueError("w_max must be positive")
    J, M = ds.n_jobs, ds.n_machines

    rem = np.array([f[0] for f in ds.machine_feats], dtype=np.float64)
    eps = np.array([f[1] for f in ds.machine_feats], dtype=np.float64)
    omg = np.array([f[2] for f in ds.machine_feats], dtype=np.float64)
    p = np.array([f[0] for f in ds.job_feats], dtype=np.float64)  # (J, M)
    e = np.array([f[1] for f in ds.job_feats], dtype=np.float64)
    w = np.array([f[2] for f in ds.job_feats], dtype=np.float64)

    norm = max(p.max(initial=0.0), rem.max(initial=0.0), eps.max(initial=0.0),
               e.max(initial=0.0))
    if norm == 0.0:
        norm = 1.0

    resource = np.empty((J, M, 4), dtype=np.float64)
    resource[:, :, 0] = p / norm
    resource[:, :, 1] = rem[None, :] / norm
    resource[:, :, 2] = eps[None, :] / norm
    resource[:, :, 3] = omg[None, :] / w_max

    urgency = np.empty((J, 2), dtype=np.float64)
    urgency[:, 0] = e / norm
    urgency[:, 1] = w / w_max
    return EncodedState(resource=resource, urgency=urgency)
