"""Seeded instance simulation and labeled-state dataset construction.

Instances are drawn from closed integer ranges; every quantity is derived
from a single 64-bit seed through numpy's PCG64 generator, so identical seeds
reproduce identical instances, state selections and dataset bytes.

Training states are sampled *balanced*: per (pending, active) bucket a target
action slot is drawn uniformly first and a state whose optimal action matches
is picked; validation/test states are drawn uniformly per bucket.
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from .encoding import EncodedState, encode_state
from .oracle import BruteForceGuardError, MemoGuardError, OracleSolver
from .problem import ProblemInstance

RNG_NAME = "numpy.PCG64"
TRAIN_BUCKETS = tuple((j, m) for j in range(3, 9) for m in range(2, 5))


@dataclass(frozen=True)
class GenParams:
    """Instance simulation parameters; ranges are closed integer intervals."""

    J: int
    M: int
    seed: int
    w_max: int = 10
    d_max: int = 30
    p_max_range: tuple[float, float] = (1 / 3, 3 / 2)  # fractions of d_max
    r_max_range: tuple[float, float] = (1 / 3, 1.0)    # fractions of p_max

    def __post_init__(self):
        if self.w_max < 1 or self.d_max < 1 or self.J < 1 or self.M < 1:
            raise ValueError("counts and maxima must be positive")
        lo = math.ceil(self.p_max_range[0] * self.d_max)
        hi = math.floor(self.p_max_range[1] * self.d_max)
        if not 1 <= lo <= hi:
            raise ValueError("empty processing-time maximum range")


def gen_problem(params: GenParams) -> ProblemInstance:
    """Simulate one instance, fully determined by ``params.seed``."""
    rng = np.random.default_rng(params.seed)
    p_lo = math.ceil(params.p_max_range[0] * params.d_max)
    p_hi = math.floor(params.p_max_range[1] * params.d_max)
    p_max = int(rng.integers(p_lo, p_hi, endpoint=True))
    p = rng.integers(1, p_max, size=(params.J, params.M), endpoint=True)
    d = rng.integers(1, params.d_max, size=params.J, endpoint=True)
    w = rng.integers(1, params.w_max, size=params.J, endpoint=True)
    delta = rng.integers(1, params.d_max, size=params.M, endpoint=True)
    omega = rng.integers(1, params.w_max, size=params.M, endpoint=True)
    r_lo = math.ceil(params.r_max_range[0] * p_max)
    r_hi = math.floor(params.r_max_range[1] * p_max)
    if not 0 <= r_lo <= r_hi:
        raise ValueError("empty initial-runtime maximum range")
    r_cap = int(rng.integers(r_lo, r_hi, endpoint=True))
    r0 = rng.integers(0, r_cap, size=params.M, endpoint=True)
    if not (r0 == 0).any():
        r0[int(rng.integers(0, params.M))] = 0
    return ProblemInstance(
        p=tuple(tuple(int(x) for x in row) for row in p),
        d=tuple(int(x) for x in d), w=tuple(int(x) for x in w),
        delta=tuple(int(x) for x in delta), omega=tuple(int(x) for x in omega),
        r0=tuple(int(x) for x in r0), seed=params.seed,
    )


@dataclass(frozen=True)
class LabeledState:
    """One supervised sample: encoded state plus ground-truth labels."""

    bucket: tuple[int, int]          # (pending jobs, active machines)
    encoded: EncodedState
    y: np.ndarray                    # softmax target over feasible actions
    v_star: int
    q_star: tuple[int, ...]
    n_actions: int
    instance_seed: int | None = field(default=None, compare=False)

    def to_record(self) -> dict:
        J, M, _ = self.encoded.resource.shape
        return {
            "bucket": list(self.bucket),
            "shape": [J, M],
            "resource": self.encoded.resource.ravel().tolist(),
            "urgency": self.encoded.urgency.ravel().tolist(),
            "y": self.y.tolist(),
            "v_star": self.v_star,
            "q_star": list(self.q_star),
            "n_actions": self.n_actions,
            "seed": self.instance_seed,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "LabeledState":
        J, M = rec["shape"]
        enc = EncodedState(
            resource=np.array(rec["resource"], dtype=np.float64).reshape(J, M, 4),
            urgency=np.array(rec["urgency"], dtype=np.float64).reshape(J, 2),
        )
        return cls(
            bucket=tuple(rec["bucket"]), encoded=enc,
            y=np.array(rec["y"], dtype=np.float64),
            v_star=int(rec["v_star"]), q_star=tuple(rec["q_star"]),
            n_actions=int(rec["n_actions"]), instance_seed=rec.get("seed"),
        )


def _labeled_from_key(solver: OracleSolver, key: int, bucket, w_max: int,
                      instance_seed) -> LabeledState:
    ds, av, y = solver.label_key(key)
    return LabeledState(
        bucket=bucket, encoded=encode_state(ds, w_max), y=y,
        v_star=av.v_star, q_star=av.q_star, n_actions=len(av.q_star),
        instance_seed=instance_seed,
    )


def sample_training_states(problem: ProblemInstance, seed, w_max: int = 10,
                           solver: OracleSolver | None = None,
                           buckets=TRAIN_BUCKETS,
                           scan_cap: int = 4096) -> list[LabeledState]:
    """Balanced per-bucket state selection: draw a target action slot
    uniformly, then pick uniformly among bucket states whose optimal action
    occupies that slot; fall back to a uniform state if none matches within
    ``scan_cap`` inspected states."""
    if solver is None:
        solver = OracleSolver(problem)
    rng = np.random.default_rng(seed)
    reach = solver.reachable_states()
    out = []
    for (jp, ma) in buckets:
        keys = reach.get((jp, ma))
        if keys is None:
            continue
        n_slots = jp + (1 if ma >= 2 else 0)
        cat = int(rng.integers(n_slots))
        order = rng.permutation(len(keys))
        chosen = int(keys[order[0]])
        for idx in order[:scan_cap]:
            k = int(keys[idx])
            if solver.best_rank(k) == cat:
                chosen = k
                break
        out.append(_labeled_from_key(solver, chosen, (jp, ma), w_max, problem.seed))
    return out


def sample_eval_states(problem: ProblemInstance, seed, w_max: int = 10,
                       solver: OracleSolver | None = None,
                       buckets=TRAIN_BUCKETS) -> list[LabeledState]:
    """Unbalanced selection: one uniformly random state per nonempty bucket."""
    if solver is None:
        solver = OracleSolver(problem)
    rng = np.random.default_rng(seed)
    reach = solver.reachable_states()
    out = []
    for (jp, ma) in buckets:
        keys = reach.get((jp, ma))
        if keys is None:
            continue
        k = int(keys[int(rng.integers(len(keys)))])
        out.append(_labeled_from_key(solver, k, (jp, ma), w_max, problem.seed))
    return out


def write_records(path, records: list[LabeledState]):
    with open(path, "w") as f:
        for r in records:
            f.write(json.dumps(r.to_record(), sort_keys=True))
            f.write("\n")


def load_records(path) -> list[LabeledState]:
    out = []
    with open(path) as f:
        for line in f:
            if line.strip():
                out.append(LabeledState.from_record(json.loads(line)))
    return out


def build_dataset(n_problems: int, params: GenParams, out_dir,
                  split=(0.8, 0.1, 0.1), scan_cap: int = 4096,
                  memo_cap: int | None = None) -> dict:
    """Build train/validation/test labeled-state files plus a manifest.

    ``params.seed`` drives everything: instance seeds are drawn from it and
    are pairwise distinct, so the three splits never share an instance.
    Instances the oracle cannot solve within its guard are skipped and
    counted.  Returns the manifest dict.
    """
    if abs(sum(split) - 1.0) > 1e-9 or len(split) != 3:
        raise ValueError("split must be three ratios summing to 1")
    os.makedirs(out_dir, exist_ok=True)
    rng = np.random.default_rng(params.seed)
    seeds: list[int] = []
    seen = set()
    while len(seeds) < n_problems:
        s = int(rng.integers(0, 2 ** 62))
        if s not in seen:
            seen.add(s)
            seeds.append(s)
    n_train = round(split[0] * n_problems)
    n_val = round(split[1] * n_problems)
    split_seeds = {
        "train": seeds[:n_train],
        "validation": seeds[n_train:n_train + n_val],
        "test": seeds[n_train + n_val:],
    }
    manifest = {
        "generator": RNG_NAME,
        "seed": params.seed,
        "params": asdict(params),
        "n_problems": n_problems,
        "split": list(split),
        "splits": {},
    }
    solver_kwargs = {} if memo_cap is None else {"memo_cap": memo_cap}
    for name, sds in split_seeds.items():
        balanced = name == "train"
        records: list[LabeledState] = []
        skipped = 0
        for s in sds:
            prob = gen_problem(GenParams(**{**asdict(params), "seed": s}))
            try:
                solver = OracleSolver(prob, **solver_kwargs)
                if balanced:
                    recs = sample_training_states(
                        prob, [s, 1], w_max=params.w_max, solver=solver,
                        scan_cap=scan_cap)
                else:
                    recs = sample_eval_states(
                        prob, [s, 1], w_max=params.w_max, solver=solver)
            except (MemoGuardError, BruteForceGuardError):
                skipped += 1
                continue
            records.extend(recs)
        path = os.path.join(out_dir, f"{name}.jsonl")
        write_records(path, records)
        counts: dict[str, int] = {}
        for r in records:
            k = f"{r.bucket[0]},{r.bucket[1]}"
            counts[k] = counts.get(k, 0) + 1
        manifest["splits"][name] = {
            "file": os.path.basename(path),
            "n_problems": len(sds),
            "n_records": len(records),
            "balanced": balanced,
            "bucket_counts": dict(sorted(counts.items())),
            "skipped": skipped,
            "instance_seeds": sds,
        }
    with open(os.path.join(out_dir, "manifest.json"), "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")
    return manifest
