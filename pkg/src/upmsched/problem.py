"""Problem instances for scheduling on unrelated parallel machines.

An instance describes J jobs and M machines.  Every job has a machine-dependent
processing time, a deadline and a tardiness weight; every machine has a
deactivation deadline, a tardiness weight and an initial occupation.  All time
quantities and weights are integers so that schedule costs are exact.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field


class InvalidInstanceError(ValueError):
    """Raised when instance data violates a structural invariant."""


@dataclass(frozen=True)
class ProblemInstance:
    """Immutable description of an unrelated-machines scheduling problem.

    Attributes:
        p: processing times, ``p[j][m] > 0`` for job ``j`` on machine ``m``.
        d: job deadlines.
        w: job tardiness weights.
        delta: machine deactivation deadlines.
        omega: machine tardiness weights.
        r0: initial occupation runtimes; at least one must be zero.
        seed: generator seed this instance was produced from, if any.
    """

    p: tuple[tuple[int, ...], ...]
    d: tuple[int, ...]
    w: tuple[int, ...]
    delta: tuple[int, ...]
    omega: tuple[int, ...]
    r0: tuple[int, ...]
    seed: int | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "p", tuple(tuple(int(x) for x in row) for row in self.p))
        for name in ("d", "w", "delta", "omega", "r0"):
            object.__setattr__(self, name, tuple(int(x) for x in getattr(self, name)))
        J, M = self.n_jobs, self.n_machines
        if J < 1 or M < 1:
            raise InvalidInstanceError("need at least one job and one machine")
        if any(len(row) != M for row in self.p):
            raise InvalidInstanceError("ragged processing-time matrix")
        if len(self.d) != J or len(self.w) != J:
            raise InvalidInstanceError("job field length mismatch")
        if len(self.delta) != M or len(self.omega) != M or len(self.r0) != M:
            raise InvalidInstanceError("machine field length mismatch")
        if any(x <= 0 for row in self.p for x in row):
            raise InvalidInstanceError("processing times must be positive")
        if any(x < 0 for x in self.d + self.w + self.delta + self.omega + self.r0):
            raise InvalidInstanceError("deadlines, weights and runtimes must be nonnegative")
        if all(r > 0 for r in self.r0):
            raise InvalidInstanceError("at least one machine must start idle (r0 == 0)")

    @property
    def n_jobs(self) -> int:
        return len(self.p)

    @property
    def n_machines(self) -> int:
        return len(self.p[0]) if self.p else 0

    def scaled(self, c) -> "ProblemInstance":
        """Multiply every time-valued field (p, d, delta, r0) by ``c``.

        The factor must produce exact integers; weights are untouched.
        """

        def s(x):
            v = x * c
            iv = int(round(v))
            if abs(v - iv) > 1e-9:
                raise InvalidInstanceError(f"scaling by {c} does not keep {x} integral")
            return iv

        return ProblemInstance(
            p=tuple(tuple(s(x) for x in row) for row in self.p),
            d=tuple(s(x) for x in self.d),
            w=self.w,
            delta=tuple(s(x) for x in self.delta),
            omega=self.omega,
            r0=tuple(s(x) for x in self.r0),
            seed=self.seed,
        )

    # -- serialization ------------------------------------------------------

    def to_record(self) -> dict:
        return {
            "J": self.n_jobs,
            "M": self.n_machines,
            "p": [x for row in self.p for x in row],
            "d": list(self.d),
            "w": list(self.w),
            "delta": list(self.delta),
            "omega": list(self.omega),
            "r0": list(self.r0),
            "seed": self.seed,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "ProblemInstance":
        J, M = int(rec["J"]), int(rec["M"])
        flat = rec["p"]
        if len(flat) != J * M:
            raise InvalidInstanceError("processing-time matrix size mismatch")
        return cls(
            p=tuple(tuple(flat[j * M:(j + 1) * M]) for j in range(J)),
            d=tuple(rec["d"]),
            w=tuple(rec["w"]),
            delta=tuple(rec["delta"]),
            omega=tuple(rec["omega"]),
            r0=tuple(rec["r0"]),
            seed=rec.get("seed"),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_record(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ProblemInstance":
        return cls.from_record(json.loads(text))
