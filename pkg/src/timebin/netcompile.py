"""Compile loop-interferometer reflectivity schedules into mode transfer matrices.

A single tunable beamsplitter has one output fed back to one input through a
delay of one bin period. Time bin ``k + 1`` meets the loop content on the
beamsplitter programmed with reflectivity ``R_k``.

Phase convention
----------------
Each beamsplitter event acts on the ordered pair ``(loop, fresh)`` and emits
the ordered pair ``(exit, loop)`` through the real orthogonal block::

    [[ sqrt(R),   sqrt(1-R) ],
     [ sqrt(1-R), -sqrt(R)  ]]

so reflection (probability ``R``) swaps the arms: the fresh bin is sent into
the loop and the loop content leaves towards the detector. This matches the
boundary operations ``R(0) = R(m tau) = 1``, which load the first bin into the
loop and flush the last one out. Transmission ``1 - R`` sends the fresh bin
straight to the detector, which is the trace seen with the loop blocked.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

__all__ = [
    "ReflectivitySchedule",
    "ModeMatrix",
    "beamsplitter_block",
    "compile_schedule",
    "preview_intensity",
    "staircase_reflectivities",
]


@dataclass(frozen=True)
class ReflectivitySchedule:
    """Beamsplitter program for one frame of ``m`` time bins.

    Only the ``m - 1`` interior reflectivities are stored; the boundary
    operations are implicit.
    """

    m: int
    reflectivities: tuple[float, ...]
    bin_period_ns: float = 100.0
    loop_transmission: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "reflectivities", tuple(float(r) for r in self.reflectivities))
        if int(self.m) != self.m or self.m < 1:
            raise ValueError(f"m must be a positive integer, got {self.m!r}")
        if len(self.reflectivities) != self.m - 1:
            raise ValueError(
                f"reflectivities: expected {self.m - 1} values for m={self.m}, "
                f"got {len(self.reflectivities)}"
            )
        for k, r in enumerate(self.reflectivities, start=1):
            if not 0.0 <= r <= 1.0:
                raise ValueError(f"reflectivities: R_{k}={r} outside [0, 1]")
        if not self.bin_period_ns > 0:
            raise ValueError(f"bin_period_ns must be positive, got {self.bin_period_ns}")
        if not 0.0 < self.loop_transmission <= 1.0:
            raise ValueError(f"loop_transmission must lie in (0, 1], got {self.loop_transmission}")

    @classmethod
    def from_dict(cls, data: dict) -> "ReflectivitySchedule":
        return cls(
            m=data["m"],
            reflectivities=data["reflectivities"],
            bin_period_ns=data.get("bin_period_ns", 100.0),
            loop_transmission=data.get("loop_transmission", 1.0),
        )

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "reflectivities": list(self.reflectivities),
            "bin_period_ns": self.bin_period_ns,
            "loop_transmission": self.loop_transmission,
        }

    @classmethod
    def load(cls, path) -> "ReflectivitySchedule":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class ModeMatrix:
    """Transfer matrix with ``entries[j, i]`` the amplitude from input bin ``i`` to output bin ``j``.

    Indices are zero-based here; bin ``b`` of the experiment is row/column ``b - 1``.
    """

    entries: np.ndarray = field(repr=False)

    def __post_init__(self):
        a = np.asarray(self.entries, dtype=complex)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"mode matrix must be square, got shape {a.shape}")
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def is_unitary(self, atol: float = 1e-12) -> bool:
        a = self.entries
        return bool(np.max(np.abs(a.conj().T @ a - np.eye(self.dim))) <= atol)

    def to_json(self) -> dict:
        """Row-major nested list of ``[re, im]`` pairs."""
        return {
            "dim": self.dim,
            "entries": [[[float(z.real), float(z.imag)] for z in row] for row in self.entries],
        }

    @classmethod
    def from_json(cls, data: dict) -> "ModeMatrix":
        arr = np.array(data["entries"], dtype=float)
        return cls(arr[..., 0] + 1j * arr[..., 1])


def beamsplitter_block(R: float) -> np.ndarray:
    """Real orthogonal 2x2 block for reflectivity ``R``."""
    if not 0.0 <= R <= 1.0:
        raise ValueError(f"reflectivity {R} outside [0, 1]")
    r, t = np.sqrt(R), np.sqrt(1.0 - R)
    return np.array([[r, t], [t, -r]])


def compile_schedule(schedule: ReflectivitySchedule) -> ModeMatrix:
    """Build the ``m x m`` transfer matrix by stepping the loop through one frame.

    The loop state is a row vector of amplitudes over input bins. Every delay
    traversal multiplies it by ``sqrt(loop_transmission)``.
    """
    m = schedule.m
    att = np.sqrt(schedule.loop_transmission)
    out = np.zeros((m, m))
    loop = np.zeros(m)
    loop[0] = 1.0  # R(0) = 1 loads bin 1
    for k, R in enumerate(schedule.reflectivities):
        loop *= att
        fresh = np.zeros(m)
        fresh[k + 1] = 1.0
        b = beamsplitter_block(R)
        out[k] = b[0, 0] * loop + b[0, 1] * fresh
        loop = b[1, 0] * loop + b[1, 1] * fresh
    out[m - 1] = att * loop  # R(m tau) = 1 flushes the loop
    return ModeMatrix(out.astype(complex))


def preview_intensity(schedule: ReflectivitySchedule) -> list[float]:
    """Transmitted fraction ``1 - R_k`` per beamsplitter event, as seen with the loop blocked."""
    return [1.0 - r for r in schedule.reflectivities]


def staircase_reflectivities(m: int) -> list[float]:
    """``R_k = k / (k + 1)`` for ``k = 1 .. m - 1``."""
    return [k / (k + 1) for k in range(1, m)]


def random_schedule(rng: np.random.Generator, m: int, loop_transmission: float = 1.0,
                    bin_period_ns: float = 100.0) -> ReflectivitySchedule:
    return ReflectivitySchedule(m, rng.uniform(0, 1, size=m - 1), bin_period_ns, loop_transmission)


def as_matrix(M: ModeMatrix | np.ndarray | Sequence) -> np.ndarray:
    if isinstance(M, ModeMatrix):
        return M.entries
    return np.asarray(M, dtype=complex)
