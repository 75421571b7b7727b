"""Source imperfections: distinguishability mixture, efficiency and event rates.

Partial distinguishability is a two-component convex mixture of the fully
indistinguishable and fully distinguishable distributions, weighted by a single
scalar. This is a first-order surrogate, not the Gram-matrix model. Multi-photon
emission (``g2``) is recorded on the source but never simulated.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .fockcore import PhotonDistribution

__all__ = ["SourceModel", "mix_distinguishability", "estimate_rates", "DEFAULT_INDISTINGUISHABILITY"]

DEFAULT_INDISTINGUISHABILITY = 0.9421


@dataclass(frozen=True)
class SourceModel:
    indistinguishability: float = DEFAULT_INDISTINGUISHABILITY
    purity_complement: float = 0.0139
    repetition_rate_hz: float = 80e6
    end_to_end_efficiency: float = 1.0

    def __post_init__(self):
        for name in ("indistinguishability", "purity_complement"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if not 0.0 < self.end_to_end_efficiency <= 1.0:
            raise ValueError(f"end_to_end_efficiency must lie in (0, 1], got {self.end_to_end_efficiency}")
        if not self.repetition_rate_hz > 0:
            raise ValueError(f"repetition_rate_hz must be positive, got {self.repetition_rate_hz}")

    @classmethod
    def from_dict(cls, data: dict) -> "SourceModel":
        known = {k: data[k] for k in cls.__dataclass_fields__ if k in data}
        return cls(**known)

    def to_dict(self) -> dict:
        return asdict(self)


def mix_distinguishability(p_ind: PhotonDistribution, p_dist: PhotonDistribution,
                           x: float) -> PhotonDistribution:
    """Post-selected mixture of the two photon models on a shared support.

    Each model contributes its unnormalised weight ``mass * p``, so the
    result is ``x * p_ind`` plus ``(1 - x) * p_dist`` reweighted by how much
    of each model's probability survives in the subspace.
    """
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"mixture weight {x} outside [0, 1]")
    if not p_ind.same_support(p_dist):
        raise ValueError("distributions must share support ordering and subspace")
    mass = x * p_ind.mass + (1.0 - x) * p_dist.mass
    probs = x * p_ind.mass * p_ind.probabilities + (1.0 - x) * p_dist.mass * p_dist.probabilities
    probs = probs / probs.sum()
    return PhotonDistribution(p_ind.patterns.copy(), probs, p_ind.subspace, "mixture", mass, {"x": x})


def estimate_rates(model: SourceModel, n: int, p_cf: float, duty: float = 1.0) -> tuple[float, float]:
    """Collision-free and total n-photon event rates in Hz.

    ``duty`` is the fraction of laser pulses that start a frame, i.e. the
    frame rate divided by the repetition rate.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if not 0.0 < p_cf <= 1.0:
        raise ValueError(f"collision-free probability must lie in (0, 1], got {p_cf}")
    if not 0.0 < duty <= 1.0:
        raise ValueError(f"duty must lie in (0, 1], got {duty}")
    total = model.repetition_rate_hz * duty * model.end_to_end_efficiency ** n
    return total * p_cf, total


def frame_duty(sequence_period_ns: float, repetition_rate_hz: float) -> float:
    """Frames per laser pulse for a sequence repeated every ``sequence_period_ns``."""
    return float(np.clip(1e9 / sequence_period_ns / repetition_rate_hz, 0.0, 1.0))
