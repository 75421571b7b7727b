"""Experiment definitions and the time-bin Hong-Ou-Mandel protocol."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .fockcore import outcome_probability, outcome_probability_distinguishable
from .netcompile import ReflectivitySchedule, compile_schedule, staircase_reflectivities

__all__ = [
    "ExperimentSpec",
    "CorrelationHistogram",
    "standard_experiment",
    "hom_bin_state",
    "hom_histogram",
    "peak_area",
    "hom_peak_areas",
    "visibility",
    "simulate_hom_visibility",
    "FIVE_PHOTON_REFLECTIVITIES",
]

FIVE_PHOTON_REFLECTIVITIES = (0.5, 0.6, 0.7, 0.8, 0.8, 0.8, 0.7, 0.5, 0.4)
HOM_OUTCOMES = ((2, 0), (1, 1), (0, 2))


@dataclass(frozen=True)
class ExperimentSpec:
    """A schedule plus which input bins carry a photon.

    ``sequence_period_ns`` is the frame repetition period ``T``; bin ``b``
    (1-based) is centred ``(b - 1) * tau`` after the frame start.
    """

    schedule: ReflectivitySchedule
    input: tuple[int, ...]
    sequence_period_ns: float | None = None
    label: str = ""

    def __post_init__(self):
        inp = tuple(int(v) for v in self.input)
        object.__setattr__(self, "input", inp)
        if len(inp) != self.schedule.m:
            raise ValueError(f"input: expected {self.schedule.m} entries, got {len(inp)}")
        if any(v not in (0, 1) for v in inp):
            raise ValueError("input: entries must be 0 or 1")
        if sum(inp) < 1:
            raise ValueError("input: at least one photon required")
        if self.sequence_period_ns is None:
            object.__setattr__(self, "sequence_period_ns", (self.schedule.m + 1) * self.schedule.bin_period_ns)
        if self.sequence_period_ns < self.schedule.m * self.schedule.bin_period_ns:
            raise ValueError(
                f"sequence_period_ns: {self.sequence_period_ns} shorter than m * tau = "
                f"{self.schedule.m * self.schedule.bin_period_ns}"
            )

    @property
    def m(self) -> int:
        return self.schedule.m

    @property
    def n(self) -> int:
        return sum(self.input)

    @property
    def tau_ns(self) -> float:
        return self.schedule.bin_period_ns

    def to_dict(self) -> dict:
        return {
            "input": list(self.input),
            "sequence_period_ns": self.sequence_period_ns,
            "label": self.label,
        }

    @classmethod
    def from_dict(cls, schedule: ReflectivitySchedule, data: Mapping) -> "ExperimentSpec":
        return cls(schedule, tuple(data["input"]), data.get("sequence_period_ns"), data.get("label", ""))


def standard_experiment(n: int, parity: str = "odd", reflectivities: str | Sequence[float] = "staircase",
                        bin_period_ns: float = 100.0, loop_transmission: float = 1.0,
                        sequence_period_ns: float | None = None) -> ExperimentSpec:
    """``n`` photons in ``m = 2n`` bins, on odd (1, 3, ...) or even (2, 4, ...) positions."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    m = 2 * n
    if isinstance(reflectivities, str):
        if reflectivities not in ("staircase", "staircase_k_over_k1"):
            raise ValueError(f"unknown reflectivity rule {reflectivities!r}")
        refl = staircase_reflectivities(m)
    else:
        refl = list(reflectivities)
        if len(refl) != m - 1:
            raise ValueError(f"reflectivities: expected {m - 1} values for n={n}, got {len(refl)}")
    if parity == "odd":
        inp = tuple(1 if b % 2 == 1 else 0 for b in range(1, m + 1))
    elif parity == "even":
        inp = tuple(1 if b % 2 == 0 else 0 for b in range(1, m + 1))
    else:
        raise ValueError(f"parity must be 'odd' or 'even', got {parity!r}")
    schedule = ReflectivitySchedule(m, refl, bin_period_ns, loop_transmission)
    return ExperimentSpec(schedule, inp, sequence_period_ns, f"n={n} m={m} {parity}")


def hom_bin_state(R_mid: float, model: str = "indistinguishable", x: float | None = None,
                  loop_transmission: float = 1.0) -> dict[tuple[int, int], float]:
    """Two-photon output probabilities of the ``{1, R_mid, 1}`` sequence.

    Normalised within the two-photon subspace. ``model="mixture"`` weights
    the unnormalised outputs of the two photon models by ``x`` and ``1 - x``
    before normalising, i.e. post-selection on both photons surviving.
    """
    M = compile_schedule(ReflectivitySchedule(2, [R_mid], loop_transmission=loop_transmission))

    def raw(rule):
        return np.array([rule(M, (1, 1), out) for out in HOM_OUTCOMES])

    if model == "indistinguishable":
        p = raw(outcome_probability)
    elif model == "distinguishable":
        p = raw(outcome_probability_distinguishable)
    elif model == "mixture":
        if x is None or not 0.0 <= x <= 1.0:
            raise ValueError("mixture model needs a weight x in [0, 1]")
        p = x * raw(outcome_probability) + (1 - x) * raw(outcome_probability_distinguishable)
    else:
        raise ValueError(f"unknown model {model!r}")
    p = p / p.sum()
    return {out: float(v) for out, v in zip(HOM_OUTCOMES, p)}


@dataclass
class CorrelationHistogram:
    """Cross-detector coincidences versus delay ``t_B - t_A`` on a regular grid."""

    bin_width_ns: float
    delays_ns: np.ndarray
    counts: np.ndarray
    window_ns: float = 3.0
    meta: dict = field(default_factory=dict)

    def as_dict(self) -> dict[float, int]:
        return {float(d): int(c) for d, c in zip(self.delays_ns, self.counts)}

    def to_csv(self, header: str | None = None) -> str:
        buf = io.StringIO()
        if header:
            buf.write(f"# {header}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["delay_ns", "counts"])
        for d, c in zip(self.delays_ns, self.counts):
            w.writerow([repr(float(d)), int(c)])
        return buf.getvalue()


def hom_histogram(bin_state: Mapping[tuple[int, ...], float], tau_ns: float = 100.0, T_ns: float = 500.0,
                  n_frames: int = 100_000, seed: int = 0, resolution_ns: float = 1.0,
                  window_ns: float = 3.0, span_frames: int = 5) -> CorrelationHistogram:
    """Monte-Carlo second-order autocorrelation behind a static 50:50 splitter.

    Each frame draws an output pattern from ``bin_state``; every photon goes
    to detector A or B with probability 1/2. Coincidences are collected
    between all A/B pairs, within and across frames, up to ``span_frames * T``.
    Detectors are ideal: no dead time, dark counts or jitter.
    """
    if n_frames < 1:
        raise ValueError("n_frames must be >= 1")
    outcomes = np.array(list(bin_state.keys()), dtype=np.int64)
    probs = np.array(list(bin_state.values()), dtype=float)
    if np.any(probs < 0) or not math.isclose(probs.sum(), 1.0, abs_tol=1e-9):
        raise ValueError("bin_state probabilities must be non-negative and sum to 1")
    rng = np.random.default_rng(seed)
    occ = outcomes[rng.choice(len(probs), size=n_frames, p=probs / probs.sum())]
    on_a = rng.binomial(occ, 0.5)
    on_b = occ - on_a
    m = occ.shape[1]

    half = int(math.ceil(span_frames * T_ns / resolution_ns))
    delays = np.arange(-half, half + 1) * resolution_ns
    counts = np.zeros(delays.size, dtype=np.int64)
    limit = span_frames * T_ns + 1e-9
    for d in range(-span_frames, span_frames + 1):
        if abs(d) >= n_frames:
            continue
        a = on_a[max(0, -d): n_frames - max(0, d)]
        b = on_b[max(0, d): n_frames - max(0, -d)]
        pair = a.T @ b  # pair[i, j]: A photons in bin i, B photons in bin j, d frames later
        for i in range(m):
            for j in range(m):
                if pair[i, j] == 0:
                    continue
                delay = d * T_ns + (j - i) * tau_ns
                if abs(delay) <= limit:
                    counts[int(round(delay / resolution_ns)) + half] += pair[i, j]
    return CorrelationHistogram(resolution_ns, delays, counts, window_ns,
                                {"tau_ns": tau_ns, "T_ns": T_ns, "n_frames": n_frames, "seed": seed})


def peak_area(hist: CorrelationHistogram, center_ns: float, window_ns: float | None = None) -> int:
    """Counts within ``window/2`` of ``center_ns``."""
    w = hist.window_ns if window_ns is None else window_ns
    sel = np.abs(hist.delays_ns - center_ns) <= w / 2 + 1e-9
    return int(hist.counts[sel].sum())


def hom_peak_areas(hist: CorrelationHistogram, tau_ns: float, T_ns: float,
                   window_ns: float | None = None) -> dict[str, float]:
    """Correlated peaks at ``-tau, 0, +tau`` and the uncorrelated reference ``C`` (mean of the ``+-T`` peaks)."""
    areas = {
        "C_minus": peak_area(hist, -tau_ns, window_ns),
        "C_0": peak_area(hist, 0.0, window_ns),
        "C_plus": peak_area(hist, tau_ns, window_ns),
        "C_T_minus": peak_area(hist, -T_ns, window_ns),
        "C_T_plus": peak_area(hist, T_ns, window_ns),
    }
    areas["C"] = 0.5 * (areas["C_T_minus"] + areas["C_T_plus"])
    return areas


def visibility(C_plus: float, C_minus: float, C_0: float) -> float:
    """Two-photon time-bin visibility ``1 - 2 C_|tau| / (C_|tau| + C_0)``."""
    if min(C_plus, C_minus, C_0) < 0:
        raise ValueError("peak areas must be non-negative")
    c_tau = C_plus + C_minus
    if c_tau + C_0 == 0:
        raise ValueError("all peak areas are zero")
    return 1.0 - 2.0 * c_tau / (c_tau + C_0)


def simulate_hom_visibility(x: float, loop_transmission: float = 1.0, R_mid: float = 0.5,
                            tau_ns: float = 100.0, T_ns: float = 500.0, n_frames: int = 1_000_000,
                            seed: int = 0, window_ns: float = 3.0) -> tuple[float, dict[str, float], CorrelationHistogram]:
    """Bin state -> synthetic histogram -> peak integration -> visibility."""
    state = hom_bin_state(R_mid, "mixture", x=x, loop_transmission=loop_transmission)
    hist = hom_histogram(state, tau_ns, T_ns, n_frames, seed, window_ns=window_ns)
    areas = hom_peak_areas(hist, tau_ns, T_ns)
    return visibility(areas["C_plus"], areas["C_minus"], areas["C_0"]), areas, hist
