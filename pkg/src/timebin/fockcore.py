"""Fock-state bookkeeping and permanent-based output probabilities."""
from __future__ import annotations

import csv
import io
import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numba
import numpy as np

from .netcompile import ModeMatrix, as_matrix

__all__ = [
    "PhotonDistribution",
    "permanent",
    "collision_free_outcomes",
    "fock_outcomes",
    "outcome_probability",
    "outcome_probability_distinguishable",
    "output_distribution",
    "pattern_to_str",
    "pattern_from_str",
]

SUBSPACES = ("full", "collision_free")
MODELS = ("indistinguishable", "distinguishable", "mixture")


@numba.njit(cache=True, nogil=True)
def _ryser_gray(a):
    # Ryser formula, subsets visited in Gray-code order so each step adds or
    # removes a single column from the running row sums.
    n = a.shape[0]
    if n == 0:
        return 1.0 + 0.0j
    row_sums = np.zeros(n, dtype=np.complex128)
    total = 0.0 + 0.0j
    sign = -1.0
    gray = 0
    for k in range(1, 1 << n):
        j = 0
        while not (k >> j) & 1:
            j += 1
        bit = 1 << j
        if gray & bit:
            for r in range(n):
                row_sums[r] -= a[r, j]
        else:
            for r in range(n):
                row_sums[r] += a[r, j]
        gray ^= bit
        prod = 1.0 + 0.0j
        for r in range(n):
            prod *= row_sums[r]
        total += sign * prod
        sign = -sign
    if n % 2 == 1:
        total = -total
    return total


@numba.njit(cache=True, nogil=True)
def _batch_permanents(mat, cols, rows, out):
    # out[k] = Perm(mat[rows[k]][:, cols])
    n = cols.shape[0]
    sub = np.empty((n, n), dtype=np.complex128)
    for k in range(rows.shape[0]):
        for r in range(n):
            for c in range(n):
                sub[r, c] = mat[rows[k, r], cols[c]]
        out[k] = _ryser_gray(sub)


def permanent(A) -> complex:
    """Permanent of a square matrix, ``O(2^d d)`` via Gray-code Ryser."""
    a = np.asarray(A, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"permanent needs a square matrix, got shape {a.shape}")
    return complex(_ryser_gray(np.ascontiguousarray(a)))


def pattern_to_str(pattern: Sequence[int]) -> str:
    return "".join(str(int(v)) for v in pattern)


def pattern_from_str(s: str) -> tuple[int, ...]:
    return tuple(int(c) for c in s.strip())


def collision_free_outcomes(m: int, n: int) -> np.ndarray:
    """All ``C(m, n)`` 0/1 patterns, ordered lexicographically by occupied mode indices.

    >>> collision_free_outcomes(4, 2)[0]
    array([1, 1, 0, 0])
    """
    if n < 0 or m < 0 or n > m:
        raise ValueError(f"need 0 <= n <= m, got m={m}, n={n}")
    out = np.zeros((math.comb(m, n), m), dtype=np.int64)
    for k, modes in enumerate(itertools.combinations(range(m), n)):
        out[k, list(modes)] = 1
    return out


def fock_outcomes(m: int, n: int) -> np.ndarray:
    """All n-photon occupation patterns over m modes (with collisions), same ordering rule."""
    if n < 0 or m < 1:
        raise ValueError(f"need n >= 0 and m >= 1, got m={m}, n={n}")
    out = np.zeros((math.comb(m + n - 1, n), m), dtype=np.int64)
    for k, modes in enumerate(itertools.combinations_with_replacement(range(m), n)):
        for j in modes:
            out[k, j] += 1
    return out


def _expand(pattern) -> np.ndarray:
    """Mode index repeated once per photon, e.g. (2, 0, 1) -> [0, 0, 2]."""
    p = np.asarray(pattern, dtype=np.int64)
    if p.ndim != 1 or np.any(p < 0):
        raise ValueError(f"invalid occupation pattern {pattern!r}")
    return np.repeat(np.arange(p.size), p)


def _factorial_prod(pattern) -> float:
    return float(np.prod([math.factorial(int(v)) for v in pattern]))


def _check_pair(M, inp, out):
    a = as_matrix(M)
    inp = np.asarray(inp, dtype=np.int64)
    out = np.asarray(out, dtype=np.int64)
    if inp.size != a.shape[1] or out.size != a.shape[0]:
        raise ValueError(f"pattern length does not match matrix dimension {a.shape[0]}")
    if inp.sum() != out.sum():
        raise ValueError(f"photon number mismatch: input has {inp.sum()}, output has {out.sum()}")
    return a, inp, out


def outcome_probability(M, input, output) -> float:
    """Indistinguishable-photon transition probability ``|Perm(M_ST)|^2 / (prod s! prod t!)``."""
    a, inp, out = _check_pair(M, input, output)
    sub = a[np.ix_(_expand(out), _expand(inp))]
    return abs(permanent(sub)) ** 2 / (_factorial_prod(inp) * _factorial_prod(out))


def outcome_probability_distinguishable(M, input, output) -> float:
    """Fully distinguishable photons: ``Perm(|M_ST|^2) / prod t!``."""
    a, inp, out = _check_pair(M, input, output)
    w = np.abs(a[np.ix_(_expand(out), _expand(inp))]) ** 2
    return max(permanent(w).real, 0.0) / _factorial_prod(out)


@dataclass
class PhotonDistribution:
    """Probabilities over an ordered support of occupation patterns.

    ``mass`` is the total probability of the support before normalisation,
    e.g. the collision-free probability ``P_cf`` of a collision-free distribution.
    """

    patterns: np.ndarray
    probabilities: np.ndarray
    subspace: str = "collision_free"
    model: str = "indistinguishable"
    mass: float = 1.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.patterns = np.asarray(self.patterns, dtype=np.int64)
        self.probabilities = np.asarray(self.probabilities, dtype=float)
        if self.patterns.ndim != 2 or len(self.patterns) != len(self.probabilities):
            raise ValueError("patterns and probabilities must be parallel")
        if self.subspace not in SUBSPACES:
            raise ValueError(f"unknown subspace {self.subspace!r}")
        if self.model not in MODELS:
            raise ValueError(f"unknown model {self.model!r}")

    @property
    def m(self) -> int:
        return self.patterns.shape[1]

    @property
    def n(self) -> int:
        return int(self.patterns[0].sum()) if len(self.patterns) else 0

    def __len__(self):
        return len(self.probabilities)

    def as_dict(self) -> dict[tuple[int, ...], float]:
        return {tuple(int(v) for v in p): float(q) for p, q in zip(self.patterns, self.probabilities)}

    def index(self) -> dict[tuple[int, ...], int]:
        return {tuple(int(v) for v in p): k for k, p in enumerate(self.patterns)}

    def same_support(self, other: "PhotonDistribution") -> bool:
        return (self.patterns.shape == other.patterns.shape
                and bool(np.array_equal(self.patterns, other.patterns))
                and self.subspace == other.subspace)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Indices into the support, drawn i.i.d."""
        p = self.probabilities / self.probabilities.sum()
        return rng.choice(len(p), size=size, p=p)

    def to_csv(self, header: str | None = None) -> str:
        buf = io.StringIO()
        if header:
            buf.write(f"# {header}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["pattern", "probability"])
        for p, q in zip(self.patterns, self.probabilities):
            w.writerow([pattern_to_str(p), repr(float(q))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, subspace: str = "collision_free",
                 model: str = "indistinguishable") -> "PhotonDistribution":
        rows = [r for r in csv.reader(line for line in text.splitlines() if not line.startswith("#"))]
        body = [r for r in rows[1:] if r]
        patterns = [pattern_from_str(r[0]) for r in body]
        probs = [float(r[1]) for r in body]
        return cls(np.array(patterns), np.array(probs), subspace, model)

    def to_json(self) -> dict:
        return {
            "subspace": self.subspace,
            "model": self.model,
            "mass": self.mass,
            "m": self.m,
            "n": self.n,
            **self.meta,
            "support": [pattern_to_str(p) for p in self.patterns],
            "probabilities": [float(q) for q in self.probabilities],
        }

    @classmethod
    def from_json(cls, data: dict) -> "PhotonDistribution":
        return cls(
            np.array([pattern_from_str(s) for s in data["support"]]),
            np.array(data["probabilities"], dtype=float),
            data["subspace"],
            data["model"],
            data.get("mass", 1.0),
        )


def _rule_values(a: np.ndarray, inp: np.ndarray, patterns: np.ndarray, model: str,
                 n_threads: int) -> np.ndarray:
    cols = _expand(inp)
    rows = np.stack([_expand(p) for p in patterns]) if len(patterns) else np.zeros((0, 0), np.int64)
    if model == "indistinguishable":
        mat = np.ascontiguousarray(a, dtype=np.complex128)
    else:
        mat = np.ascontiguousarray(np.abs(a) ** 2, dtype=np.complex128)
    perms = np.empty(len(rows), dtype=np.complex128)
    if n_threads <= 1 or len(rows) < 2 * n_threads:
        _batch_permanents(mat, cols, rows, perms)
    else:
        bounds = np.linspace(0, len(rows), n_threads + 1).astype(int)
        with ThreadPoolExecutor(n_threads) as pool:
            list(pool.map(
                lambda lo_hi: _batch_permanents(mat, cols, rows[lo_hi[0]:lo_hi[1]], perms[lo_hi[0]:lo_hi[1]]),
                zip(bounds[:-1], bounds[1:]),
            ))
    out_fact = np.array([_factorial_prod(p) for p in patterns])
    if model == "indistinguishable":
        return np.abs(perms) ** 2 / (out_fact * _factorial_prod(inp))
    # permanents of non-negative matrices are non-negative; Ryser cancellation leaves ~1e-17 noise
    return np.clip(perms.real, 0.0, None) / out_fact


def output_distribution(M: ModeMatrix | np.ndarray, input: Sequence[int], subspace: str = "collision_free",
                        model: str = "indistinguishable", x: float | None = None,
                        n_threads: int = 1) -> PhotonDistribution:
    """Evaluate one probability rule over the chosen support and normalise within it.

    ``model="mixture"`` needs the indistinguishable weight ``x``. The full Fock
    space is only enumerated for lossless networks with ``n <= 4``; the result
    is independent of ``n_threads``.
    """
    a = as_matrix(M)
    inp = np.asarray(input, dtype=np.int64)
    if inp.size != a.shape[0]:
        raise ValueError(f"input has {inp.size} modes, matrix has {a.shape[0]}")
    n = int(inp.sum())
    if n < 1:
        raise ValueError("input must contain at least one photon")
    if model not in MODELS:
        raise ValueError(f"unknown model {model!r}")
    if model == "mixture" and (x is None or not 0.0 <= x <= 1.0):
        raise ValueError("mixture model needs a weight x in [0, 1]")
    if subspace == "full":
        if not ModeMatrix(a).is_unitary(1e-9):
            raise NotImplementedError("full-space distributions need a lossless network; "
                                      "lost-photon outcomes are not enumerated")
        if n > 4:
            raise NotImplementedError("full-space distributions are limited to n <= 4")
        patterns = fock_outcomes(a.shape[0], n)
    elif subspace == "collision_free":
        patterns = collision_free_outcomes(a.shape[0], n)
    else:
        raise ValueError(f"unknown subspace {subspace!r}")

    if model == "mixture":
        raw = (x * _rule_values(a, inp, patterns, "indistinguishable", n_threads)
               + (1 - x) * _rule_values(a, inp, patterns, "distinguishable", n_threads))
    else:
        raw = _rule_values(a, inp, patterns, model, n_threads)
    mass = float(raw.sum())
    if mass <= 0:
        raise ValueError("support carries zero probability")
    meta = {"x": x} if model == "mixture" else {}
    return PhotonDistribution(patterns, raw / mass, subspace, model, mass, meta)


def occupation(m: int, modes: Iterable[int]) -> tuple[int, ...]:
    """0/1 pattern with photons in the given 1-based bins."""
    p = [0] * m
    for b in modes:
        if not 1 <= b <= m:
            raise ValueError(f"bin {b} outside 1..{m}")
        p[b - 1] += 1
    return tuple(p)
