"""Sample validation against the uniform and distinguishable-photon hypotheses.

* Row-norm estimator counter: each event scores the product of its selected
  row norms; a +1/-1 counter tracks whether the score beats the median score
  of the uniform distribution over collision-free outcomes.
* Coarse-grained two-sample test: K-means clusters a bona fide sample, test
  events are assigned to the nearest centroid, cluster occupancies are
  compared with a two-sample chi-squared test.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.special import gammaincc

from .fockcore import PhotonDistribution, collision_free_outcomes
from .netcompile import as_matrix

__all__ = [
    "ValidationReport",
    "statistical_fidelity",
    "rne_scores",
    "rne_threshold",
    "rne_counter",
    "kmeans_cluster",
    "assign_clusters",
    "chi2_two_sample",
    "validate_distinguishable",
    "validate_uniform",
    "event_features",
]


@dataclass
class ValidationReport:
    method: str
    statistic: float
    p_value: float | None = None
    counter_trace: list[int] | None = None
    parameters: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.method not in ("rne_uniform", "kmeans_chi2", "fidelity"):
            raise ValueError(f"unknown validation method {self.method!r}")
        if self.p_value is not None and not 0.0 <= self.p_value <= 1.0:
            raise ValueError(f"p-value {self.p_value} outside [0, 1]")

    def to_json(self) -> dict:
        out = {"method": self.method, "statistic": self.statistic, "p_value": self.p_value,
               "parameters": self.parameters}
        if self.counter_trace is not None:
            out["counter_trace"] = list(self.counter_trace)
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)


def statistical_fidelity(P: PhotonDistribution | np.ndarray, Q: PhotonDistribution | np.ndarray) -> float:
    """Bhattacharyya overlap ``sum_i sqrt(p_i q_i)``."""
    if isinstance(P, PhotonDistribution) and isinstance(Q, PhotonDistribution):
        if not np.array_equal(P.patterns, Q.patterns):
            raise ValueError("distributions must share support ordering")
        p, q = P.probabilities, Q.probabilities
    else:
        p = P.probabilities if isinstance(P, PhotonDistribution) else np.asarray(P, dtype=float)
        q = Q.probabilities if isinstance(Q, PhotonDistribution) else np.asarray(Q, dtype=float)
        if p.shape != q.shape:
            raise ValueError("distributions must share support ordering")
    return float(np.sum(np.sqrt(p * q)))


def _check_cf_input(inp) -> np.ndarray:
    inp = np.asarray(inp, dtype=np.int64)
    if np.any((inp != 0) & (inp != 1)):
        raise ValueError("row-norm estimator needs a collision-free input")
    if inp.sum() < 1:
        raise ValueError("row-norm estimator needs at least one photon")
    return inp


def rne_scores(M, input, events) -> np.ndarray:
    """``prod_{j in T} sum_{i in S} |M[j, i]|^2`` for each 0/1 event pattern ``T``."""
    inp = _check_cf_input(input)
    row_norms = (np.abs(as_matrix(M)) ** 2)[:, inp.astype(bool)].sum(axis=1)
    ev = np.asarray(events, dtype=np.int64)
    if ev.ndim == 1:
        ev = ev[None, :]
    # product over occupied rows; unoccupied rows contribute a factor 1
    return np.prod(np.where(ev > 0, row_norms[None, :], 1.0), axis=1)


def rne_threshold(M, input) -> float:
    """Median estimator value over the uniform distribution on collision-free outcomes."""
    inp = _check_cf_input(input)
    outcomes = collision_free_outcomes(inp.size, int(inp.sum()))
    return float(np.median(rne_scores(M, inp, outcomes)))


def rne_counter(events, M, input, threshold: float) -> list[int]:
    """Running counter: +1 when an event's score exceeds ``threshold``, -1 otherwise."""
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    ev = np.asarray(events, dtype=np.int64)
    if ev.size == 0:
        return []
    steps = np.where(rne_scores(M, input, ev) > threshold, 1, -1)
    return np.cumsum(steps).tolist()


def validate_uniform(events, M, input) -> ValidationReport:
    thr = rne_threshold(M, input)
    trace = rne_counter(events, M, input, thr)
    return ValidationReport("rne_uniform", float(trace[-1]) if trace else 0.0, None, trace,
                            {"threshold": thr, "events": len(trace)})


def _kmeanspp_seeds(points: np.ndarray, K: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding: first centre uniform, then squared-distance weighted draws."""
    n = len(points)
    centers = [points[rng.integers(n)]]
    d2 = np.sum((points - centers[0]) ** 2, axis=1)
    for _ in range(1, K):
        total = d2.sum()
        if total == 0:
            raise ValueError("fewer distinct points than clusters")
        idx = rng.choice(n, p=d2 / total)
        centers.append(points[idx])
        d2 = np.minimum(d2, np.sum((points - points[idx]) ** 2, axis=1))
    return np.array(centers, dtype=float)


def assign_clusters(points, centroids) -> np.ndarray:
    """Index of the nearest centroid (Euclidean, lowest index on ties)."""
    p = np.asarray(points, dtype=float)
    c = np.asarray(centroids, dtype=float)
    d2 = ((p[:, None, :] - c[None, :, :]) ** 2).sum(axis=2)
    return np.argmin(d2, axis=1)


def kmeans_cluster(points, K: int, seed: int = 0, max_iter: int = 300,
                   init: np.ndarray | None = None, n_init: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Lloyd iteration from k-means++ seeds until assignments stop changing.

    Returns ``(centroids, assignments)``. A cluster that empties keeps its
    previous centroid. With ``n_init > 1`` the run with the lowest inertia
    wins; restart ``r`` is seeded from ``(seed, r)``.
    """
    pts = np.asarray(points, dtype=float)
    if K < 2:
        raise ValueError("K must be >= 2")
    n_distinct = len(np.unique(pts, axis=0))
    if K > n_distinct:
        raise ValueError(f"K={K} exceeds the number of distinct points ({n_distinct})")
    if init is not None:
        return _lloyd(pts, np.array(init, dtype=float), max_iter)
    best = None
    for r in range(n_init):
        rng = np.random.default_rng(seed if n_init == 1 else [seed, r])
        centroids, labels = _lloyd(pts, _kmeanspp_seeds(pts, K, rng), max_iter)
        inertia = float(((pts - centroids[labels]) ** 2).sum())
        if best is None or inertia < best[0]:
            best = (inertia, centroids, labels)
    return best[1], best[2]


def _lloyd(pts, centroids, max_iter):
    labels = assign_clusters(pts, centroids)
    for _ in range(max_iter):
        for k in range(len(centroids)):
            members = pts[labels == k]
            if len(members):
                centroids[k] = members.mean(axis=0)
        new = assign_clusters(pts, centroids)
        if np.array_equal(new, labels):
            break
        labels = new
    return centroids, labels


def event_features(events, kind: str = "modes") -> np.ndarray:
    """Clustering coordinates for 0/1 events.

    ``"modes"`` lists the occupied output modes in increasing order (an
    ``n``-vector); ``"binary"`` is the raw ``m``-dimensional occupation vector.
    """
    ev = np.asarray(events, dtype=np.int64)
    if kind == "binary":
        return ev.astype(float)
    if kind == "modes":
        if ev.size == 0:
            return np.zeros((0, 0))
        n = int(ev[0].sum())
        if np.any(ev.sum(axis=1) != n) or np.any(ev > 1):
            raise ValueError("mode-list features need collision-free events with a common photon number")
        return np.nonzero(ev)[1].reshape(len(ev), n).astype(float)
    raise ValueError(f"unknown feature map {kind!r}")


DEFAULT_K = 4


def chi2_two_sample(counts_a: Sequence[int], counts_b: Sequence[int]) -> tuple[float, float]:
    """Two-sample chi-squared for binned data with possibly unequal totals.

    Bins empty in both samples are merged away, removing one degree of
    freedom each. The p-value is the upper regularised incomplete gamma
    function of the statistic with ``bins - 1`` degrees of freedom.
    """
    a = np.asarray(counts_a, dtype=float)
    b = np.asarray(counts_b, dtype=float)
    if a.shape != b.shape or a.ndim != 1 or a.size < 2:
        raise ValueError("need two count vectors of equal length >= 2")
    if np.any(a < 0) or np.any(b < 0):
        raise ValueError("counts must be non-negative")
    na, nb = a.sum(), b.sum()
    if na <= 0 or nb <= 0:
        raise ValueError("both samples need positive totals")
    keep = (a + b) > 0
    a, b = a[keep], b[keep]
    dof = a.size - 1
    if dof < 1:
        return 0.0, 1.0
    chi2 = float(np.sum((np.sqrt(nb / na) * a - np.sqrt(na / nb) * b) ** 2 / (a + b)))
    return chi2, float(gammaincc(dof / 2.0, chi2 / 2.0))


def _events_to_array(test) -> np.ndarray:
    """Accept a pattern->count mapping or an (N, m) array of events."""
    if isinstance(test, Mapping):
        pats = [np.repeat(np.array(p, dtype=np.int64)[None, :], int(c), axis=0)
                for p, c in sorted(test.items()) if c > 0]
        return np.concatenate(pats) if pats else np.zeros((0, 0), dtype=np.int64)
    return np.asarray(test, dtype=np.int64)


def validate_distinguishable(test, bona_fide_dist: PhotonDistribution, K: int = DEFAULT_K,
                             sample_size: int = 500, repeats: int = 100, seed: int = 0,
                             features: str = "modes", n_init: int = 10) -> ValidationReport:
    """Compare test events with a bona fide sample through clustered chi-squared.

    ``test`` is a pattern->count mapping or an array of 0/1 events. A bona
    fide sample of ``sample_size`` is drawn from ``bona_fide_dist`` and
    clustered; each repeat subsamples ``sample_size`` test events without
    replacement and scores the cluster occupancies. The p-value refers to the
    mean chi-squared over repeats under the chi-squared law with ``K - 1``
    degrees of freedom.
    """
    events = _events_to_array(test)
    if len(events) < sample_size:
        raise ValueError(f"need at least {sample_size} test events, got {len(events)}")
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    bona_seed, km_seed, sub_seed = np.random.SeedSequence(seed).spawn(3)
    bona = bona_fide_dist.patterns[bona_fide_dist.sample(np.random.default_rng(bona_seed), sample_size)]
    bona_x = event_features(bona, features)
    test_x = event_features(events, features)
    centroids, labels = kmeans_cluster(bona_x, K, seed=int(km_seed.generate_state(1)[0]), n_init=n_init)
    bona_counts = np.bincount(labels, minlength=K)

    chis = np.empty(repeats)
    for r, child in enumerate(sub_seed.spawn(repeats)):
        rng = np.random.default_rng(child)
        sub = test_x[rng.choice(len(test_x), size=sample_size, replace=False)]
        test_counts = np.bincount(assign_clusters(sub, centroids), minlength=K)
        chis[r] = chi2_two_sample(bona_counts, test_counts)[0]
    dof = K - 1
    mean_chi2 = float(chis.mean())
    p = float(gammaincc(dof / 2.0, mean_chi2 / 2.0))
    return ValidationReport("kmeans_chi2", mean_chi2, p, None, {
        "K": K, "sample_size": sample_size, "repeats": repeats, "seed": seed,
        "features": features, "n_init": n_init, "dof": dof,
        "bona_fide_cluster_counts": bona_counts.tolist(),
        "empty_cluster_rule": "bins empty in both samples are merged away",
    })
