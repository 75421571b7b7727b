"""Single-detector time-tag streams: synthesis, file I/O, binning and event extraction.

Timestamps are integer picoseconds. Frame ``f`` starts at ``t0 + f * T`` and
bin ``b`` (1-based) is centred ``(b - 1) * tau`` later.
"""
from __future__ import annotations

import csv
import io
import struct
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .fockcore import PhotonDistribution
from .protocol import ExperimentSpec

__all__ = [
    "TagStream",
    "SequenceRecord",
    "synthesize_stream",
    "bin_tags",
    "extract_events",
    "stream_statistics",
    "write_tags",
    "read_tags",
    "write_tags_csv",
    "read_tags_csv",
]

MAGIC = b"TBTAGS\x00\x00"
VERSION = 1
HEADER = struct.Struct("<8sII")  # magic, version, reserved -> 16 bytes
RECORD = np.dtype([("timestamp_ps", "<u8"), ("channel", "u1")])  # packed, 9 bytes


@dataclass
class TagStream:
    timestamps_ps: np.ndarray
    channels: np.ndarray
    origin: str = "synthetic"

    def __post_init__(self):
        self.timestamps_ps = np.asarray(self.timestamps_ps, dtype=np.int64)
        self.channels = np.asarray(self.channels, dtype=np.uint8)
        if self.timestamps_ps.shape != self.channels.shape:
            raise ValueError("timestamps and channels must be parallel")
        if np.any(self.channels > 1):
            raise ValueError("channels must be 0 or 1")

    def __len__(self):
        return self.timestamps_ps.size

    def is_sorted(self) -> bool:
        return bool(np.all(np.diff(self.timestamps_ps) >= 0))


@dataclass
class SequenceRecord:
    frame_index: int
    occupied_bins: frozenset[int]
    stray_count: int = 0
    duplicate_count: int = 0


def _ps(ns: float) -> int:
    return int(round(ns * 1000))


def synthesize_stream(dist: PhotonDistribution, spec: ExperimentSpec, detector_efficiency: float = 1.0,
                      jitter_sigma_ps: float = 0.0, n_frames: int = 1000, seed: int = 0,
                      t0_ps: int = 0, return_outcomes: bool = False):
    """Draw one outcome per frame and emit a tag per detected photon.

    Photons are thinned independently with ``detector_efficiency``; a bin
    holding several photons yields one tag per survivor, as a file from a
    non-resolving detector could. With ``return_outcomes`` the drawn support
    indices are returned alongside the stream.
    """
    if dist.m != spec.m:
        raise ValueError(f"distribution has {dist.m} modes, experiment has {spec.m}")
    if not 0.0 < detector_efficiency <= 1.0:
        raise ValueError(f"detector_efficiency must lie in (0, 1], got {detector_efficiency}")
    rng = np.random.default_rng(seed)
    drawn = dist.sample(rng, n_frames)
    occ = dist.patterns[drawn]
    if detector_efficiency < 1.0:
        occ = rng.binomial(occ, detector_efficiency)
    frame_idx, bin_idx = np.nonzero(occ)
    reps = occ[frame_idx, bin_idx]
    frame_idx = np.repeat(frame_idx, reps)
    bin_idx = np.repeat(bin_idx, reps)
    ts = t0_ps + frame_idx * _ps(spec.sequence_period_ns) + bin_idx * _ps(spec.tau_ns)
    if jitter_sigma_ps > 0:
        ts = ts + np.rint(rng.normal(0.0, jitter_sigma_ps, size=ts.size)).astype(np.int64)
    order = np.argsort(ts, kind="stable")
    stream = TagStream(ts[order], np.zeros(ts.size, dtype=np.uint8), "synthetic")
    return (stream, drawn) if return_outcomes else stream


def bin_tags(stream: TagStream, spec: ExperimentSpec, window_ns: float = 3.0, t0_ps: int = 0,
             n_frames: int | None = None, channel: int = 0) -> list[SequenceRecord]:
    """Reduce a stream to one record per frame.

    Frames are found by dividing ``t - t0`` by ``T`` with a half-bin guard so a
    tag jittered just before its frame start is not pushed into the previous
    frame. Tags farther than ``window/2`` from every bin centre are strays;
    repeated tags in one bin count once and are tallied as duplicates.
    """
    if not window_ns < spec.tau_ns:
        raise ValueError(f"window {window_ns} ns must be shorter than the bin period {spec.tau_ns} ns")
    if not stream.is_sorted():
        raise ValueError("tag stream is not sorted by timestamp")
    T, tau = _ps(spec.sequence_period_ns), _ps(spec.tau_ns)
    half_window = window_ns * 1000 / 2
    sel = stream.channels == channel
    rel = stream.timestamps_ps[sel] - t0_ps
    keep = rel >= -(tau // 2)
    rel = rel[keep]
    frame = (rel + tau // 2) // T
    offset = rel - frame * T
    b = np.rint(offset / tau).astype(np.int64)
    good = (np.abs(offset - b * tau) <= half_window) & (b >= 0) & (b < spec.m)

    if n_frames is None:
        n_frames = int(frame.max()) + 1 if frame.size else 0
    inside = frame < n_frames
    stray = np.bincount(frame[inside & ~good], minlength=n_frames)[:n_frames]
    # tags before the first frame are strays of frame 0
    if n_frames:
        stray[0] += int((~keep).sum())

    gf, gb = frame[good & inside], b[good & inside]
    key = gf * spec.m + gb
    uniq, mult = np.unique(key, return_counts=True)
    dup = np.bincount(uniq // spec.m, weights=mult - 1, minlength=n_frames).astype(np.int64)[:n_frames]
    bins_per_frame: list[frozenset] = [frozenset()] * n_frames
    if uniq.size:
        frames_u = uniq // spec.m
        starts = np.flatnonzero(np.r_[True, frames_u[1:] != frames_u[:-1]])
        for f, group in zip(frames_u[starts], np.split(uniq % spec.m + 1, starts[1:])):
            bins_per_frame[int(f)] = frozenset(group.tolist())
    stray, dup = stray.tolist(), dup.tolist()
    return [SequenceRecord(f, bins_per_frame[f], stray[f], dup[f]) for f in range(n_frames)]


def extract_events(records: list[SequenceRecord], n: int, m: int) -> tuple[Counter, Counter]:
    """Count frames with exactly ``n`` occupied bins, keyed by 0/1 pattern.

    Returns ``(events, census)`` where ``census`` maps every observed
    occupied-bin cardinality to its number of frames.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    events: Counter = Counter()
    census: Counter = Counter()
    for rec in records:
        k = len(rec.occupied_bins)
        census[k] += 1
        if k == n:
            pattern = [0] * m
            for b in rec.occupied_bins:
                pattern[b - 1] = 1
            events[tuple(pattern)] += 1
    return events, census


def event_frequencies(events: Counter, support: PhotonDistribution) -> np.ndarray:
    """Relative frequencies of ``events`` on the ordered support of ``support``."""
    idx = support.index()
    counts = np.zeros(len(support))
    for pattern, c in events.items():
        if pattern in idx:
            counts[idx[pattern]] += c
    total = counts.sum()
    return counts / total if total else counts


def stream_statistics(stream: TagStream, records: list[SequenceRecord], n: int, m: int) -> dict:
    events, census = extract_events(records, n, m)
    strays = sum(r.stray_count for r in records)
    return {
        "tags": len(stream),
        "frames": len(records),
        "stray_tags": strays,
        "stray_fraction": strays / len(stream) if len(stream) else 0.0,
        "duplicate_tags": sum(r.duplicate_count for r in records),
        "n": n,
        "collision_free_events": sum(events.values()),
        "frame_census": {str(k): census[k] for k in sorted(census)},
    }


def write_tags(path, stream: TagStream) -> None:
    rec = np.empty(len(stream), dtype=RECORD)
    rec["timestamp_ps"] = stream.timestamps_ps
    rec["channel"] = stream.channels
    with open(path, "wb") as fh:
        fh.write(HEADER.pack(MAGIC, VERSION, 0))
        fh.write(rec.tobytes())


def read_tags(path) -> TagStream:
    data = Path(path).read_bytes()
    if len(data) < HEADER.size:
        raise ValueError(f"{path}: truncated header")
    magic, version, _ = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ValueError(f"{path}: not a time-tag file")
    if version != VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    body = data[HEADER.size:]
    if len(body) % RECORD.itemsize:
        raise ValueError(f"{path}: truncated record")
    rec = np.frombuffer(body, dtype=RECORD)
    return TagStream(rec["timestamp_ps"].astype(np.int64), rec["channel"], "file")


def write_tags_csv(path, stream: TagStream, header: str | None = None) -> None:
    buf = io.StringIO()
    if header:
        buf.write(f"# {header}\n")
    buf.write("timestamp_ps,channel\n")
    for t, c in zip(stream.timestamps_ps, stream.channels):
        buf.write(f"{int(t)},{int(c)}\n")
    Path(path).write_text(buf.getvalue())


def read_tags_csv(path) -> TagStream:
    lines = [ln for ln in Path(path).read_text().splitlines() if ln and not ln.startswith("#")]
    rows = list(csv.reader(lines[1:]))
    ts = np.array([int(r[0]) for r in rows], dtype=np.int64)
    ch = np.array([int(r[1]) for r in rows], dtype=np.uint8)
    return TagStream(ts, ch, "file")
