"""Command-line driver: one JSON config reproduces one experiment.

Seeds: every random stage draws from ``derive_seed(seed, stage)`` where
``stage`` is one of ``"synthesize"``, ``"hom"``, ``"validate"``. The derived
seed is the first 32-bit word of ``numpy.random.SeedSequence([seed, crc32(stage)])``.

Exit codes: 0 success, 2 config error, 3 I/O error, 4 precondition violation.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .fockcore import PhotonDistribution, output_distribution, pattern_from_str, pattern_to_str
from .imperfect import SourceModel, estimate_rates, frame_duty
from .netcompile import ReflectivitySchedule, compile_schedule, preview_intensity
from .protocol import ExperimentSpec, hom_peak_areas, hom_histogram, hom_bin_state, visibility
from .timetags import (bin_tags, event_frequencies, extract_events, read_tags, read_tags_csv,
                       stream_statistics, synthesize_stream, write_tags)
from .validate import (DEFAULT_K, ValidationReport, statistical_fidelity, validate_distinguishable,
                       validate_uniform)

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_PRECONDITION = 0, 2, 3, 4


class ConfigError(Exception):
    def __init__(self, field: str, message: str):
        super().__init__(message)
        self.field = field


def derive_seed(seed: int, stage: str) -> int:
    ss = np.random.SeedSequence([int(seed), zlib.crc32(stage.encode())])
    return int(ss.generate_state(1)[0])


@dataclass
class RunConfig:
    experiment: ExperimentSpec
    source: SourceModel
    simulation: dict
    validation: dict
    output_dir: Path
    hom: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)

    @property
    def seed(self) -> int:
        return int(self.simulation["seed"])

    @property
    def schedule(self) -> ReflectivitySchedule:
        return self.experiment.schedule

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.raw, sort_keys=True).encode()).hexdigest()


_SCHEDULE_FIELDS = ("m", "reflectivities", "bin_period_ns", "loop_transmission")


def _field_of(exc: Exception, default: str) -> str:
    head = str(exc).split(":")[0].split(" ")[0]
    known = _SCHEDULE_FIELDS + ("input", "sequence_period_ns", "indistinguishability", "purity_complement",
                                "end_to_end_efficiency", "repetition_rate_hz")
    return head if head in known else default


def parse_config(raw: dict, seed: int | None = None, out: str | None = None) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    raw = json.loads(json.dumps(raw))
    for key in ("m", "reflectivities"):
        if key not in raw:
            raise ConfigError(key, f"missing required key {key!r}")
    if not isinstance(raw["reflectivities"], list) or not all(
            isinstance(r, (int, float)) and not isinstance(r, bool) for r in raw["reflectivities"]):
        raise ConfigError("reflectivities", "reflectivities must be a list of numbers")
    try:
        schedule = ReflectivitySchedule.from_dict(raw)
    except (ValueError, TypeError) as exc:
        raise ConfigError(_field_of(exc, "schedule"), str(exc)) from exc

    exp_raw = raw.setdefault("experiment", {})
    if "input" not in exp_raw:
        exp_raw["input"] = [1] * min(2, schedule.m) + [0] * max(0, schedule.m - 2)
    try:
        experiment = ExperimentSpec.from_dict(schedule, exp_raw)
    except (ValueError, TypeError) as exc:
        raise ConfigError("experiment." + _field_of(exc, "input"), str(exc)) from exc
    exp_raw["sequence_period_ns"] = experiment.sequence_period_ns

    try:
        source = SourceModel.from_dict(raw.setdefault("source", {}))
    except (ValueError, TypeError) as exc:
        raise ConfigError("source." + _field_of(exc, "source"), str(exc)) from exc

    sim = raw.setdefault("simulation", {})
    if seed is not None:
        sim["seed"] = int(seed)
    if "seed" not in sim or not isinstance(sim["seed"], int):
        raise ConfigError("simulation.seed", "an integer seed is required")
    sim.setdefault("n_frames", 100_000)
    sim.setdefault("detector_efficiency", 1.0)
    sim.setdefault("jitter_sigma_ps", 0.0)
    sim.setdefault("window_ns", 3.0)
    sim.setdefault("t0_ps", 0)
    if not 0.0 < sim["detector_efficiency"] <= 1.0:
        raise ConfigError("simulation.detector_efficiency", "must lie in (0, 1]")
    if int(sim["n_frames"]) < 1:
        raise ConfigError("simulation.n_frames", "must be >= 1")

    val = raw.setdefault("validation", {})
    val.setdefault("K", DEFAULT_K)
    val.setdefault("sample_size", 500)
    val.setdefault("repeats", 100)
    hom = raw.setdefault("hom", {})
    hom.setdefault("T_ns", 500.0)
    hom.setdefault("n_frames", 1_000_000)
    hom.setdefault("window_ns", 3.0)
    hom.setdefault("resolution_ns", 1.0)

    if out is not None:
        raw["output_dir"] = out
    raw.setdefault("output_dir", "out")
    return RunConfig(experiment, source, sim, val, Path(raw["output_dir"]), hom, raw)


def load_config(path, seed: int | None = None, out: str | None = None) -> RunConfig:
    text = Path(path).read_text()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("<root>", f"invalid JSON: {exc}") from exc
    return parse_config(raw, seed, out)


# --- writers -----------------------------------------------------------------

def _write_text(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path


def _write_json(path: Path, cfg: RunConfig, payload: dict) -> Path:
    return _write_text(path, json.dumps({"config_sha256": cfg.digest(), **payload}, indent=2, sort_keys=True) + "\n")


def _write_dist(cfg: RunConfig, fmt: str, stem: str, dist: PhotonDistribution) -> Path:
    if fmt == "json":
        return _write_json(cfg.output_dir / f"{stem}.json", cfg, dist.to_json())
    return _write_text(cfg.output_dir / f"{stem}.csv", dist.to_csv(f"config_sha256={cfg.digest()}"))


def _write_counts(path: Path, cfg: RunConfig, counts: dict) -> Path:
    lines = [f"# config_sha256={cfg.digest()}", "pattern,count"]
    lines += [f"{pattern_to_str(p)},{c}" for p, c in sorted(counts.items(), reverse=True)]
    return _write_text(path, "\n".join(lines) + "\n")


def read_table(path) -> tuple[np.ndarray, np.ndarray]:
    """Read a ``pattern,<value>`` CSV (counts or probabilities) or a distribution JSON."""
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".json":
        d = PhotonDistribution.from_json(json.loads(text))
        return d.patterns, d.probabilities
    rows = list(csv.reader(ln for ln in text.splitlines() if ln and not ln.startswith("#")))
    body = rows[1:]
    pats = np.array([pattern_from_str(r[0]) for r in body], dtype=np.int64)
    vals = np.array([float(r[1]) for r in body])
    return pats, vals


def _align(pats_a, vals_a, pats_b, vals_b) -> tuple[np.ndarray, np.ndarray]:
    keys = sorted({tuple(p) for p in pats_a} | {tuple(p) for p in pats_b}, reverse=True)
    idx = {k: i for i, k in enumerate(keys)}
    a, b = np.zeros(len(keys)), np.zeros(len(keys))
    for p, v in zip(pats_a, vals_a):
        a[idx[tuple(p)]] += v
    for p, v in zip(pats_b, vals_b):
        b[idx[tuple(p)]] += v
    return a / a.sum(), b / b.sum()


# --- commands ----------------------------------------------------------------

def _ideal_theory(cfg: RunConfig) -> PhotonDistribution:
    s = cfg.schedule
    ideal = ReflectivitySchedule(s.m, s.reflectivities, s.bin_period_ns, 1.0)
    return output_distribution(compile_schedule(ideal), cfg.experiment.input)


def _model_distribution(cfg: RunConfig) -> PhotonDistribution:
    M = compile_schedule(cfg.schedule)
    x = cfg.source.indistinguishability
    if x >= 1.0:
        return output_distribution(M, cfg.experiment.input)
    return output_distribution(M, cfg.experiment.input, model="mixture", x=x)


def cmd_compile(cfg: RunConfig, fmt: str = "csv") -> list[Path]:
    M = compile_schedule(cfg.schedule)
    out = [_write_json(cfg.output_dir / "matrix.json", cfg, {"schedule": cfg.schedule.to_dict(), **M.to_json()})]
    out += cmd_preview(cfg, fmt)
    return out


def cmd_preview(cfg: RunConfig, fmt: str = "csv") -> list[Path]:
    tau = cfg.schedule.bin_period_ns
    lines = [f"# config_sha256={cfg.digest()}", "k,time_ns,reflectivity,transmission"]
    for k, (r, t) in enumerate(zip(cfg.schedule.reflectivities, preview_intensity(cfg.schedule)), start=1):
        lines.append(f"{k},{k * tau!r},{r!r},{t!r}")
    return [_write_text(cfg.output_dir / "intensity.csv", "\n".join(lines) + "\n")]


def _reconstruct(cfg: RunConfig, stream, theory: PhotonDistribution, fmt: str) -> list[Path]:
    sim = cfg.simulation
    n_frames = int(sim["n_frames"]) if stream.origin == "synthetic" else None
    records = bin_tags(stream, cfg.experiment, sim["window_ns"], int(sim["t0_ps"]), n_frames)
    events, _ = extract_events(records, cfg.experiment.n, cfg.experiment.m)
    freqs = PhotonDistribution(theory.patterns, event_frequencies(events, theory), "collision_free",
                               theory.model, 1.0, {"events": sum(events.values())})
    stats = stream_statistics(stream, records, cfg.experiment.n, cfg.experiment.m)
    stats["fidelity_to_theory"] = statistical_fidelity(freqs, theory) if stats["collision_free_events"] else None
    return [
        _write_dist(cfg, fmt, "frequencies", freqs),
        _write_counts(cfg.output_dir / "events.csv", cfg, events),
        _write_json(cfg.output_dir / "stream_stats.json", cfg, stats),
    ]


def cmd_simulate(cfg: RunConfig, fmt: str = "csv") -> list[Path]:
    sim = cfg.simulation
    theory = _ideal_theory(cfg)
    model = _model_distribution(cfg)
    stream = synthesize_stream(model, cfg.experiment, sim["detector_efficiency"], sim["jitter_sigma_ps"],
                               int(sim["n_frames"]), derive_seed(cfg.seed, "synthesize"), int(sim["t0_ps"]))
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    tags_path = cfg.output_dir / "tags.bin"
    write_tags(tags_path, stream)
    out = [_write_dist(cfg, fmt, "theory", theory), _write_dist(cfg, fmt, "distribution", model), tags_path]
    out += _reconstruct(cfg, stream, theory, fmt)
    out.append(_write_json(cfg.output_dir / "tags.json", cfg, {
        "file": tags_path.name, "sha256": hashlib.sha256(tags_path.read_bytes()).hexdigest(), "tags": len(stream)}))
    return out


def cmd_reconstruct(cfg: RunConfig, tags: str, fmt: str = "csv") -> list[Path]:
    path = Path(tags)
    stream = read_tags_csv(path) if path.suffix == ".csv" else read_tags(path)
    return _reconstruct(cfg, stream, _ideal_theory(cfg), fmt)


def cmd_hom(cfg: RunConfig, fmt: str = "csv") -> list[Path]:
    s = cfg.schedule
    R_mid = s.reflectivities[0] if s.m == 2 else 0.5
    hom = cfg.hom
    state = hom_bin_state(R_mid, "mixture", x=cfg.source.indistinguishability, loop_transmission=s.loop_transmission)
    hist = hom_histogram(state, s.bin_period_ns, hom["T_ns"], int(hom["n_frames"]), derive_seed(cfg.seed, "hom"),
                         hom["resolution_ns"], hom["window_ns"])
    areas = hom_peak_areas(hist, s.bin_period_ns, hom["T_ns"])
    v = visibility(areas["C_plus"], areas["C_minus"], areas["C_0"])
    out = []
    if fmt == "json":
        out.append(_write_json(cfg.output_dir / "histogram.json", cfg,
                               {"delay_ns": hist.delays_ns.tolist(), "counts": hist.counts.tolist()}))
    else:
        out.append(_write_text(cfg.output_dir / "histogram.csv", hist.to_csv(f"config_sha256={cfg.digest()}")))
    out.append(_write_json(cfg.output_dir / "hom.json", cfg, {
        "bin_state": {pattern_to_str(k): v_ for k, v_ in state.items()},
        "areas": areas, "visibility": v, "R_mid": R_mid}))
    return out


def cmd_validate(cfg: RunConfig, events_path: str, mode: str, reference: str | None = None,
                 fmt: str = "csv") -> list[Path]:
    pats, vals = read_table(events_path)
    val = cfg.validation
    M = compile_schedule(cfg.schedule)
    if mode == "uniform":
        counts = np.rint(vals).astype(int)
        events = np.repeat(pats, counts, axis=0)
        rng = np.random.default_rng(derive_seed(cfg.seed, "validate"))
        events = events[rng.permutation(len(events))]
        limit = val.get("max_events")
        if limit:
            events = events[: int(limit)]
        report = validate_uniform(events, M, cfg.experiment.input)
        trace_lines = [f"# config_sha256={cfg.digest()}", "event,counter"]
        trace_lines += [f"{i},{c}" for i, c in enumerate(report.counter_trace, start=1)]
        trace = _write_text(cfg.output_dir / "counter_trace.csv", "\n".join(trace_lines) + "\n")
        return [_write_json(cfg.output_dir / "validation_uniform.json", cfg, report.to_json()), trace]
    if mode == "distinguishable":
        counts = {tuple(int(v) for v in p): int(round(c)) for p, c in zip(pats, vals)}
        bona = output_distribution(M, cfg.experiment.input)
        report = validate_distinguishable(counts, bona, int(val["K"]), int(val["sample_size"]),
                                          int(val["repeats"]), derive_seed(cfg.seed, "validate"))
        return [_write_json(cfg.output_dir / "validation_distinguishable.json", cfg, report.to_json())]
    if mode == "fidelity":
        if reference is None:
            theory = _ideal_theory(cfg)
            ref_pats, ref_vals = theory.patterns, theory.probabilities
        else:
            ref_pats, ref_vals = read_table(reference)
        a, b = _align(pats, vals, ref_pats, ref_vals)
        report = ValidationReport("fidelity", statistical_fidelity(a, b), None, None,
                                  {"events_file": Path(events_path).name,
                                   "reference": Path(reference).name if reference else "theory"})
        return [_write_json(cfg.output_dir / "validation_fidelity.json", cfg, report.to_json())]
    raise ValueError(f"unknown validation mode {mode!r}")


def cmd_fidelity(cfg: RunConfig, a_path: str, b_path: str) -> list[Path]:
    a, b = _align(*read_table(a_path), *read_table(b_path))
    return [_write_json(cfg.output_dir / "fidelity.json", cfg, {
        "a": Path(a_path).name, "b": Path(b_path).name, "fidelity": statistical_fidelity(a, b)})]


def cmd_report(cfg: RunConfig) -> list[Path]:
    theory = output_distribution(compile_schedule(cfg.schedule), cfg.experiment.input)
    duty = frame_duty(cfg.experiment.sequence_period_ns, cfg.source.repetition_rate_hz)
    cf_rate, total_rate = estimate_rates(cfg.source, cfg.experiment.n, theory.mass, duty)
    payload: dict[str, Any] = {
        "label": cfg.experiment.label,
        "m": cfg.experiment.m,
        "n": cfg.experiment.n,
        "outcomes": len(theory),
        "collision_free_probability": theory.mass,
        "duty": duty,
        "collision_free_rate_hz": cf_rate,
        "total_rate_hz": total_rate,
    }
    stats = cfg.output_dir / "stream_stats.json"
    if stats.exists():
        payload["simulation"] = json.loads(stats.read_text())
    return [_write_json(cfg.output_dir / "report.json", cfg, payload)]


# --- entry point -------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="timebin", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--seed", type=int, default=None, help="override simulation.seed")
        p.add_argument("--out", default=None, help="output directory (overrides output_dir)")
        p.add_argument("--format", choices=("json", "csv"), default="csv")
        return p

    add("compile", "write the mode matrix and the intensity preview")
    add("preview", "write the loop-blocked transmission trace")
    add("simulate", "theory, synthetic tag stream and reconstructed frequencies")
    add("hom", "synthetic two-detector HOM histogram and visibility")
    p = add("reconstruct", "bin a tag file and extract collision-free events")
    p.add_argument("--tags", required=True)
    p = add("validate", "validate an events file")
    p.add_argument("--events", required=True)
    p.add_argument("--mode", choices=("uniform", "distinguishable", "fidelity"), required=True)
    p.add_argument("--reference", default=None, help="reference table for fidelity mode")
    p = add("fidelity", "statistical fidelity between two tables")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    add("report", "collision-free probability, rates and simulation summary")
    return parser


def _fail(code: int, kind: str, message: str, field_: str | None = None) -> int:
    err = {"error": kind, "message": message}
    if field_ is not None:
        err["field"] = field_
    print(json.dumps(err, sort_keys=True), file=sys.stderr)
    return code


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.seed, args.out)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, "config", str(exc), exc.field)
    except OSError as exc:
        return _fail(EXIT_IO, "io", str(exc))
    try:
        if args.command == "compile":
            paths = cmd_compile(cfg, args.format)
        elif args.command == "preview":
            paths = cmd_preview(cfg, args.format)
        elif args.command == "simulate":
            paths = cmd_simulate(cfg, args.format)
        elif args.command == "hom":
            paths = cmd_hom(cfg, args.format)
        elif args.command == "reconstruct":
            paths = cmd_reconstruct(cfg, args.tags, args.format)
        elif args.command == "validate":
            paths = cmd_validate(cfg, args.events, args.mode, args.reference, args.format)
        elif args.command == "fidelity":
            paths = cmd_fidelity(cfg, args.a, args.b)
        else:
            paths = cmd_report(cfg)
    except OSError as exc:
        return _fail(EXIT_IO, "io", str(exc))
    except (ValueError, NotImplementedError) as exc:
        return _fail(EXIT_PRECONDITION, "precondition", str(exc))
    for p in paths:
        print(p)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
