"""Readers and writers for every on-disk artifact.

Time series are CSV, structured objects are JSON. JSON output is canonical:
keys sorted and floats printed with 17 significant digits, so equal objects
serialize to identical bytes and every float reads back bit-exact.
"""

from __future__ import annotations

import csv
import io as _io
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .analysis import ComparisonKey, ComparisonReport, ReportEntry, SummaryRow, SweepRow
from .divergence import DivergenceCurve
from .errors import InvalidArgument, ParseError
from .phase_basis import BasisConfig, make_phase_grid
from .promp import CHANNELS, PrompModel, TrajectorySet
from .segmentation import (
    ARM_SIDES,
    EXPERIMENTS,
    SESSION_PHASES,
    STIMULI,
    RawRecording,
    RecordingMeta,
)
from .synth import Perturbation, StudyDesign, SynthScenario

RECORDING_COLUMNS = ("t", "pad_a", "pad_b") + CHANNELS
MANIFEST_VERSION = 1
FORMAT_VERSION = 1
UNIFORM_TOLERANCE = 0.01


# canonical JSON

def _encode(obj, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None or isinstance(obj, bool):
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            raise InvalidArgument(f"cannot serialize non-finite float {x}")
        return format(x, ".17g")
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(obj[k], indent, level + 1)}"
                 for k in sorted(obj, key=str)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            return "[]"
        if all(isinstance(v, (int, float, np.number)) and not isinstance(v, bool) for v in seq):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in seq) + "]"
        items = [pad + _encode(v, indent, level + 1) for v in seq]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise InvalidArgument(f"cannot serialize object of type {type(obj).__name__}")


def canonical_json(obj, indent: int = 1) -> str:
    return _encode(obj, indent, 0) + "\n"


def _write_text(path, text: str):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def _read_json(path):
    path = Path(path)
    try:
        return json.loads(path.read_text())
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", path, exc.lineno) from exc


# raw recordings

def _first_bad_line(path: Path, width: int):
    with path.open(newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if lineno == 1:
                continue
            if len(row) != width:
                return lineno, f"expected {width} fields, got {len(row)}"
            try:
                [float(v) for v in row]
            except ValueError as exc:
                return lineno, str(exc)
    return None, "unparseable content"


def read_recording(path, meta: RecordingMeta | None = None,
                   sample_rate_hz: float | None = None) -> RawRecording:
    """Parse a recording CSV with header ``t,pad_a,pad_b,hand_x,...,wrist_z``.

    ``t`` is in seconds and must be strictly increasing with steps uniform
    to within 1%. When ``sample_rate_hz`` is given it must agree with the
    time column to the same tolerance and is used as-is.
    """
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            header = next(csv.reader(fh), None)
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc}") from exc
    if not header:
        raise ParseError("empty file", path, 1)
    header = [h.strip() for h in header]
    missing = [c for c in RECORDING_COLUMNS if c not in header]
    if missing:
        raise ParseError(f"missing columns {missing}", path, 1)
    try:
        table = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except ValueError:
        line, reason = _first_bad_line(path, len(header))
        raise ParseError(reason, path, line) from None
    if table.shape[0] < 2:
        raise ParseError("recording needs at least 2 samples", path, 2)
    if table.shape[1] != len(header):
        raise ParseError(f"expected {len(header)} columns, got {table.shape[1]}", path, 2)
    cols = {name: table[:, header.index(name)] for name in RECORDING_COLUMNS}
    bad = np.flatnonzero(~np.all(np.isfinite(np.column_stack(list(cols.values()))), axis=1))
    if bad.size:
        row = table[bad[0]]
        names = [h for h, v in zip(header, row) if not math.isfinite(v) and h in RECORDING_COLUMNS]
        raise ParseError(f"non-finite value in {names}", path, int(bad[0]) + 2)
    dt = np.diff(cols["t"])
    nonmono = np.flatnonzero(dt <= 0)
    if nonmono.size:
        raise ParseError("time column is not strictly increasing", path, int(nonmono[0]) + 3)
    step = float(np.median(dt))
    uneven = np.flatnonzero(np.abs(dt - step) > UNIFORM_TOLERANCE * step)
    if uneven.size:
        raise ParseError("time steps are not uniform within 1%", path, int(uneven[0]) + 3)
    if sample_rate_hz is None:
        sample_rate_hz = (len(dt)) / (cols["t"][-1] - cols["t"][0])
    elif abs(1.0 / step - sample_rate_hz) > UNIFORM_TOLERANCE * sample_rate_hz:
        raise ParseError(
            f"time column implies {1.0 / step:.6g} Hz but {sample_rate_hz} Hz was declared", path, 2)
    channels = {name: cols[name].copy() for name in CHANNELS}
    return RawRecording(float(sample_rate_hz), channels, cols["pad_a"].copy(),
                        cols["pad_b"].copy(), meta or RecordingMeta())


def write_recording(rec: RawRecording, path):
    t = np.arange(rec.num_samples) / rec.sample_rate_hz
    table = np.column_stack([t, rec.pad_a, rec.pad_b] + [rec.channels[c] for c in CHANNELS])
    buf = _io.StringIO()
    np.savetxt(buf, table, delimiter=",", fmt="%.17g", header=",".join(RECORDING_COLUMNS),
               comments="")
    _write_text(path, buf.getvalue())


# manifest

@dataclass(frozen=True)
class ManifestEntry:
    path: Path
    meta: RecordingMeta
    sample_rate_hz: float


@dataclass(frozen=True)
class Manifest:
    version: int
    recordings: tuple


def read_manifest(path) -> Manifest:
    """Manifest JSON; recording paths are resolved relative to the manifest."""
    path = Path(path)
    doc = _read_json(path)
    if not isinstance(doc, dict) or "recordings" not in doc:
        raise ParseError("manifest must be an object with a 'recordings' list", path)
    version = doc.get("version")
    if version != MANIFEST_VERSION:
        raise ParseError(f"unsupported manifest version {version!r}", path)
    entries = []
    seen = set()
    for i, item in enumerate(doc["recordings"]):
        where = f"recordings[{i}]"
        try:
            rel = item["path"]
            if rel in seen:
                raise ParseError(f"{where}: duplicate path {rel!r}", path)
            seen.add(rel)
            if item["stimulus"] not in STIMULI:
                raise ParseError(f"{where}: unknown stimulus {item['stimulus']!r}", path)
            if item["session_phase"] not in SESSION_PHASES:
                raise ParseError(f"{where}: unknown session phase {item['session_phase']!r}", path)
            if item["experiment"] not in EXPERIMENTS:
                raise ParseError(f"{where}: experiment must be 1-8", path)
            arm = item.get("arm_side")
            if arm is not None and arm not in ARM_SIDES:
                raise ParseError(f"{where}: arm_side must be left or right", path)
            meta = RecordingMeta(str(item["participant"]), item["stimulus"],
                                 item["session_phase"], int(item["experiment"]), arm)
            rate = float(item.get("sample_rate_hz", 2000.0))
        except KeyError as exc:
            raise ParseError(f"{where}: missing field {exc.args[0]!r}", path) from None
        entries.append(ManifestEntry(path.parent / rel, meta, rate))
    return Manifest(version, tuple(entries))


def write_manifest(entries, path):
    """``entries`` are (relative_path, RecordingMeta, sample_rate_hz) triples."""
    records = [dict(meta.as_dict(), path=str(rel), sample_rate_hz=float(rate))
               for rel, meta, rate in entries]
    _write_text(path, canonical_json({"version": MANIFEST_VERSION, "recordings": records}))


# trajectory sets

def trajectory_set_stem(meta: dict) -> str:
    return (f"{meta.get('participant', 'p')}_{meta.get('stimulus', 'x')}_"
            f"{meta.get('session_phase', 'x')}_e{meta.get('experiment', 0)}_"
            f"{meta.get('direction', 'x')}")


def write_trajectory_set(data: TrajectorySet, path):
    """CSV with one row per phase point and one column per (stroke, channel),
    plus a JSON sidecar at ``path.with_suffix('.json')``."""
    path = Path(path)
    n, d, t = data.values.shape
    names = ["phase"] + [f"s{j:02d}_{c}" for j in range(n) for c in data.channels]
    table = np.column_stack([data.grid.points, data.values.reshape(n * d, t).T])
    buf = _io.StringIO()
    np.savetxt(buf, table, delimiter=",", fmt="%.17g", header=",".join(names), comments="")
    _write_text(path, buf.getvalue())
    sidecar = {"format": "trajectory-set", "version": FORMAT_VERSION, "num_demos": n,
               "channels": list(data.channels), "phase_points": t,
               "metadata": dict(data.metadata)}
    _write_text(path.with_suffix(".json"), canonical_json(sidecar))


def read_trajectory_set(path) -> TrajectorySet:
    path = Path(path)
    side = _read_json(path.with_suffix(".json"))
    try:
        n, t, channels = int(side["num_demos"]), int(side["phase_points"]), tuple(side["channels"])
    except KeyError as exc:
        raise ParseError(f"sidecar missing field {exc.args[0]!r}", path.with_suffix(".json")) from None
    try:
        table = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except ValueError:
        line, reason = _first_bad_line(path, 1 + n * len(channels))
        raise ParseError(reason, path, line) from None
    if table.shape != (t, 1 + n * len(channels)):
        raise ParseError(f"expected table {t}x{1 + n * len(channels)}, got {table.shape}", path)
    grid = make_phase_grid(t)
    if not np.allclose(table[:, 0], grid.points, atol=1e-12):
        raise ParseError("phase column is not the uniform grid on [0, 1]", path)
    if not np.all(np.isfinite(table)):
        raise ParseError("non-finite value", path, int(np.flatnonzero(~np.isfinite(table).all(1))[0]) + 2)
    values = table[:, 1:].T.reshape(n, len(channels), t)
    return TrajectorySet(values, grid, channels, dict(side.get("metadata", {})))


# models

def model_to_dict(model: PrompModel) -> dict:
    return {
        "format": "promp-model",
        "version": FORMAT_VERSION,
        "basis": {"num_basis": model.basis.num_basis, "centers": model.basis.centers,
                  "bandwidths": model.basis.bandwidths, "ridge_lambda": model.basis.ridge_lambda},
        "phase_points": model.grid.length,
        "channels": list(model.channels),
        "weight_mean": model.weight_mean,
        "weight_cov": model.weight_cov.reshape(-1),
        "noise_var": model.noise_var,
        "num_demos": model.num_demos,
    }


def write_model(model: PrompModel, path):
    _write_text(path, canonical_json(model_to_dict(model)))


def read_model(path) -> PrompModel:
    path = Path(path)
    doc = _read_json(path)
    try:
        b = doc["basis"]
        centers = np.array(b["centers"], dtype=float)
        basis = BasisConfig(centers, np.array(b["bandwidths"], dtype=float), float(b["ridge_lambda"]))
        size = len(doc["weight_mean"])
        cov = np.array(doc["weight_cov"], dtype=float).reshape(size, size)
        return PrompModel(basis, make_phase_grid(int(doc["phase_points"])),
                          np.array(doc["weight_mean"], dtype=float), cov,
                          float(doc["noise_var"]), int(doc["num_demos"]), tuple(doc["channels"]))
    except (KeyError, ValueError, TypeError) as exc:
        raise ParseError(f"malformed model: {exc}", path) from None


# reports

def report_to_dict(report: ComparisonReport) -> dict:
    return {
        "format": "promp-kls-report",
        "version": FORMAT_VERSION,
        "header": report.header,
        "outlier_sigma": report.outlier_sigma,
        "outlier_threshold": report.outlier_threshold,
        "pooled_mean": report.pooled_mean,
        "pooled_std": report.pooled_std,
        "entries": [
            {"stimulus": e.key.stimulus, "participant": e.key.participant,
             "experiment": e.key.experiment, "post_phase": e.key.post_phase,
             "direction": e.key.direction, "kls": e.kls, "outlier": e.outlier}
            for e in report.entries
        ],
        "summary": [
            {"stimulus": r.stimulus, "post_phase": r.post_phase, "direction": r.direction,
             "mean": r.mean, "std": r.std, "count": r.count}
            for r in report.summary
        ],
        "corrupted": [list(c) for c in report.corrupted],
        "skipped": list(report.skipped),
    }


def report_from_dict(doc: dict) -> ComparisonReport:
    entries = tuple(
        ReportEntry(ComparisonKey(e["stimulus"], e["participant"], int(e["experiment"]),
                                  e["post_phase"], e["direction"]), float(e["kls"]), bool(e["outlier"]))
        for e in doc["entries"])
    summary = tuple(SummaryRow(r["stimulus"], r["post_phase"], r["direction"], float(r["mean"]),
                               float(r["std"]), int(r["count"])) for r in doc["summary"])
    opt = lambda v: None if v is None else float(v)
    return ComparisonReport(
        entries=entries, summary=summary, outlier_sigma=float(doc["outlier_sigma"]),
        outlier_threshold=opt(doc["outlier_threshold"]), pooled_mean=opt(doc["pooled_mean"]),
        pooled_std=opt(doc["pooled_std"]), corrupted=tuple(tuple(c) for c in doc["corrupted"]),
        skipped=tuple(doc["skipped"]), header=dict(doc["header"]))


def write_report(report: ComparisonReport, path, summary_path=None):
    """Canonical report JSON plus a summary CSV (default: same stem, ``.csv``)."""
    path = Path(path)
    _write_text(path, canonical_json(report_to_dict(report)))
    write_summary_csv(report, summary_path or path.with_suffix(".csv"))


def read_report(path) -> ComparisonReport:
    path = Path(path)
    try:
        return report_from_dict(_read_json(path))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ParseError):
            raise
        raise ParseError(f"malformed report: {exc}", path) from None


def _write_rows(path, header, rows):
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    _write_text(path, buf.getvalue())


def _num(x: float) -> str:
    return format(float(x), ".17g")


def write_summary_csv(report: ComparisonReport, path):
    _write_rows(path, ["stimulus", "post_phase", "direction", "mean", "std"],
                [[r.stimulus, r.post_phase, r.direction, _num(r.mean), _num(r.std)]
                 for r in report.summary])


def _read_rows(path, columns):
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or any(c not in reader.fieldnames for c in columns):
                raise ParseError(f"expected columns {list(columns)}, got {reader.fieldnames}", path, 1)
            return list(reader)
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc}") from exc


def read_summary_csv(path) -> list:
    """Summary rows as (stimulus, post_phase, direction, mean, std) tuples."""
    rows = _read_rows(path, ("stimulus", "post_phase", "direction", "mean", "std"))
    return [(r["stimulus"], r["post_phase"], r["direction"], float(r["mean"]), float(r["std"]))
            for r in rows]


def write_curve_csv(curve: DivergenceCurve, path):
    _write_rows(path, ["center_phase", "kls"],
                [[_num(c), _num(v)] for c, v in zip(curve.centers, curve.values)])


def read_curve_csv(path, window_fraction: float = float("nan")) -> DivergenceCurve:
    """Curve CSV; the window fraction is not stored in the file."""
    rows = _read_rows(path, ("center_phase", "kls"))
    return DivergenceCurve(window_fraction, np.array([float(r["center_phase"]) for r in rows]),
                           np.array([float(r["kls"]) for r in rows]))


def write_sweep_csv(rows, path):
    _write_rows(path, ["num_basis", "loss_mean", "loss_std"],
                [[r.num_basis, _num(r.loss_mean), _num(r.loss_std)] for r in rows])


def read_sweep_csv(path) -> list:
    rows = _read_rows(path, ("num_basis", "loss_mean", "loss_std"))
    return [SweepRow(int(r["num_basis"]), float(r["loss_mean"]), float(r["loss_std"])) for r in rows]


# synthetic study scenarios

_SCENARIO_FIELDS = ("num_strokes", "stroke_duration_ms", "noise_std", "amp_jitter", "offset_std",
                    "session_jitter", "sample_rate_hz", "rest_ms", "pad_amplitude", "pad_noise")


def design_from_dict(doc: dict, default_seed: int = 0, source=None):
    """Build a StudyDesign from its JSON form.

    Recognized keys: ``seed``, ``participants`` (count or list of ids),
    ``stimuli``, ``session_phases``, ``experiments``, ``scenario`` (generator
    settings) and ``perturbations``, a list of objects with a ``where`` filter
    on recording metadata plus the Perturbation fields.
    """
    if not isinstance(doc, dict):
        raise ParseError("scenario must be a JSON object", source)
    known = {"seed", "participants", "stimuli", "session_phases", "experiments",
             "scenario", "perturbations"}
    unknown = set(doc) - known
    if unknown:
        raise ParseError(f"unknown scenario keys {sorted(unknown)}", source)
    try:
        kwargs = {"seed": int(doc.get("seed", default_seed))}
        participants = doc.get("participants")
        if isinstance(participants, int):
            kwargs["participants"] = tuple(f"p{i:02d}" for i in range(1, participants + 1))
        elif participants is not None:
            kwargs["participants"] = tuple(str(p) for p in participants)
        for key, allowed in (("stimuli", STIMULI), ("session_phases", SESSION_PHASES)):
            if key in doc:
                values = tuple(doc[key])
                bad = [v for v in values if v not in allowed]
                if bad:
                    raise ParseError(f"{key}: unknown values {bad}", source)
                kwargs[key] = values
        if "experiments" in doc:
            experiments = tuple(int(e) for e in doc["experiments"])
            if any(e not in EXPERIMENTS for e in experiments):
                raise ParseError(f"experiments must be in 1-8, got {list(experiments)}", source)
            kwargs["experiments"] = experiments
        settings = dict(doc.get("scenario", {}))
        bad = set(settings) - set(_SCENARIO_FIELDS)
        if bad:
            raise ParseError(f"unknown scenario settings {sorted(bad)}", source)
        if "stroke_duration_ms" in settings:
            settings["stroke_duration_ms"] = tuple(float(v) for v in settings["stroke_duration_ms"])
        kwargs["scenario"] = SynthScenario(**settings)
        perturbations = []
        for item in doc.get("perturbations", []):
            item = dict(item)
            where = dict(item.pop("where", {}))
            for key in ("channels", "phase_window", "directions"):
                if item.get(key) is not None:
                    item[key] = tuple(item[key])
            perturbations.append((where, Perturbation(**item)))
        kwargs["perturbations"] = tuple(perturbations)
    except ParseError:
        raise
    except (TypeError, ValueError) as exc:
        raise ParseError(f"invalid scenario: {exc}", source) from exc
    return StudyDesign(**kwargs)


def read_scenario(path, default_seed: int = 0):
    return design_from_dict(_read_json(path), default_seed, path)
