"""Versioned file formats: scanpaths, events, models, corpora, and metric CSVs.

All structured artifacts are JSON text with an explicit ``format`` tag;
loaders reject unknown tags. Floats are serialized with Python's shortest
round-trip representation, so save/load cycles reproduce values exactly and
reruns on identical inputs produce byte-identical files. Writers stage to a
temporary file in the target directory and rename, so readers never observe a
partial file.
"""

from __future__ import annotations

import csv
import json
import os
import tempfile
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from .behavior import BehaviorModel
from .core import (
    MANEUVERS,
    Corpus,
    DriveRecord,
    FeatureConfig,
    FeatureMode,
    GazeZone,
    GlanceFeatureVector,
    Maneuver,
    ManeuverEvent,
    Scanpath,
    ZoneLabelError,
    canonical_zone_order,
    parse_maneuver,
    parse_zone_label,
    zone_code,
)
from .evaluation import ConfidenceTraces, ConfusionMatrix, RecallCurve
from .synth import BehaviorTemplate, GlanceSpec, NoiseChannel

SCANPATH_FORMAT = "gazedyn.scanpath/1"
EVENTS_FORMAT = "gazedyn.events/1"
MODELS_FORMAT = "gazedyn.models/1"
MANIFEST_FORMAT = "gazedyn.manifest/1"
NOISE_FORMAT = "gazedyn.noise-channel/1"
TEMPLATES_FORMAT = "gazedyn.templates/1"

_ZONE_LABELS = tuple(z.value for z in canonical_zone_order())
_UNKNOWN_LABEL = GazeZone.UNKNOWN.value


class FormatError(ValueError):
    """Raised when a file does not match its declared schema."""


def _atomic_write_text(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def _dump_json(doc: dict) -> str:
    return json.dumps(doc, indent=1) + "\n"


def _load_json(path: Path) -> dict:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise FormatError(f"{path}: expected a JSON object at top level")
    return doc


def _check_format(doc: dict, expected: str, path: Path) -> None:
    tag = doc.get("format")
    if tag != expected:
        raise FormatError(f"{path}: unsupported format tag {tag!r}, expected {expected!r}")


def _field(doc: dict, key: str, path: Path):
    if key not in doc:
        raise FormatError(f"{path}: missing field {key!r}")
    return doc[key]


# ---------------------------------------------------------------------------
# scanpaths


def save_scanpath(sp: Scanpath, path) -> None:
    doc = {
        "format": SCANPATH_FORMAT,
        "driver_id": sp.driver_id,
        "drive_id": sp.drive_id,
        "fps": sp.fps,
        "zones": [z.value for z in sp.zones],
    }
    _atomic_write_text(Path(path), _dump_json(doc))


def load_scanpath(path) -> Scanpath:
    path = Path(path)
    doc = _load_json(path)
    _check_format(doc, SCANPATH_FORMAT, path)
    fps = _field(doc, "fps", path)
    if not isinstance(fps, int) or isinstance(fps, bool) or fps <= 0:
        raise FormatError(f"{path}: fps must be a positive integer, got {fps!r}")
    labels = _field(doc, "zones", path)
    if not isinstance(labels, list) or not labels:
        raise FormatError(f"{path}: zones must be a non-empty array")
    codes = np.empty(len(labels), dtype=np.int8)
    for i, label in enumerate(labels):
        try:
            codes[i] = zone_code(parse_zone_label(label))
        except ZoneLabelError as exc:
            raise FormatError(f"{path}: zones[{i}]: {exc}") from exc
    return Scanpath(
        codes,
        fps,
        driver_id=str(doc.get("driver_id", "")),
        drive_id=str(doc.get("drive_id", "")),
    )


# ---------------------------------------------------------------------------
# events


def save_events(events: Sequence[ManeuverEvent], fps: int, path) -> None:
    records = []
    for event in events:
        if event.kind is Maneuver.LANE_KEEPING:
            records.append({"kind": event.kind.value, "segment": list(event.segment)})
        else:
            records.append({"kind": event.kind.value, "syncf_frame": event.syncf_frame})
    doc = {"format": EVENTS_FORMAT, "fps": int(fps), "events": records}
    _atomic_write_text(Path(path), _dump_json(doc))


def load_events(path, expected_fps: Optional[int] = None) -> list[ManeuverEvent]:
    """Load events; lane-keeping segments must span exactly 5 s at the file's fps.

    Sweep-margin validation is deferred to use sites, since a drive may hold
    edge events that are simply excluded from sweeps.
    """
    path = Path(path)
    doc = _load_json(path)
    _check_format(doc, EVENTS_FORMAT, path)
    fps = _field(doc, "fps", path)
    if not isinstance(fps, int) or isinstance(fps, bool) or fps <= 0:
        raise FormatError(f"{path}: fps must be a positive integer, got {fps!r}")
    if expected_fps is not None and fps != expected_fps:
        raise FormatError(
            f"{path}: events fps {fps} does not match scanpath fps {expected_fps}"
        )
    records = _field(doc, "events", path)
    if not isinstance(records, list):
        raise FormatError(f"{path}: events must be an array")
    events: list[ManeuverEvent] = []
    lk_spans: list[tuple[int, int]] = []
    for i, record in enumerate(records):
        try:
            kind = parse_maneuver(_field(record, "kind", path))
        except ValueError as exc:
            raise FormatError(f"{path}: events[{i}]: {exc}") from exc
        try:
            if kind is Maneuver.LANE_KEEPING:
                segment = _field(record, "segment", path)
                start, end = int(segment[0]), int(segment[1])
                if end - start != 5 * fps:
                    raise FormatError(
                        f"{path}: events[{i}]: lane-keeping segment must span "
                        f"exactly 5 s ({5 * fps} frames at {fps} fps), got {end - start}"
                    )
                lk_spans.append((start, end))
                events.append(ManeuverEvent(kind, segment=(start, end)))
            else:
                syncf = _field(record, "syncf_frame", path)
                events.append(ManeuverEvent(kind, syncf_frame=int(syncf)))
        except FormatError:
            raise
        except (ValueError, TypeError, IndexError) as exc:
            raise FormatError(f"{path}: events[{i}]: {exc}") from exc
    lk_spans.sort()
    for (s0, e0), (s1, _) in zip(lk_spans, lk_spans[1:]):
        if s1 < e0:
            raise FormatError(f"{path}: lane-keeping segments overlap")
    return events


# ---------------------------------------------------------------------------
# behavior models


def models_to_document(models: Sequence[BehaviorModel]) -> dict:
    if not models:
        raise ValueError("cannot serialize an empty model list")
    config = models[0].config
    for m in models[1:]:
        if m.config != config:
            raise ValueError("models mix feature configs; save them separately")
    return {
        "format": MODELS_FORMAT,
        "config": {
            "mode": config.mode.value,
            "window_seconds": config.window_seconds,
            "debounce_w": config.debounce_w,
            "ridge_epsilon": config.ridge_epsilon,
        },
        "zone_order": list(_ZONE_LABELS),
        "models": [
            {
                "label": m.label.value,
                "ridge_epsilon": m.ridge_epsilon,
                "mean": [float(v) for v in m.mean],
                "covariance": [float(v) for v in m.covariance.ravel()],
            }
            for m in models
        ],
    }


def models_from_document(doc: dict, path: Path) -> tuple[BehaviorModel, ...]:
    _check_format(doc, MODELS_FORMAT, path)
    order = _field(doc, "zone_order", path)
    if tuple(order) != _ZONE_LABELS:
        raise FormatError(
            f"{path}: zone order does not match the canonical order; refusing "
            f"to score with permuted features"
        )
    cfg = _field(doc, "config", path)
    try:
        config = FeatureConfig(
            mode=FeatureMode(_field(cfg, "mode", path)),
            window_seconds=float(_field(cfg, "window_seconds", path)),
            debounce_w=int(_field(cfg, "debounce_w", path)),
            ridge_epsilon=float(_field(cfg, "ridge_epsilon", path)),
        )
    except ValueError as exc:
        raise FormatError(f"{path}: invalid feature config: {exc}") from exc
    d = config.feature_dim
    models = []
    for i, record in enumerate(_field(doc, "models", path)):
        try:
            label = parse_maneuver(_field(record, "label", path))
        except ValueError as exc:
            raise FormatError(f"{path}: models[{i}]: {exc}") from exc
        mean = np.asarray(_field(record, "mean", path), dtype=np.float64)
        cov_flat = np.asarray(_field(record, "covariance", path), dtype=np.float64)
        if mean.shape != (d,):
            raise FormatError(
                f"{path}: models[{i}]: mean has {mean.size} entries, config "
                f"mode {config.mode.value} requires {d}"
            )
        if cov_flat.shape != (d * d,):
            raise FormatError(
                f"{path}: models[{i}]: covariance has {cov_flat.size} entries, "
                f"expected {d * d} (row-major {d}x{d})"
            )
        cov = cov_flat.reshape(d, d)
        if not np.allclose(cov, cov.T, rtol=0.0, atol=1e-9):
            raise FormatError(f"{path}: models[{i}]: covariance is not symmetric")
        models.append(
            BehaviorModel(
                label=label,
                mean=mean,
                covariance=cov,
                ridge_epsilon=float(record.get("ridge_epsilon", config.ridge_epsilon)),
                config=config,
            )
        )
    if not models:
        raise FormatError(f"{path}: file contains no models")
    return tuple(models)


def save_model(models: Sequence[BehaviorModel], path) -> None:
    _atomic_write_text(Path(path), _dump_json(models_to_document(models)))


def load_model(path) -> tuple[BehaviorModel, ...]:
    path = Path(path)
    return models_from_document(_load_json(path), path)


# ---------------------------------------------------------------------------
# corpora


def save_corpus(corpus: Corpus, out_dir, manifest_name: str = "manifest.json") -> Path:
    """Write per-drive scanpath/event files plus a manifest; returns its path."""
    out_dir = Path(out_dir)
    drives_dir = out_dir / "drives"
    drives_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for drive in corpus.drives:
        stem = f"{drive.driver_id}__{drive.drive_id}"
        scanpath_rel = f"drives/{stem}.scanpath.json"
        events_rel = f"drives/{stem}.events.json"
        save_scanpath(drive.scanpath, out_dir / scanpath_rel)
        save_events(drive.events, drive.scanpath.fps, out_dir / events_rel)
        entry = {
            "driver_id": drive.driver_id,
            "drive_id": drive.drive_id,
            "scanpath": scanpath_rel,
            "events": events_rel,
        }
        if drive.truth is not None:
            truth_rel = f"drives/{stem}.truth.json"
            save_scanpath(drive.truth, out_dir / truth_rel)
            entry["truth_scanpath"] = truth_rel
        entries.append(entry)
    manifest_path = out_dir / manifest_name
    _atomic_write_text(
        manifest_path, _dump_json({"format": MANIFEST_FORMAT, "drives": entries})
    )
    return manifest_path


def load_corpus(manifest_path) -> Corpus:
    manifest_path = Path(manifest_path)
    doc = _load_json(manifest_path)
    _check_format(doc, MANIFEST_FORMAT, manifest_path)
    base = manifest_path.parent
    entries = _field(doc, "drives", manifest_path)
    drives = []
    seen = set()
    for i, entry in enumerate(entries):
        driver_id = str(_field(entry, "driver_id", manifest_path))
        drive_id = str(_field(entry, "drive_id", manifest_path))
        key = (driver_id, drive_id)
        if key in seen:
            raise FormatError(f"{manifest_path}: duplicate drive identity {key}")
        seen.add(key)
        scanpath_path = base / _field(entry, "scanpath", manifest_path)
        events_path = base / _field(entry, "events", manifest_path)
        for ref in (scanpath_path, events_path):
            if not ref.exists():
                raise FormatError(
                    f"{manifest_path}: drives[{i}] references missing file {ref}"
                )
        scanpath = load_scanpath(scanpath_path)
        if (scanpath.driver_id, scanpath.drive_id) != key:
            raise FormatError(
                f"{manifest_path}: drives[{i}]: scanpath file identifies itself "
                f"as {(scanpath.driver_id, scanpath.drive_id)}, manifest says {key}"
            )
        events = load_events(events_path, expected_fps=scanpath.fps)
        truth = None
        if "truth_scanpath" in entry:
            truth_path = base / entry["truth_scanpath"]
            if not truth_path.exists():
                raise FormatError(
                    f"{manifest_path}: drives[{i}] references missing file {truth_path}"
                )
            truth = load_scanpath(truth_path)
        drives.append(DriveRecord(scanpath=scanpath, events=tuple(events), truth=truth))
    return Corpus(tuple(drives))


# ---------------------------------------------------------------------------
# noise channels and templates


def save_noise_channel(channel: NoiseChannel, path) -> None:
    doc = {
        "format": NOISE_FORMAT,
        "labels": list(_ZONE_LABELS) + [_UNKNOWN_LABEL],
        "burst_rho": channel.burst_rho,
        "matrix": [[float(v) for v in row] for row in channel.matrix],
    }
    _atomic_write_text(Path(path), _dump_json(doc))


def load_noise_channel(path) -> NoiseChannel:
    path = Path(path)
    doc = _load_json(path)
    _check_format(doc, NOISE_FORMAT, path)
    labels = _field(doc, "labels", path)
    if tuple(labels) != _ZONE_LABELS + (_UNKNOWN_LABEL,):
        raise FormatError(
            f"{path}: labels must list the canonical zones then Unknown"
        )
    matrix = np.asarray(_field(doc, "matrix", path), dtype=np.float64)
    try:
        return NoiseChannel(matrix=matrix, burst_rho=float(doc.get("burst_rho", 0.0)))
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc


def save_templates(templates: Mapping[Maneuver, BehaviorTemplate], path) -> None:
    records = []
    for kind in MANEUVERS:
        if kind not in templates:
            continue
        t = templates[kind]
        records.append(
            {
                "kind": t.kind.value,
                "baseline": t.baseline.value,
                "anchor": t.anchor,
                "schedule": [
                    {
                        "zone": s.zone.value,
                        "duration_mean": s.duration_mean,
                        "duration_jitter": s.duration_jitter,
                        "probability": s.probability,
                    }
                    for s in t.schedule
                ],
            }
        )
    doc = {"format": TEMPLATES_FORMAT, "templates": records}
    _atomic_write_text(Path(path), _dump_json(doc))


def load_templates(path) -> dict[Maneuver, BehaviorTemplate]:
    path = Path(path)
    doc = _load_json(path)
    _check_format(doc, TEMPLATES_FORMAT, path)
    out: dict[Maneuver, BehaviorTemplate] = {}
    for i, record in enumerate(_field(doc, "templates", path)):
        try:
            kind = parse_maneuver(_field(record, "kind", path))
            schedule = tuple(
                GlanceSpec(
                    zone=parse_zone_label(_field(s, "zone", path)),
                    duration_mean=float(_field(s, "duration_mean", path)),
                    duration_jitter=float(_field(s, "duration_jitter", path)),
                    probability=float(s.get("probability", 1.0)),
                )
                for s in _field(record, "schedule", path)
            )
            template = BehaviorTemplate(
                kind=kind,
                schedule=schedule,
                baseline=parse_zone_label(record.get("baseline", "Front")),
                anchor=str(record.get("anchor", "schedule-end")),
            )
        except (ValueError, TypeError) as exc:
            raise FormatError(f"{path}: templates[{i}]: {exc}") from exc
        if kind in out:
            raise FormatError(f"{path}: duplicate template for {kind.value}")
        out[kind] = template
    return out


# ---------------------------------------------------------------------------
# metric CSVs
#
# Column orders are fixed; rows are emitted in deterministic order so reruns
# on identical inputs are byte-identical.


def _write_csv(path, header: Sequence[str], rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def write_recall_curve_csv(curve: RecallCurve, path) -> None:
    """Rows: one per time index, ascending t_rel."""
    rows = [
        (
            repr(float(curve.t_rel_frames[i] / curve.fps)),
            repr(float(curve.recall[i])),
            int(curve.true_positives[i]),
            int(curve.positives[i]),
        )
        for i in range(curve.t_rel_frames.size)
    ]
    _write_csv(path, ("t_rel", "recall", "true_positives", "positives"), rows)


def write_confidence_traces_csv(traces: ConfidenceTraces, path) -> None:
    """Rows: one per (time index, model), time-major, models in stored order."""
    rows = []
    for i in range(traces.t_rel_frames.size):
        t = repr(float(traces.t_rel_frames[i] / traces.fps))
        for m, label in enumerate(traces.model_labels):
            rows.append(
                (t, label.value, repr(float(traces.mean[m, i])), repr(float(traces.std[m, i])))
            )
    _write_csv(path, ("t_rel", "model", "mean", "std"), rows)


def write_distribution_csv(values_by_zone: Mapping[GazeZone, Sequence[float]], path) -> None:
    """Rows: one per value, zones in canonical order, values in window order."""
    rows = []
    for zone in canonical_zone_order():
        for value in values_by_zone.get(zone, ()):
            rows.append((zone.value, repr(float(value))))
    _write_csv(path, ("zone", "value"), rows)


def write_confusion_csv(cm: ConfusionMatrix, path) -> None:
    """Rows: one per (true, predicted) pair in declared label order."""
    rates = cm.rates()
    rows = []
    for i, true_label in enumerate(cm.labels):
        for j, pred_label in enumerate(cm.labels):
            rows.append(
                (
                    getattr(true_label, "value", str(true_label)),
                    getattr(pred_label, "value", str(pred_label)),
                    int(cm.counts[i, j]),
                    repr(float(rates[i, j])),
                )
            )
    _write_csv(path, ("true", "predicted", "count", "rate"), rows)


def _feature_columns(config: FeatureConfig) -> list[str]:
    zones = [z.value for z in canonical_zone_order()]
    if config.mode is FeatureMode.GA:
        return [f"ga_{z}" for z in zones]
    if config.mode is FeatureMode.GD:
        return [f"gd_{z}" for z in zones]
    return [f"gd_{z}" for z in zones] + [f"gf_{z}" for z in zones]


def write_features_csv(features: Sequence[GlanceFeatureVector], path) -> None:
    """Rows: one per window with its [start, end) span, in input order."""
    if not features:
        raise ValueError("no feature vectors to write")
    config = features[0].config
    header = ["start_frame", "end_frame"] + _feature_columns(config)
    rows = []
    for f in features:
        if f.config != config:
            raise ValueError("feature vectors mix configs")
        rows.append(
            [f.window[0], f.window[1]] + [repr(float(v)) for v in f.values]
        )
    _write_csv(path, header, rows)


def write_predictions_csv(
    rows: Sequence[tuple[int, float, Maneuver, Sequence[float]]],
    model_labels: Sequence[Maneuver],
    path,
) -> None:
    """Rows: (window end frame, end time, predicted label, per-model fitness)."""
    header = ["end_frame", "t_end_seconds", "predicted"] + [
        f"fitness_{label.value}" for label in model_labels
    ]
    out = []
    for end_frame, t_end, predicted, scores in rows:
        out.append(
            [end_frame, repr(float(t_end)), predicted.value]
            + [repr(float(s)) for s in scores]
        )
    _write_csv(path, header, out)
