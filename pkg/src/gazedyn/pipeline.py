"""End-to-end workflows wiring generation, fitting, prediction and evaluation.

Each function validates its inputs, runs the computation, writes any output
files in a deterministic order after all computation finishes, and returns a
JSON-friendly summary that includes the fully-resolved configuration so a run
can be reproduced from its log alone.
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Optional, Sequence

from . import io as gd_io
from .behavior import classify
from .core import (
    MANEUVERS,
    FeatureConfig,
    FeatureMode,
    Maneuver,
    Scanpath,
)
from .evaluation import (
    GazeSource,
    TrainingSources,
    classify_lane_keeping,
    confusion_matrix,
    fit_protocol_models,
    lodo_cv,
    metric_distributions,
    predict_events,
    recall_curve,
    resolve_workers,
    weighted_accuracy,
    _traces_from_predictions,
)
from .features import assemble_features
from .synth import (
    DEFAULT_EVENT_COUNTS,
    default_noise_channel,
    generate_corpus,
    identity_noise_channel,
)

log = logging.getLogger("gazedyn")

_MODE_ALIASES = {
    "ga": FeatureMode.GA,
    "gd": FeatureMode.GD,
    "gdgf": FeatureMode.GD_GF,
    "gd_gf": FeatureMode.GD_GF,
}


def parse_mode(text: str) -> FeatureMode:
    mode = _MODE_ALIASES.get(text.strip().lower())
    if mode is None:
        raise ValueError(
            f"unknown feature mode {text!r}; expected one of ga, gd, gdgf"
        )
    return mode


def build_feature_config(
    mode: str = "ga",
    window_seconds: float = 5.0,
    debounce_w: int = 6,
    ridge_epsilon: float = 1e-6,
) -> FeatureConfig:
    return FeatureConfig(
        mode=parse_mode(mode),
        window_seconds=window_seconds,
        debounce_w=debounce_w,
        ridge_epsilon=ridge_epsilon,
    )


def build_sources(lane_change: str, lane_keeping: str) -> TrainingSources:
    return TrainingSources(
        lane_change=GazeSource(lane_change), lane_keeping=GazeSource(lane_keeping)
    )


def _config_dict(config: FeatureConfig) -> dict:
    return {
        "mode": config.mode.value,
        "window_seconds": config.window_seconds,
        "debounce_w": config.debounce_w,
        "ridge_epsilon": config.ridge_epsilon,
    }


def _log_resolved(command: str, resolved: dict) -> None:
    log.info("%s resolved config: %s", command, resolved)


def run_synth(
    out_dir: str,
    seed: int = 0,
    drivers: int = 7,
    fps: int = 30,
    noise: str = "default",
    templates_path: Optional[str] = None,
    counts: Optional[Sequence[Sequence[int]]] = None,
) -> dict:
    """Generate a synthetic corpus on disk; returns the manifest path and shape."""
    if drivers < 1:
        raise ValueError("drivers must be >= 1")
    if seed < 0:
        raise ValueError("seed must be >= 0")
    if counts is None:
        table = DEFAULT_EVENT_COUNTS
        counts = tuple(table[i % len(table)] for i in range(drivers))
    else:
        counts = tuple(tuple(int(v) for v in row) for row in counts)
        if len(counts) != drivers:
            raise ValueError(
                f"counts has {len(counts)} rows but drivers={drivers}"
            )
    if noise == "default":
        channel = default_noise_channel()
    elif noise == "identity":
        channel = identity_noise_channel()
    else:
        channel = gd_io.load_noise_channel(noise)
    templates = gd_io.load_templates(templates_path) if templates_path else None
    resolved = {
        "command": "synth",
        "out_dir": str(out_dir),
        "seed": seed,
        "drivers": drivers,
        "fps": fps,
        "noise": noise,
        "templates_path": templates_path,
        "counts": [list(row) for row in counts],
    }
    _log_resolved("synth", resolved)
    corpus = generate_corpus(
        counts=counts,
        templates=templates,
        master_seed=seed,
        fps=fps,
        channel=channel,
    )
    manifest = gd_io.save_corpus(corpus, out_dir)
    event_counts = corpus.event_counts()
    return {
        "manifest": str(manifest),
        "drivers": len(corpus.driver_ids()),
        "drives": len(corpus.drives),
        "events": {kind.value: event_counts[kind] for kind in MANEUVERS},
        "resolved_config": resolved,
    }


def run_extract(
    out_path: Optional[str] = None,
    scanpath_path: Optional[str] = None,
    scanpath: Optional[Scanpath] = None,
    config: FeatureConfig = FeatureConfig(),
    stride_frames: int = 1,
) -> dict:
    """Feature vectors for every full window of a scanpath, striding its end."""
    if stride_frames < 1:
        raise ValueError("stride_frames must be >= 1")
    if (scanpath is None) == (scanpath_path is None):
        raise ValueError("provide exactly one of scanpath or scanpath_path")
    sp = scanpath if scanpath is not None else gd_io.load_scanpath(scanpath_path)
    win_n = config.window_frames(sp.fps)
    if sp.n_frames < win_n:
        raise ValueError(
            f"scanpath has {sp.n_frames} frames, shorter than the "
            f"{win_n}-frame feature window"
        )
    resolved = {
        "command": "extract",
        "scanpath_path": scanpath_path,
        "stride_frames": stride_frames,
        "out_path": out_path,
        "features": _config_dict(config),
    }
    _log_resolved("extract", resolved)
    features = [
        assemble_features(sp, config, (end - win_n, end))
        for end in range(win_n, sp.n_frames + 1, stride_frames)
    ]
    if out_path:
        gd_io.write_features_csv(features, out_path)
    return {
        "n_windows": len(features),
        "dim": config.feature_dim,
        "out_path": out_path,
        "features": [
            {"window": list(f.window), "values": [float(v) for v in f.values]}
            for f in features
        ],
        "resolved_config": resolved,
    }


def run_fit(
    manifest: str,
    config: FeatureConfig,
    out_path: str,
    lc_source: str = "annotated",
    lk_source: str = "estimated",
) -> dict:
    """Fit the three maneuver models on a whole corpus and persist them."""
    sources = build_sources(lc_source, lk_source)
    resolved = {
        "command": "fit",
        "manifest": str(manifest),
        "out_path": str(out_path),
        "lc_source": lc_source,
        "lk_source": lk_source,
        "features": _config_dict(config),
    }
    _log_resolved("fit", resolved)
    corpus = gd_io.load_corpus(manifest)
    models, sets = fit_protocol_models(corpus.drives, config, sources)
    gd_io.save_model(models, out_path)
    return {
        "model_path": str(out_path),
        "classes": {
            kind.value: len(sets[kind].features) for kind in MANEUVERS
        },
        "dim": config.feature_dim,
        "resolved_config": resolved,
    }


def run_predict(
    model_path: str,
    scanpath_path: Optional[str] = None,
    scanpath: Optional[Scanpath] = None,
    stride_frames: int = 1,
    out_path: Optional[str] = None,
) -> dict:
    """Classify every full window of a scanpath against persisted models."""
    if stride_frames < 1:
        raise ValueError("stride_frames must be >= 1")
    if (scanpath is None) == (scanpath_path is None):
        raise ValueError("provide exactly one of scanpath or scanpath_path")
    models = gd_io.load_model(model_path)
    config = models[0].config
    sp = scanpath if scanpath is not None else gd_io.load_scanpath(scanpath_path)
    win_n = config.window_frames(sp.fps)
    if sp.n_frames < win_n:
        raise ValueError(
            f"scanpath has {sp.n_frames} frames, shorter than the "
            f"{win_n}-frame feature window"
        )
    resolved = {
        "command": "predict",
        "model_path": str(model_path),
        "scanpath_path": scanpath_path,
        "stride_frames": stride_frames,
        "out_path": out_path,
        "features": _config_dict(config),
    }
    _log_resolved("predict", resolved)
    rows = []
    for end in range(win_n, sp.n_frames + 1, stride_frames):
        feature = assemble_features(sp, config, (end - win_n, end))
        label, scores = classify(feature, models)
        rows.append((end, end / sp.fps, label, scores))
    if out_path:
        gd_io.write_predictions_csv(rows, [m.label for m in models], out_path)
    return {
        "n_windows": len(rows),
        "out_path": out_path,
        "model_labels": [m.label.value for m in models],
        "predictions": [
            {
                "end_frame": end,
                "t_end_seconds": t_end,
                "predicted": label.value,
                "scores": [float(s) for s in scores],
            }
            for end, t_end, label, scores in rows
        ],
        "resolved_config": resolved,
    }


def _recall_summary(curves, fps: int) -> dict:
    out = {}
    for kind, curve in curves.items():
        out[kind.value] = {
            "-1.0": curve.recall_at(-fps),
            "0.0": curve.recall_at(0),
        }
    return out


def _write_eval_outputs(out_dir: Path, curves, traces, cm) -> list[str]:
    written = []
    for kind in (Maneuver.LEFT_LANE_CHANGE, Maneuver.RIGHT_LANE_CHANGE):
        if kind in curves:
            name = f"recall_{kind.value}.csv"
            gd_io.write_recall_curve_csv(curves[kind], out_dir / name)
            written.append(name)
    for kind in (Maneuver.LEFT_LANE_CHANGE, Maneuver.RIGHT_LANE_CHANGE):
        if kind in traces:
            name = f"traces_{kind.value}.csv"
            gd_io.write_confidence_traces_csv(traces[kind], out_dir / name)
            written.append(name)
    gd_io.write_confusion_csv(cm, out_dir / "confusion_maneuvers.csv")
    written.append("confusion_maneuvers.csv")
    return written


def run_eval_cv(
    manifest: str,
    config: FeatureConfig,
    out_dir: str,
    lc_source: str = "annotated",
    lk_source: str = "estimated",
    sweep_seconds: float = 5.0,
    max_workers: Optional[int] = None,
) -> dict:
    """Leave-one-driver-out evaluation; writes recall/trace/confusion CSVs."""
    sources = build_sources(lc_source, lk_source)
    workers = resolve_workers(max_workers)
    resolved = {
        "command": "eval-cv",
        "manifest": str(manifest),
        "out_dir": str(out_dir),
        "lc_source": lc_source,
        "lk_source": lk_source,
        "sweep_seconds": sweep_seconds,
        "max_workers": workers,
        "features": _config_dict(config),
    }
    _log_resolved("eval-cv", resolved)
    corpus = gd_io.load_corpus(manifest)
    result = lodo_cv(corpus, config, sources, sweep_seconds, workers)
    out = Path(out_dir)
    fps = corpus.drives[0].scanpath.fps
    written = _write_eval_outputs(out, result.recall_curves, result.traces, result.decision_confusion)
    return {
        "folds": len(result.folds),
        "out_dir": str(out),
        "files": written,
        "recall": _recall_summary(result.recall_curves, fps),
        "decision_weighted_accuracy": weighted_accuracy(result.decision_confusion),
        "resolved_config": resolved,
    }


def run_eval_model(
    manifest: str,
    model_path: str,
    out_dir: str,
    sweep_seconds: float = 5.0,
    max_workers: Optional[int] = None,
) -> dict:
    """Evaluate persisted models over every event of a corpus (no folds)."""
    workers = resolve_workers(max_workers)
    models = gd_io.load_model(model_path)
    config = models[0].config
    resolved = {
        "command": "eval-model",
        "manifest": str(manifest),
        "model_path": str(model_path),
        "out_dir": str(out_dir),
        "sweep_seconds": sweep_seconds,
        "max_workers": workers,
        "features": _config_dict(config),
    }
    _log_resolved("eval-model", resolved)
    corpus = gd_io.load_corpus(manifest)
    predictions = predict_events(corpus.drives, models, config, sweep_seconds, workers)
    if not predictions:
        raise ValueError("corpus contains no sweepable lane-change events")
    curves = {
        kind: recall_curve(predictions, kind)
        for kind in (Maneuver.LEFT_LANE_CHANGE, Maneuver.RIGHT_LANE_CHANGE)
    }
    lk = classify_lane_keeping(corpus.drives, models, config)
    decisions = [
        (p.sample.true_label, p.predicted)
        for p in predictions
        if p.sample.t_rel_frames == 0
    ] + lk
    cm = confusion_matrix(
        [t for t, _ in decisions], [p for _, p in decisions], labels=MANEUVERS
    )
    traces = {}
    for kind in (Maneuver.LEFT_LANE_CHANGE, Maneuver.RIGHT_LANE_CHANGE):
        trace = _traces_from_predictions(predictions, kind, tuple(m.label for m in models))
        if trace is not None:
            traces[kind] = trace
    out = Path(out_dir)
    fps = corpus.drives[0].scanpath.fps
    written = _write_eval_outputs(out, curves, traces, cm)
    return {
        "out_dir": str(out),
        "files": written,
        "recall": _recall_summary(curves, fps),
        "decision_weighted_accuracy": weighted_accuracy(cm),
        "resolved_config": resolved,
    }


def run_eval_quality(
    manifest: str,
    out_dir: str,
    window_seconds: float = 5.0,
    stride_seconds: float = 1.0,
) -> dict:
    """Accumulation-quality distributions and the frame-level zone confusion.

    Uses every drive that carries a ground-truth scanpath.
    """
    resolved = {
        "command": "eval-gaze-quality",
        "manifest": str(manifest),
        "out_dir": str(out_dir),
        "window_seconds": window_seconds,
        "stride_seconds": stride_seconds,
    }
    _log_resolved("eval-gaze-quality", resolved)
    corpus = gd_io.load_corpus(manifest)
    pairs = [
        (drive.truth, drive.scanpath)
        for drive in corpus.drives
        if drive.truth is not None
    ]
    if not pairs:
        raise ValueError(
            "no drive in the corpus carries a ground-truth scanpath; "
            "gaze-quality metrics need aligned truth/estimate pairs"
        )
    dist = metric_distributions(pairs, window_seconds, stride_seconds)
    truth_frames = []
    pred_frames = []
    for true_sp, est_sp in pairs:
        truth_frames.extend(true_sp.zones)
        pred_frames.extend(est_sp.zones)
    cm = confusion_matrix(truth_frames, pred_frames)
    out = Path(out_dir)
    gd_io.write_distribution_csv(dist.ratio, out / "accumulation_ratio.csv")
    gd_io.write_distribution_csv(dist.abs_error, out / "accumulation_abs_error.csv")
    gd_io.write_confusion_csv(cm, out / "confusion_zones.csv")
    return {
        "out_dir": str(out),
        "files": [
            "accumulation_ratio.csv",
            "accumulation_abs_error.csv",
            "confusion_zones.csv",
        ],
        "n_windows": dist.n_windows,
        "n_pairs": len(pairs),
        "zone_weighted_accuracy": weighted_accuracy(cm),
        "resolved_config": resolved,
    }
