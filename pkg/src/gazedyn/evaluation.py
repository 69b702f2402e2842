"""Evaluation metrics and the maneuver-prediction protocol.

Covers the gaze-accumulation quality metrics (ratio of estimated to true
accumulation and absolute error of false accumulations), confusion matrices
with weighted accuracy, the sliding-window sweep around lane-change events,
recall-versus-time curves, model-confidence traces, and leave-one-driver-out
cross-validation.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Hashable, Optional, Sequence

import numpy as np

from .behavior import BehaviorModel, classify, fit_behavior_model, fitness
from .core import (
    MANEUVERS,
    N_ZONES,
    Corpus,
    DriveRecord,
    FeatureConfig,
    GazeZone,
    GlanceFeatureVector,
    Maneuver,
    ManeuverEvent,
    Scanpath,
    canonical_zone_order,
)
from .features import assemble_features, gaze_accumulation


# ---------------------------------------------------------------------------
# gaze-accumulation quality metrics


def accumulation_ratio(true_window: Scanpath, est_window: Scanpath) -> np.ndarray:
    """Per-zone ratio of estimated to true gaze accumulation.

    Zones absent from the true window get 0; false accumulations there are
    measured by :func:`accumulation_abs_error` instead.
    """
    _check_aligned(true_window, est_window)
    a_true = gaze_accumulation(true_window)
    a_est = gaze_accumulation(est_window)
    out = np.zeros(N_ZONES)
    present = a_true != 0.0
    np.divide(a_est, a_true, out=out, where=present)
    return out


def accumulation_abs_error(true_window: Scanpath, est_window: Scanpath) -> np.ndarray:
    """Per-zone estimated accumulation where the true accumulation is zero.

    Measures false gaze accumulations; zones present in the true window get 0.
    """
    _check_aligned(true_window, est_window)
    a_true = gaze_accumulation(true_window)
    a_est = gaze_accumulation(est_window)
    return np.where(a_true == 0.0, a_est, 0.0)


def _check_aligned(true_window: Scanpath, est_window: Scanpath) -> None:
    if true_window.n_frames != est_window.n_frames:
        raise ValueError(
            f"windows are not aligned: {true_window.n_frames} vs "
            f"{est_window.n_frames} frames"
        )


@dataclass(frozen=True, eq=False)
class MetricDistributions:
    """Per-zone value lists for both accumulation metrics.

    For each window and zone exactly one list receives a value: the ratio
    list when the zone is present in the true window, the absolute-error list
    when it is not.
    """

    ratio: dict[GazeZone, list[float]]
    abs_error: dict[GazeZone, list[float]]
    n_windows: int


def metric_distributions(
    pairs: Sequence[tuple[Scanpath, Scanpath]],
    window_seconds: float = 5.0,
    stride_seconds: float = 1.0,
) -> MetricDistributions:
    """Collect both accumulation metrics over overlapping windows.

    Each (true, estimated) pair is broken into ``window_seconds`` windows
    advancing by ``stride_seconds`` (5-second windows with 4 seconds of
    overlap by default).
    """
    if not pairs:
        raise ValueError("metric_distributions needs at least one scanpath pair")
    zones = canonical_zone_order()
    ratio: dict[GazeZone, list[float]] = {z: [] for z in zones}
    abs_error: dict[GazeZone, list[float]] = {z: [] for z in zones}
    n_windows = 0
    for true_sp, est_sp in pairs:
        _check_aligned(true_sp, est_sp)
        if true_sp.fps != est_sp.fps:
            raise ValueError("scanpath pair has mismatched fps")
        fps = true_sp.fps
        win = round(window_seconds * fps)
        stride = round(stride_seconds * fps)
        if win < 1 or stride < 1:
            raise ValueError("window and stride must span at least one frame")
        if true_sp.n_frames < win:
            raise ValueError(
                f"scanpath of {true_sp.n_frames} frames is shorter than the "
                f"{win}-frame metric window"
            )
        for start in range(0, true_sp.n_frames - win + 1, stride):
            tw = true_sp.window(start, start + win)
            ew = est_sp.window(start, start + win)
            a_true = gaze_accumulation(tw)
            a_est = gaze_accumulation(ew)
            for j, zone in enumerate(zones):
                if a_true[j] != 0.0:
                    ratio[zone].append(float(a_est[j] / a_true[j]))
                else:
                    abs_error[zone].append(float(a_est[j]))
            n_windows += 1
    return MetricDistributions(ratio=ratio, abs_error=abs_error, n_windows=n_windows)


# ---------------------------------------------------------------------------
# confusion matrix / weighted accuracy


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """Row = true label, column = predicted label, in the declared order.

    Predictions outside the declared label set count toward the row totals
    but have no column, so normalized rows may sum to less than one (e.g.
    Unknown predictions against zone ground truth).
    """

    labels: tuple[Hashable, ...]
    counts: np.ndarray
    row_totals: np.ndarray

    def rates(self) -> np.ndarray:
        out = np.zeros_like(self.counts, dtype=np.float64)
        totals = self.row_totals.astype(np.float64)
        np.divide(self.counts, totals[:, None], out=out, where=totals[:, None] > 0)
        return out


def confusion_matrix(
    truth: Sequence[Hashable],
    predicted: Sequence[Hashable],
    labels: Optional[Sequence[Hashable]] = None,
) -> ConfusionMatrix:
    """Tally a confusion matrix over a declared label order.

    ``labels`` defaults to the canonical zone order for :class:`GazeZone`
    inputs and the canonical maneuver order for :class:`Maneuver` inputs.
    Samples whose *true* label is outside the set are dropped; out-of-set
    *predictions* only widen the row totals.
    """
    if len(truth) != len(predicted):
        raise ValueError(
            f"truth and predictions differ in length: {len(truth)} vs {len(predicted)}"
        )
    if len(truth) == 0:
        raise ValueError("confusion matrix needs at least one sample")
    if labels is None:
        if isinstance(truth[0], GazeZone):
            labels = canonical_zone_order()
        elif isinstance(truth[0], Maneuver):
            labels = MANEUVERS
        else:
            labels = tuple(sorted(set(truth), key=repr))
    labels = tuple(labels)
    index = {label: i for i, label in enumerate(labels)}
    n = len(labels)
    counts = np.zeros((n, n), dtype=np.int64)
    totals = np.zeros(n, dtype=np.int64)
    for t, p in zip(truth, predicted):
        ti = index.get(t)
        if ti is None:
            continue
        totals[ti] += 1
        pi = index.get(p)
        if pi is not None:
            counts[ti, pi] += 1
    return ConfusionMatrix(labels=labels, counts=counts, row_totals=totals)


def weighted_accuracy(cm: ConfusionMatrix) -> float:
    """Mean of per-class recalls over classes that occur in the truth."""
    mask = cm.row_totals > 0
    if not mask.any():
        raise ValueError("confusion matrix has no populated true classes")
    recalls = np.diag(cm.counts)[mask] / cm.row_totals[mask]
    return float(recalls.mean())


# ---------------------------------------------------------------------------
# sliding-window protocol


@dataclass(frozen=True, eq=False)
class WindowSample:
    """One feature window from an event sweep.

    ``t_rel_frames`` is the offset of the window *end* from SyncF in frames;
    ``t_rel`` converts it to seconds. The window at -5 s therefore covers
    [SyncF - 10 s, SyncF - 5 s).
    """

    feature: GlanceFeatureVector
    t_rel_frames: int
    fps: int
    event: ManeuverEvent
    true_label: Maneuver

    @property
    def t_rel(self) -> float:
        return self.t_rel_frames / self.fps


def window_sweep(
    drive: Scanpath,
    event: ManeuverEvent,
    config: FeatureConfig,
    sweep_seconds: float = 5.0,
) -> list[WindowSample]:
    """Extract one window per frame step with ends in [-sweep, +sweep] s.

    The event must leave ``sweep + window`` seconds of frames before SyncF
    and ``sweep`` seconds after it inside the drive.
    """
    if event.kind is Maneuver.LANE_KEEPING:
        raise ValueError("window sweep requires a lane-change event with a SyncF frame")
    fps = drive.fps
    win_n = config.window_frames(fps)
    sweep_n = round(sweep_seconds * fps)
    syncf = int(event.syncf_frame)  # type: ignore[arg-type]
    if syncf - sweep_n - win_n < 0 or syncf + sweep_n > drive.n_frames:
        raise ValueError(
            f"event {event.describe()} in drive "
            f"{drive.driver_id}/{drive.drive_id} lacks sweep margin: needs "
            f"{sweep_n + win_n} frames before SyncF and {sweep_n} after, "
            f"has {syncf} and {drive.n_frames - syncf}"
        )
    samples = []
    for k in range(-sweep_n, sweep_n + 1):
        end = syncf + k
        feature = assemble_features(drive, config, (end - win_n, end))
        samples.append(
            WindowSample(
                feature=feature,
                t_rel_frames=k,
                fps=fps,
                event=event,
                true_label=event.kind,
            )
        )
    return samples


@dataclass(frozen=True, eq=False)
class PredictedWindow:
    """A window sample with its classification outcome.

    ``scores`` holds the per-model fitness values in canonical maneuver
    order when available.
    """

    sample: WindowSample
    predicted: Maneuver
    scores: Optional[tuple[float, ...]] = None


@dataclass(frozen=True, eq=False)
class RecallCurve:
    """Recall of one positive class per window-end time index.

    The other two classes are remapped to a single negative class, so
    recall(t) = TP(t) / P(t). Time indices with no positive samples are
    omitted; ``omitted_t_count`` says how many.
    """

    positive: Maneuver
    t_rel_frames: np.ndarray
    fps: int
    recall: np.ndarray
    true_positives: np.ndarray
    positives: np.ndarray
    omitted_t_count: int = 0

    @property
    def t_rel(self) -> np.ndarray:
        return self.t_rel_frames / self.fps

    def recall_at(self, t_rel_frames: int) -> Optional[float]:
        hits = np.nonzero(self.t_rel_frames == t_rel_frames)[0]
        if hits.size == 0:
            return None
        return float(self.recall[hits[0]])


def recall_curve(
    predictions: Sequence[PredictedWindow], positive: Maneuver
) -> RecallCurve:
    """Recall of ``positive`` per time index over classified windows."""
    if not predictions:
        raise ValueError("recall curve needs at least one classified window")
    fps = predictions[0].sample.fps
    for p in predictions:
        if p.sample.fps != fps:
            raise ValueError("classified windows mix frame rates")
    tallies: dict[int, list[int]] = {}
    for p in predictions:
        if p.sample.true_label is not positive:
            continue
        entry = tallies.setdefault(p.sample.t_rel_frames, [0, 0])
        entry[1] += 1
        if p.predicted is positive:
            entry[0] += 1
    all_ts = sorted({p.sample.t_rel_frames for p in predictions})
    kept = [t for t in all_ts if t in tallies]
    omitted = len(all_ts) - len(kept)
    t_arr = np.array(kept, dtype=np.int64)
    tp_arr = np.array([tallies[t][0] for t in kept], dtype=np.int64)
    p_arr = np.array([tallies[t][1] for t in kept], dtype=np.int64)
    return RecallCurve(
        positive=positive,
        t_rel_frames=t_arr,
        fps=fps,
        recall=tp_arr / p_arr if len(kept) else np.zeros(0),
        true_positives=tp_arr,
        positives=p_arr,
        omitted_t_count=omitted,
    )


# ---------------------------------------------------------------------------
# confidence traces


@dataclass(frozen=True, eq=False)
class ConfidenceTraces:
    """Mean and standard deviation of model fitness across events of one kind.

    ``mean`` and ``std`` have shape (n_models, n_time_indices); rows follow
    ``model_labels``.
    """

    kind: Maneuver
    model_labels: tuple[Maneuver, ...]
    t_rel_frames: np.ndarray
    fps: int
    mean: np.ndarray
    std: np.ndarray
    n_events: int

    @property
    def t_rel(self) -> np.ndarray:
        return self.t_rel_frames / self.fps


def confidence_traces(
    drive_events: Sequence[tuple[DriveRecord, ManeuverEvent]],
    models: Sequence[BehaviorModel],
    config: FeatureConfig,
    sweep_seconds: float = 5.0,
) -> ConfidenceTraces:
    """Fitness statistics of each model over sweeps of same-kind events.

    Windows are computed from the drives' estimated scanpaths.
    """
    if not drive_events:
        raise ValueError("confidence traces need at least one event")
    kinds = {event.kind for _, event in drive_events}
    if len(kinds) != 1:
        raise ValueError("confidence traces mix event kinds; pass one kind at a time")
    kind = kinds.pop()
    rows = []
    t_frames = None
    fps = None
    for drive, event in drive_events:
        samples = window_sweep(drive.scanpath, event, config, sweep_seconds)
        ts = np.array([s.t_rel_frames for s in samples], dtype=np.int64)
        if t_frames is None:
            t_frames, fps = ts, samples[0].fps
        elif not np.array_equal(ts, t_frames):
            raise ValueError("events produce mismatched sweep grids")
        rows.append(
            np.array([[fitness(s.feature, m) for s in samples] for m in models])
        )
    stack = np.stack(rows)  # (events, models, T)
    return ConfidenceTraces(
        kind=kind,
        model_labels=tuple(m.label for m in models),
        t_rel_frames=t_frames,
        fps=fps,
        mean=stack.mean(axis=0),
        std=stack.std(axis=0),
        n_events=len(rows),
    )


def _traces_from_predictions(
    predictions: Sequence[PredictedWindow],
    kind: Maneuver,
    model_labels: tuple[Maneuver, ...],
) -> Optional[ConfidenceTraces]:
    rows: dict[int, list[tuple[float, ...]]] = {}
    fps = None
    for p in predictions:
        if p.sample.true_label is not kind or p.scores is None:
            continue
        rows.setdefault(p.sample.t_rel_frames, []).append(p.scores)
        fps = p.sample.fps
    if not rows:
        return None
    ts = sorted(rows)
    n_events = len(rows[ts[0]])
    mean = np.zeros((len(model_labels), len(ts)))
    std = np.zeros_like(mean)
    for col, t in enumerate(ts):
        block = np.array(rows[t])  # (events_at_t, models)
        mean[:, col] = block.mean(axis=0)
        std[:, col] = block.std(axis=0)
    return ConfidenceTraces(
        kind=kind,
        model_labels=model_labels,
        t_rel_frames=np.array(ts, dtype=np.int64),
        fps=fps,
        mean=mean,
        std=std,
        n_events=n_events,
    )


# ---------------------------------------------------------------------------
# training-feature extraction and cross-validation


class GazeSource(Enum):
    """Which label stream feeds feature extraction."""

    ANNOTATED = "annotated"
    ESTIMATED = "estimated"


@dataclass(frozen=True)
class TrainingSources:
    """Stream choice per training role.

    Defaults mirror the evaluation protocol: lane-change models train on
    annotated gaze, the lane-keeping model on estimated gaze, and testing
    always uses estimated gaze.
    """

    lane_change: GazeSource = GazeSource.ANNOTATED
    lane_keeping: GazeSource = GazeSource.ESTIMATED


@dataclass(frozen=True, eq=False)
class TrainingSet:
    features: tuple[GlanceFeatureVector, ...]
    provenance: tuple[tuple[str, str, str, int, int], ...]


def _training_stream(drive: DriveRecord, source: GazeSource) -> Scanpath:
    if source is GazeSource.ANNOTATED:
        if drive.truth is None:
            raise ValueError(
                f"drive {drive.driver_id}/{drive.drive_id} has no ground-truth "
                f"scanpath but the annotated training source was requested"
            )
        return drive.truth
    return drive.scanpath


def training_features(
    drives: Sequence[DriveRecord],
    config: FeatureConfig,
    sources: TrainingSources = TrainingSources(),
) -> dict[Maneuver, TrainingSet]:
    """Per-class training features following the evaluation protocol.

    Lane-change features come from the window ending at SyncF; lane-keeping
    features from each 5-second segment.
    """
    out: dict[Maneuver, tuple[list, list]] = {kind: ([], []) for kind in MANEUVERS}
    for drive in drives:
        for event in drive.events:
            if event.kind is Maneuver.LANE_KEEPING:
                stream = _training_stream(drive, sources.lane_keeping)
                span = event.segment  # type: ignore[assignment]
            else:
                stream = _training_stream(drive, sources.lane_change)
                win_n = config.window_frames(stream.fps)
                syncf = int(event.syncf_frame)  # type: ignore[arg-type]
                if syncf < win_n:
                    raise ValueError(
                        f"event {event.describe()} in drive "
                        f"{drive.driver_id}/{drive.drive_id} has fewer than "
                        f"{win_n} frames before SyncF"
                    )
                span = (syncf - win_n, syncf)
            feature = assemble_features(stream, config, span)
            feats, prov = out[event.kind]
            feats.append(feature)
            prov.append((drive.driver_id, drive.drive_id, event.kind.value, *span))
    return {
        kind: TrainingSet(features=tuple(feats), provenance=tuple(prov))
        for kind, (feats, prov) in out.items()
    }


def fit_protocol_models(
    drives: Sequence[DriveRecord],
    config: FeatureConfig,
    sources: TrainingSources = TrainingSources(),
    context: str = "corpus",
) -> tuple[tuple[BehaviorModel, ...], dict[Maneuver, TrainingSet]]:
    """Fit the three maneuver models from a set of drives."""
    sets = training_features(drives, config, sources)
    for kind in MANEUVERS:
        if len(sets[kind].features) < 2:
            raise ValueError(
                f"{context}: fewer than 2 training events for class {kind.value}"
            )
    models = tuple(
        fit_behavior_model(sets[kind].features, kind, config.ridge_epsilon)
        for kind in MANEUVERS
    )
    return models, sets


def resolve_workers(requested: Optional[int] = None) -> int:
    """Worker count for event-level parallelism, capped by GAZE_DYN_THREADS."""
    count = requested if requested else min(4, os.cpu_count() or 1)
    cap = os.environ.get("GAZE_DYN_THREADS")
    if cap:
        try:
            count = min(count, int(cap))
        except ValueError as exc:
            raise ValueError(f"GAZE_DYN_THREADS is not an integer: {cap!r}") from exc
    return max(1, count)


def _predict_event(
    drive: DriveRecord,
    event: ManeuverEvent,
    models: Sequence[BehaviorModel],
    config: FeatureConfig,
    sweep_seconds: float,
) -> list[PredictedWindow]:
    samples = window_sweep(drive.scanpath, event, config, sweep_seconds)
    out = []
    for s in samples:
        label, scores = classify(s.feature, models)
        out.append(PredictedWindow(sample=s, predicted=label, scores=tuple(scores)))
    return out


def predict_events(
    drives: Sequence[DriveRecord],
    models: Sequence[BehaviorModel],
    config: FeatureConfig,
    sweep_seconds: float = 5.0,
    max_workers: int = 1,
) -> list[PredictedWindow]:
    """Sweep and classify every lane-change event in ``drives``.

    Events are processed independently (optionally on a thread pool) and the
    results are assembled in deterministic drive/event order.
    """
    jobs = [
        (drive, event)
        for drive in drives
        for event in drive.events
        if event.kind is not Maneuver.LANE_KEEPING
    ]
    if max_workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            chunks = list(
                pool.map(
                    lambda job: _predict_event(*job, models, config, sweep_seconds),
                    jobs,
                )
            )
    else:
        chunks = [_predict_event(d, e, models, config, sweep_seconds) for d, e in jobs]
    return [p for chunk in chunks for p in chunk]


def classify_lane_keeping(
    drives: Sequence[DriveRecord],
    models: Sequence[BehaviorModel],
    config: FeatureConfig,
) -> list[tuple[Maneuver, Maneuver]]:
    """(true, predicted) decisions for each lane-keeping segment."""
    out = []
    for drive in drives:
        for event in drive.events:
            if event.kind is not Maneuver.LANE_KEEPING:
                continue
            feature = assemble_features(drive.scanpath, config, event.segment)
            label, _ = classify(feature, models)
            out.append((Maneuver.LANE_KEEPING, label))
    return out


@dataclass(frozen=True, eq=False)
class FoldResult:
    """One leave-one-driver-out fold."""

    held_out_driver: str
    models: tuple[BehaviorModel, ...]
    predictions: tuple[PredictedWindow, ...]
    lane_keeping_decisions: tuple[tuple[Maneuver, Maneuver], ...]
    training_provenance: tuple[tuple[str, str, str, int, int], ...]


@dataclass(frozen=True, eq=False)
class LodoCvResult:
    """Cross-validated prediction results pooled across folds."""

    folds: tuple[FoldResult, ...]
    recall_curves: dict[Maneuver, RecallCurve]
    decision_confusion: ConfusionMatrix
    traces: dict[Maneuver, ConfidenceTraces]
    config: FeatureConfig
    sources: TrainingSources


def lodo_cv(
    corpus: Corpus,
    config: FeatureConfig,
    sources: TrainingSources = TrainingSources(),
    sweep_seconds: float = 5.0,
    max_workers: int = 1,
) -> LodoCvResult:
    """Leave-one-driver-out cross-validation of the prediction protocol.

    Each fold trains the three models on every other driver's events and
    sweeps the held-out driver's lane-change events. Aggregate recall curves
    pool true-positive and positive counts across folds; the decision
    confusion matrix pools the window at SyncF for lane changes plus every
    held-out lane-keeping segment.
    """
    driver_ids = corpus.driver_ids()
    if len(driver_ids) < 2:
        raise ValueError(
            f"leave-one-driver-out needs at least 2 drivers, got {len(driver_ids)}"
        )
    folds = []
    for held_out in driver_ids:
        train = [d for d in corpus.drives if d.driver_id != held_out]
        test = [d for d in corpus.drives if d.driver_id == held_out]
        models, sets = fit_protocol_models(
            train, config, sources, context=f"fold holding out {held_out!r}"
        )
        predictions = predict_events(test, models, config, sweep_seconds, max_workers)
        lk = classify_lane_keeping(test, models, config)
        provenance = tuple(p for kind in MANEUVERS for p in sets[kind].provenance)
        folds.append(
            FoldResult(
                held_out_driver=held_out,
                models=models,
                predictions=tuple(predictions),
                lane_keeping_decisions=tuple(lk),
                training_provenance=provenance,
            )
        )
    pooled = [p for fold in folds for p in fold.predictions]
    curves = {
        kind: recall_curve(pooled, kind)
        for kind in (Maneuver.LEFT_LANE_CHANGE, Maneuver.RIGHT_LANE_CHANGE)
    }
    decisions = [
        (p.sample.true_label, p.predicted) for p in pooled if p.sample.t_rel_frames == 0
    ]
    decisions += [d for fold in folds for d in fold.lane_keeping_decisions]
    cm = confusion_matrix(
        [t for t, _ in decisions], [p for _, p in decisions], labels=MANEUVERS
    )
    traces = {}
    for kind in (Maneuver.LEFT_LANE_CHANGE, Maneuver.RIGHT_LANE_CHANGE):
        trace = _traces_from_predictions(pooled, kind, MANEUVERS)
        if trace is not None:
            traces[kind] = trace
    return LodoCvResult(
        folds=tuple(folds),
        recall_curves=curves,
        decision_confusion=cm,
        traces=traces,
        config=config,
        sources=sources,
    )


def moving_average(values: np.ndarray, window: int) -> np.ndarray:
    """Centered moving average with shrinking edge windows."""
    if window < 1:
        raise ValueError("smoothing window must be >= 1")
    x = np.asarray(values, dtype=np.float64)
    half = window // 2
    out = np.empty_like(x)
    for i in range(x.size):
        lo = max(0, i - half)
        hi = min(x.size, i + half + 1)
        out[i] = x[lo:hi].mean()
    return out
