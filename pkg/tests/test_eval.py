import numpy as np
import pytest

from gazedyn.core import (
    MANEUVERS,
    Corpus,
    DriveRecord,
    FeatureConfig,
    FeatureMode,
    GazeZone,
    Maneuver,
    ManeuverEvent,
)
from gazedyn.evaluation import (
    PredictedWindow,
    TrainingSources,
    accumulation_abs_error,
    accumulation_ratio,
    confidence_traces,
    confusion_matrix,
    lodo_cv,
    metric_distributions,
    moving_average,
    recall_curve,
    training_features,
    weighted_accuracy,
    window_sweep,
)
from gazedyn.synth import generate_corpus

import oracles
from conftest import F, FPS, L, RV, runs, sp

GA = FeatureConfig(mode=FeatureMode.GA)


class TestAccumulationMetrics:
    def test_identical_windows_ratio_one_for_present_zones(self):
        w = sp(runs((F, 100), (RV, 50)))
        out = accumulation_ratio(w, w)
        assert out[F] == 1.0
        assert out[RV] == 1.0
        assert out[L] == 0.0  # absent zone takes the zero branch

    def test_ratio_zero_when_zone_absent_from_truth(self):
        true_w = sp([F] * 150)
        est_w = sp(runs((F, 100), (RV, 50)))
        out = accumulation_ratio(true_w, est_w)
        assert out[RV] == 0.0

    def test_ratio_direct_division(self):
        true_w = sp(runs((RV, 30), (F, 120)))
        est_w = sp(runs((RV, 15), (F, 135)))
        out = accumulation_ratio(true_w, est_w)
        assert out[RV] == (15 / 150) / (30 / 150)
        assert out[RV] == 0.5

    def test_abs_error_reports_false_accumulation(self):
        true_w = sp([F] * 150)
        est_w = sp(runs((F, 135), (RV, 15)))
        out = accumulation_abs_error(true_w, est_w)
        assert out[RV] == 15 / 150
        assert out[F] == 0.0  # present in truth -> zero branch

    def test_abs_error_zero_when_estimates_match(self):
        w = sp(runs((F, 100), (RV, 50)))
        assert np.all(accumulation_abs_error(w, w) == 0.0)

    def test_metrics_mutually_exclusive_per_zone(self, rng):
        for _ in range(50):
            true_w = sp(rng.integers(0, 10, 150, dtype=np.int8))
            est_w = sp(rng.integers(0, 10, 150, dtype=np.int8))
            ratio = accumulation_ratio(true_w, est_w)
            abs_err = accumulation_abs_error(true_w, est_w)
            assert np.all((ratio == 0.0) | (abs_err == 0.0))

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError, match="not aligned"):
            accumulation_ratio(sp([F] * 10), sp([F] * 11))


class TestMetricDistributions:
    def test_window_count_twenty_second_video(self):
        # 20 s video, 5 s windows, 4 s overlap -> 16 windows
        video = sp([F] * 600)
        dist = metric_distributions([(video, video)])
        assert dist.n_windows == 16

    def test_identical_pairs_ratio_all_ones_for_present_zones(self):
        video = sp(runs((F, 300), (RV, 300)))
        dist = metric_distributions([(video, video)])
        assert dist.ratio[GazeZone.FRONT]
        assert all(v == 1.0 for v in dist.ratio[GazeZone.FRONT])
        assert all(v == 1.0 for v in dist.ratio[GazeZone.REARVIEW])
        assert all(v == 0.0 for v in dist.abs_error[GazeZone.LEFT])

    def test_branch_pooling_is_exhaustive(self, rng):
        video_t = sp(rng.integers(0, 10, 600, dtype=np.int8))
        video_e = sp(rng.integers(0, 10, 600, dtype=np.int8))
        dist = metric_distributions([(video_t, video_e)])
        for zone in GazeZone:
            if zone is GazeZone.UNKNOWN:
                continue
            total = len(dist.ratio[zone]) + len(dist.abs_error[zone])
            assert total == dist.n_windows

    def test_requires_pairs(self):
        with pytest.raises(ValueError, match="at least one"):
            metric_distributions([])

    def test_window_count_at_dataset_scale(self):
        # 82 twenty-second videos at 16 windows each pool 1312 samples
        video = sp([F] * 600)
        dist = metric_distributions([(video, video)] * 82)
        assert dist.n_windows == 1312


class TestConfusionMatrix:
    def test_perfect_predictions(self):
        truth = [GazeZone.FRONT] * 5 + [GazeZone.REARVIEW] * 5
        cm = confusion_matrix(truth, truth)
        assert weighted_accuracy(cm) == 1.0

    def test_mean_of_per_class_recalls(self):
        truth = [Maneuver.LEFT_LANE_CHANGE] * 4 + [Maneuver.LANE_KEEPING] * 4
        pred = [Maneuver.LEFT_LANE_CHANGE] * 4 + [Maneuver.LANE_KEEPING] * 2 + [
            Maneuver.LEFT_LANE_CHANGE
        ] * 2
        cm = confusion_matrix(truth, pred)
        assert weighted_accuracy(cm) == 0.75

    def test_unknown_predictions_shrink_row_sums(self):
        truth = [GazeZone.FRONT] * 4
        pred = [GazeZone.FRONT, GazeZone.FRONT, GazeZone.UNKNOWN, GazeZone.UNKNOWN]
        cm = confusion_matrix(truth, pred)
        i = cm.labels.index(GazeZone.FRONT)
        assert cm.row_totals[i] == 4
        assert cm.rates()[i].sum() == 0.5

    def test_matches_tally_oracle(self, rng):
        labels = list(MANEUVERS)
        truth = [labels[i] for i in rng.integers(0, 3, 200)]
        pred = [labels[i] for i in rng.integers(0, 3, 200)]
        cm = confusion_matrix(truth, pred, labels=labels)
        recalls = []
        for label in labels:
            pos = [i for i, t in enumerate(truth) if t is label]
            if pos:
                recalls.append(
                    sum(1 for i in pos if pred[i] is label) / len(pos)
                )
        assert weighted_accuracy(cm) == pytest.approx(np.mean(recalls), abs=1e-12)

    def test_empty_inputs_rejected(self):
        with pytest.raises(ValueError, match="at least one"):
            confusion_matrix([], [])
        with pytest.raises(ValueError, match="length"):
            confusion_matrix([GazeZone.FRONT], [])


def _lane_change_drive(n=600, syncf=450, kind=Maneuver.LEFT_LANE_CHANGE):
    drive = sp([F] * n)
    return drive, ManeuverEvent(kind, syncf_frame=syncf)


class TestWindowSweep:
    def test_sample_count_at_thirty_fps(self):
        drive, event = _lane_change_drive()
        samples = window_sweep(drive, event, GA)
        assert len(samples) == 301

    def test_earliest_window_span(self):
        drive, event = _lane_change_drive()
        samples = window_sweep(drive, event, GA)
        first = samples[0]
        assert first.t_rel == -5.0
        assert first.feature.window == (450 - 300, 450 - 150)

    def test_window_at_syncf(self):
        drive, event = _lane_change_drive()
        at_zero = [s for s in window_sweep(drive, event, GA) if s.t_rel_frames == 0]
        assert len(at_zero) == 1
        assert at_zero[0].feature.window == (300, 450)

    def test_windows_stay_inside_drive(self, rng):
        drive, event = _lane_change_drive(n=620, syncf=460)
        for s in window_sweep(drive, event, GA):
            start, end = s.feature.window
            assert 0 <= start < end <= drive.n_frames

    def test_margin_violation_identifies_event(self):
        drive, event = _lane_change_drive(n=600, syncf=200)
        with pytest.raises(ValueError, match="LeftLaneChange@200"):
            window_sweep(drive, event, GA)

    def test_lane_keeping_not_sweepable(self):
        drive = sp([F] * 600)
        event = ManeuverEvent(Maneuver.LANE_KEEPING, segment=(0, 150))
        with pytest.raises(ValueError, match="lane-change"):
            window_sweep(drive, event, GA)


def _predicted(t, true, pred, fps=FPS):
    if true is Maneuver.LANE_KEEPING:
        event = ManeuverEvent(Maneuver.LANE_KEEPING, segment=(0, 150))
    else:
        event = ManeuverEvent(true, syncf_frame=450)
    from gazedyn.features import assemble_features
    from gazedyn.evaluation import WindowSample

    sample = WindowSample(
        feature=assemble_features(sp([F] * 150), GA),
        t_rel_frames=t,
        fps=fps,
        event=event,
        true_label=true,
    )
    return PredictedWindow(sample=sample, predicted=pred)


class TestRecallCurve:
    def test_all_correct(self):
        preds = [
            _predicted(t, Maneuver.LEFT_LANE_CHANGE, Maneuver.LEFT_LANE_CHANGE)
            for t in range(-3, 4)
        ]
        curve = recall_curve(preds, Maneuver.LEFT_LANE_CHANGE)
        assert np.all(curve.recall == 1.0)
        assert curve.omitted_t_count == 0

    def test_all_lane_keeping_predictions(self):
        preds = [
            _predicted(t, Maneuver.LEFT_LANE_CHANGE, Maneuver.LANE_KEEPING)
            for t in range(-3, 4)
        ]
        curve = recall_curve(preds, Maneuver.LEFT_LANE_CHANGE)
        assert np.all(curve.recall == 0.0)

    def test_three_to_two_class_remap(self):
        # an RLC prediction on an LLC event is a negative, same as LK
        preds = [
            _predicted(0, Maneuver.LEFT_LANE_CHANGE, Maneuver.RIGHT_LANE_CHANGE),
            _predicted(0, Maneuver.LEFT_LANE_CHANGE, Maneuver.LEFT_LANE_CHANGE),
        ]
        curve = recall_curve(preds, Maneuver.LEFT_LANE_CHANGE)
        assert curve.recall_at(0) == 0.5

    def test_matches_tally_oracle_and_permutation_invariance(self, rng):
        kinds = list(MANEUVERS)
        preds = [
            _predicted(
                int(rng.integers(-5, 6)),
                kinds[int(rng.integers(0, 3))],
                kinds[int(rng.integers(0, 3))],
            )
            for _ in range(300)
        ]
        curve = recall_curve(preds, Maneuver.RIGHT_LANE_CHANGE)
        rows = [
            (p.sample.t_rel_frames, p.sample.true_label, p.predicted) for p in preds
        ]
        expected = oracles.tally_recall(rows, Maneuver.RIGHT_LANE_CHANGE)
        for i, t in enumerate(curve.t_rel_frames):
            tp, p = expected[int(t)]
            assert curve.true_positives[i] == tp
            assert curve.positives[i] == p
            assert curve.recall[i] == tp / p
        shuffled = list(preds)
        rng.shuffle(shuffled)
        curve2 = recall_curve(shuffled, Maneuver.RIGHT_LANE_CHANGE)
        assert np.array_equal(curve.recall, curve2.recall)

    def test_zero_positive_times_omitted_with_count(self):
        preds = [
            _predicted(0, Maneuver.LEFT_LANE_CHANGE, Maneuver.LEFT_LANE_CHANGE),
            _predicted(1, Maneuver.LANE_KEEPING, Maneuver.LANE_KEEPING),
        ]
        curve = recall_curve(preds, Maneuver.LEFT_LANE_CHANGE)
        assert list(curve.t_rel_frames) == [0]
        assert curve.omitted_t_count == 1
        assert curve.recall_at(1) is None


class TestTrainingFeatures:
    def test_lane_change_window_ends_at_syncf(self, mini_corpus):
        sets = training_features(mini_corpus.drives, GA)
        for driver, drive, kind, start, end in sets[
            Maneuver.LEFT_LANE_CHANGE
        ].provenance:
            assert end - start == 150
        drive = next(
            d
            for d in mini_corpus.drives
            if d.events[0].kind is Maneuver.LEFT_LANE_CHANGE
        )
        syncf = drive.events[0].syncf_frame
        spans = [
            (start, end)
            for _, drive_id, _, start, end in sets[Maneuver.LEFT_LANE_CHANGE].provenance
            if drive_id == drive.drive_id
        ]
        assert (syncf - 150, syncf) in spans

    def test_annotated_source_requires_truth(self, mini_corpus):
        stripped = Corpus(
            tuple(
                DriveRecord(scanpath=d.scanpath, events=d.events, truth=None)
                for d in mini_corpus.drives
            )
        )
        with pytest.raises(ValueError, match="no ground-truth"):
            training_features(stripped.drives, GA)

    def test_estimated_source_works_without_truth(self, mini_corpus):
        stripped = [
            DriveRecord(scanpath=d.scanpath, events=d.events, truth=None)
            for d in mini_corpus.drives
        ]
        sources = TrainingSources(
            lane_change=__import__("gazedyn.evaluation", fromlist=["GazeSource"]).GazeSource.ESTIMATED
        )
        sets = training_features(stripped, GA, sources)
        assert sets[Maneuver.LEFT_LANE_CHANGE].features


class TestConfidenceTraces:
    def test_single_event_has_zero_std(self, mini_corpus, ga_config):
        from gazedyn.evaluation import fit_protocol_models

        models, _ = fit_protocol_models(mini_corpus.drives, ga_config)
        drive_event = next(
            (d, e)
            for d in mini_corpus.drives
            for e in d.events
            if e.kind is Maneuver.LEFT_LANE_CHANGE
        )
        traces = confidence_traces([drive_event], models, ga_config)
        assert traces.n_events == 1
        assert np.all(traces.std == 0.0)
        # fitness lies in (0, 1]; far from a model exp() can underflow to 0.0
        assert np.all(traces.mean >= 0.0)
        assert np.all(traces.mean <= 1.0)
        labels = list(traces.model_labels)
        at_zero = np.nonzero(traces.t_rel_frames == 0)[0][0]
        assert traces.mean[labels.index(Maneuver.LEFT_LANE_CHANGE), at_zero] > 0.0

    def test_mixed_kinds_rejected(self, mini_corpus, ga_config):
        from gazedyn.evaluation import fit_protocol_models

        models, _ = fit_protocol_models(mini_corpus.drives, ga_config)
        llc = next(
            (d, e)
            for d in mini_corpus.drives
            for e in d.events
            if e.kind is Maneuver.LEFT_LANE_CHANGE
        )
        rlc = next(
            (d, e)
            for d in mini_corpus.drives
            for e in d.events
            if e.kind is Maneuver.RIGHT_LANE_CHANGE
        )
        with pytest.raises(ValueError, match="one kind"):
            confidence_traces([llc, rlc], models, ga_config)

    def test_true_model_dominates_near_syncf_on_synthetic_events(
        self, mini_corpus, ga_config
    ):
        from gazedyn.evaluation import fit_protocol_models

        models, _ = fit_protocol_models(mini_corpus.drives, ga_config)
        llc_events = [
            (d, e)
            for d in mini_corpus.drives
            for e in d.events
            if e.kind is Maneuver.LEFT_LANE_CHANGE
        ]
        traces = confidence_traces(llc_events, models, ga_config)
        labels = list(traces.model_labels)
        at_zero = np.nonzero(traces.t_rel_frames == 0)[0][0]
        llc_mean = traces.mean[labels.index(Maneuver.LEFT_LANE_CHANGE), at_zero]
        lk_mean = traces.mean[labels.index(Maneuver.LANE_KEEPING), at_zero]
        assert llc_mean > lk_mean


class TestLodoCv:
    def test_two_drivers_two_folds(self, mini_corpus, ga_config):
        result = lodo_cv(mini_corpus, ga_config)
        assert len(result.folds) == 2
        held = {f.held_out_driver for f in result.folds}
        assert held == set(mini_corpus.driver_ids())

    def test_training_never_touches_held_out_driver(self, mini_corpus, ga_config):
        result = lodo_cv(mini_corpus, ga_config)
        for fold in result.folds:
            trained_on = {driver for driver, *_ in fold.training_provenance}
            assert fold.held_out_driver not in trained_on
            assert trained_on  # non-empty provenance fingerprint

    def test_single_driver_rejected(self, ga_config):
        corpus = generate_corpus(counts=((2, 2, 4),), master_seed=3)
        with pytest.raises(ValueError, match="at least 2 drivers"):
            lodo_cv(corpus, ga_config)

    def test_missing_class_names_fold_and_class(self, ga_config):
        # driver02 has no RLC events, so the fold holding out driver01 has
        # nothing to train the RightLaneChange model on.
        corpus = generate_corpus(counts=((2, 2, 4), (2, 0, 4)), master_seed=3)
        with pytest.raises(
            ValueError, match="driver01.*RightLaneChange"
        ):
            lodo_cv(corpus, ga_config)

    def test_aggregate_recall_pools_counts_across_folds(self, mini_corpus, ga_config):
        result = lodo_cv(mini_corpus, ga_config)
        pooled_rows = [
            (p.sample.t_rel_frames, p.sample.true_label, p.predicted)
            for fold in result.folds
            for p in fold.predictions
        ]
        for kind in (Maneuver.LEFT_LANE_CHANGE, Maneuver.RIGHT_LANE_CHANGE):
            expected = oracles.tally_recall(pooled_rows, kind)
            curve = result.recall_curves[kind]
            for i, t in enumerate(curve.t_rel_frames):
                tp, p = expected[int(t)]
                assert curve.true_positives[i] == tp
                assert curve.positives[i] == p

    def test_workers_do_not_change_results(self, mini_corpus, ga_config):
        serial = lodo_cv(mini_corpus, ga_config, max_workers=1)
        parallel = lodo_cv(mini_corpus, ga_config, max_workers=4)
        for kind in serial.recall_curves:
            assert np.array_equal(
                serial.recall_curves[kind].recall,
                parallel.recall_curves[kind].recall,
            )

    def test_decision_confusion_includes_lane_keeping(self, mini_corpus, ga_config):
        result = lodo_cv(mini_corpus, ga_config)
        cm = result.decision_confusion
        lk_row = cm.labels.index(Maneuver.LANE_KEEPING)
        assert cm.row_totals[lk_row] == 24  # all LK segments classified once


class TestResolveWorkers:
    def test_env_variable_caps_worker_count(self, monkeypatch):
        from gazedyn.evaluation import resolve_workers

        monkeypatch.setenv("GAZE_DYN_THREADS", "2")
        assert resolve_workers(8) == 2
        assert resolve_workers(1) == 1
        monkeypatch.setenv("GAZE_DYN_THREADS", "not-a-number")
        with pytest.raises(ValueError, match="GAZE_DYN_THREADS"):
            resolve_workers(4)
        monkeypatch.delenv("GAZE_DYN_THREADS")
        assert resolve_workers(3) == 3


class TestMovingAverage:
    def test_flat_series_unchanged(self):
        x = np.full(10, 0.5)
        assert np.allclose(moving_average(x, 5), x)

    def test_window_one_is_identity(self):
        x = np.arange(5.0)
        assert np.array_equal(moving_average(x, 1), x)

    def test_centered_mean(self):
        x = np.array([0.0, 1.0, 2.0])
        out = moving_average(x, 3)
        assert out[1] == 1.0
        assert out[0] == 0.5
