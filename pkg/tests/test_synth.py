import numpy as np
import pytest

from gazedyn.core import GazeZone, Maneuver, zone_code
from gazedyn.synth import (
    DEFAULT_EVENT_COUNTS,
    BehaviorTemplate,
    GlanceSpec,
    NoiseChannel,
    corrupt_scanpath,
    default_noise_channel,
    default_templates,
    generate_corpus,
    generate_event,
    identity_noise_channel,
)

import oracles
from conftest import F, FPS, R, RV, sp


class TestTemplates:
    def test_default_templates_cover_all_kinds(self):
        templates = default_templates()
        assert set(templates) == set(Maneuver)

    def test_glance_spec_validation(self):
        with pytest.raises(ValueError, match="positive"):
            GlanceSpec(GazeZone.FRONT, 0.0, 0.1)
        with pytest.raises(ValueError, match="probability"):
            GlanceSpec(GazeZone.FRONT, 0.5, 0.1, probability=1.5)
        with pytest.raises(ValueError, match="canonical"):
            GlanceSpec(GazeZone.UNKNOWN, 0.5, 0.1)

    def test_template_validation(self):
        with pytest.raises(ValueError, match="anchor"):
            BehaviorTemplate(
                Maneuver.LEFT_LANE_CHANGE,
                schedule=(GlanceSpec(GazeZone.LEFT, 0.5, 0.1),),
                anchor="syncf-start",
            )
        with pytest.raises(ValueError, match="non-empty"):
            BehaviorTemplate(Maneuver.LEFT_LANE_CHANGE, schedule=())


class TestGenerateEvent:
    def test_lane_keeping_is_exactly_five_seconds(self):
        templates = default_templates()
        for seed in range(20):
            segment, event = generate_event(
                templates[Maneuver.LANE_KEEPING], seed, fps=FPS
            )
            assert segment.n_frames == 150
            assert event.segment == (0, 150)

    def test_same_seed_reproduces_identical_output(self):
        templates = default_templates()
        for kind in Maneuver:
            a, ea = generate_event(templates[kind], 123, fps=FPS)
            b, eb = generate_event(templates[kind], 123, fps=FPS)
            assert a == b
            assert ea == eb

    def test_lane_change_margins(self):
        templates = default_templates()
        for kind in (Maneuver.LEFT_LANE_CHANGE, Maneuver.RIGHT_LANE_CHANGE):
            for seed in range(25):
                segment, event = generate_event(templates[kind], seed, fps=FPS)
                syncf = event.syncf_frame
                assert syncf >= 10 * FPS
                assert segment.n_frames - syncf >= 5 * FPS

    def test_rlc_signature_glances_inside_final_window(self):
        # rearview and right runs of at least 5 frames must exist in
        # [SyncF - 5 s, SyncF) for every generated right lane change
        template = default_templates()[Maneuver.RIGHT_LANE_CHANGE]
        for seed in range(40):
            segment, event = generate_event(template, seed, fps=FPS)
            window = segment.codes[event.syncf_frame - 150 : event.syncf_frame]
            runs = oracles.run_length_encode(list(window))
            lengths = {}
            for code, start, end in runs:
                lengths[code] = max(lengths.get(code, 0), end - start + 1)
            assert lengths.get(RV, 0) >= 5
            assert lengths.get(R, 0) >= 5

    def test_truth_marks_transitions_with_unknown(self):
        template = default_templates()[Maneuver.LEFT_LANE_CHANGE]
        hits = 0
        for seed in range(10):
            segment, _ = generate_event(template, seed, fps=FPS)
            hits += int(np.any(segment.codes == zone_code(GazeZone.UNKNOWN)))
        assert hits > 0

    def test_driver_duration_scale_changes_output(self):
        template = default_templates()[Maneuver.RIGHT_LANE_CHANGE]
        slow, _ = generate_event(template, 5, fps=FPS, duration_scale=1.15)
        fast, _ = generate_event(template, 5, fps=FPS, duration_scale=0.85)
        assert slow != fast


class TestGenerateCorpus:
    def test_default_shape(self):
        corpus = generate_corpus(master_seed=1)
        assert len(corpus.driver_ids()) == 7
        counts = corpus.event_counts()
        assert counts[Maneuver.LEFT_LANE_CHANGE] == 50
        assert counts[Maneuver.RIGHT_LANE_CHANGE] == 32
        assert counts[Maneuver.LANE_KEEPING] == 333
        assert sum(a + b + c for a, b, c in DEFAULT_EVENT_COUNTS) == 50 + 32 + 333

    def test_zero_counts_give_empty_corpus(self):
        corpus = generate_corpus(counts=((0, 0, 0),), master_seed=1)
        assert corpus.drives == ()

    def test_reruns_are_identical(self):
        a = generate_corpus(counts=((2, 2, 3), (2, 2, 3)), master_seed=9)
        b = generate_corpus(counts=((2, 2, 3), (2, 2, 3)), master_seed=9)
        assert len(a.drives) == len(b.drives)
        for da, db in zip(a.drives, b.drives):
            assert da.scanpath == db.scanpath
            assert da.truth == db.truth
            assert da.events == db.events

    def test_different_seeds_differ_same_shape(self):
        a = generate_corpus(counts=((2, 2, 3),), master_seed=1)
        b = generate_corpus(counts=((2, 2, 3),), master_seed=2)
        assert len(a.drives) == len(b.drives)
        assert any(da.truth != db.truth for da, db in zip(a.drives, b.drives))

    def test_every_lane_change_event_is_sweepable(self, mini_corpus):
        from gazedyn.core import FeatureConfig
        from gazedyn.evaluation import window_sweep

        for drive in mini_corpus.drives:
            for event in drive.events:
                if event.kind is Maneuver.LANE_KEEPING:
                    continue
                samples = window_sweep(drive.scanpath, event, FeatureConfig())
                assert len(samples) == 301

    def test_negative_seed_rejected(self):
        with pytest.raises(ValueError, match=">= 0"):
            generate_corpus(counts=((1, 1, 1),), master_seed=-1)

    def test_corruption_preserves_metadata(self, mini_corpus):
        for drive in mini_corpus.drives:
            assert drive.truth is not None
            assert drive.scanpath.n_frames == drive.truth.n_frames
            assert drive.scanpath.fps == drive.truth.fps
            assert drive.scanpath.driver_id == drive.truth.driver_id
            assert drive.scanpath.drive_id == drive.truth.drive_id


class TestNoiseChannel:
    def test_rows_must_be_stochastic(self):
        m = np.eye(10)
        m[3, 3] = 0.9
        with pytest.raises(ValueError, match="sum to 1"):
            NoiseChannel(matrix=m)
        m = np.eye(10)
        m[0, 1] = -0.1
        m[0, 0] = 1.1
        with pytest.raises(ValueError, match="non-negative"):
            NoiseChannel(matrix=m)

    def test_burst_rho_range(self):
        with pytest.raises(ValueError, match="burst_rho"):
            NoiseChannel(matrix=np.eye(10), burst_rho=1.0)

    def test_default_channel_row_error_mass(self):
        channel = default_noise_channel()
        m = channel.matrix
        assert np.allclose(m.sum(axis=1), 1.0, atol=1e-12)
        assert np.allclose(np.diag(m), 0.85)

    def test_identity_channel_is_lossless(self):
        sp_in = sp(list(np.random.default_rng(3).integers(0, 10, 500)))
        out = corrupt_scanpath(sp_in, identity_noise_channel(), 7)
        assert out == sp_in

    def test_empirical_error_rate_matches_channel(self):
        # 0.15 off-diagonal mass, i.i.d. frames, >= 100k frames
        channel = default_noise_channel(error_rate=0.15)
        rng = np.random.default_rng(21)
        truth = sp(list(rng.integers(0, 9, 120_000)))
        out = corrupt_scanpath(truth, channel, 22)
        error_rate = np.mean(out.codes != truth.codes)
        assert abs(error_rate - 0.15) <= 0.01

    def test_burst_error_run_length_matches_analytic_mean(self):
        # constant truth; an error run continues with rho + (1-rho)*q where q
        # is the redraw error probability, so the mean run length is
        # 1/(1 - rho - (1-rho)*q) ~ 10 for small q at rho=0.9
        rho = 0.9
        q = 0.01
        channel = default_noise_channel(error_rate=q, unknown_rate=0.0, burst_rho=rho)
        truth = sp([F] * 400_000)
        out = corrupt_scanpath(truth, channel, 5)
        errors = (out.codes != truth.codes).astype(int)
        runs = oracles.run_length_encode(list(errors))
        lengths = [end - start + 1 for val, start, end in runs if val == 1]
        assert lengths, "expected some error runs"
        expected = 1.0 / (1.0 - rho - (1.0 - rho) * q)
        assert np.mean(lengths) == pytest.approx(expected, rel=0.15)

    def test_burst_disabled_gives_short_runs(self):
        channel = default_noise_channel(error_rate=0.15)
        truth = sp([F] * 100_000)
        out = corrupt_scanpath(truth, channel, 5)
        errors = (out.codes != truth.codes).astype(int)
        runs = oracles.run_length_encode(list(errors))
        lengths = [end - start + 1 for val, start, end in runs if val == 1]
        assert np.mean(lengths) == pytest.approx(1.0 / (1.0 - 0.15), rel=0.1)
