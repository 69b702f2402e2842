"""Synthetic multi-driver corpora with a configurable label-noise channel.

Scanpaths are generated from per-maneuver behavior templates: a baseline zone
interrupted by a schedule of glances whose end is anchored to the SyncF frame
for lane changes. A confusion-matrix channel then corrupts the clean labels,
standing in for an upstream gaze-zone estimator. All generation is a pure
function of (configuration, seed); identical seeds reproduce identical
corpora byte for byte.

Template and channel defaults are generator parameters chosen to produce
plausible glance structure (e.g. rearview and right-zone glances before a
right lane change, errors concentrated in adjacent zones); they are not
measurements. Clean scanpaths mark zone transitions with short Unknown
stretches, mirroring annotation practice.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import (
    MANEUVERS,
    N_ZONES,
    UNKNOWN_CODE,
    Corpus,
    DriveRecord,
    GazeZone,
    Maneuver,
    ManeuverEvent,
    Scanpath,
    zone_code,
)

# Table-shaped default: per-driver (LLC, RLC, LK) event counts; totals 50/32/333.
DEFAULT_EVENT_COUNTS: tuple[tuple[int, int, int], ...] = (
    (9, 5, 20),
    (5, 5, 60),
    (5, 4, 50),
    (10, 4, 32),
    (10, 4, 45),
    (6, 5, 80),
    (5, 5, 46),
)

# Frames of margin a lane-change event must leave around SyncF: the sweep
# reaches 10 s back (5 s sweep + 5 s window) and 5 s forward.
PRE_SYNCF_SECONDS = 10.0
POST_SYNCF_SECONDS = 5.0
LANE_KEEPING_SECONDS = 5.0

# Scheduled glances are capped below the 5 s feature window so the whole
# signature lands inside [SyncF - 5 s, SyncF).
MAX_SCHEDULE_SECONDS = 4.9
MIN_GLANCE_SECONDS = 0.3


@dataclass(frozen=True)
class GlanceSpec:
    """One scheduled glance: target zone, duration statistics, occurrence."""

    zone: GazeZone
    duration_mean: float
    duration_jitter: float
    probability: float = 1.0

    def __post_init__(self) -> None:
        if self.zone is GazeZone.UNKNOWN:
            raise ValueError("scheduled glances must target a canonical zone")
        if self.duration_mean <= 0:
            raise ValueError("glance duration_mean must be positive")
        if self.duration_jitter < 0:
            raise ValueError("glance duration_jitter must be >= 0")
        if not 0.0 <= self.probability <= 1.0:
            raise ValueError("glance probability must be in [0, 1]")


@dataclass(frozen=True)
class BehaviorTemplate:
    """Glance schedule for one maneuver kind.

    For lane changes the schedule's end is anchored to SyncF; a baseline
    lead-in guarantees at least 10 s of frames before SyncF and the post
    stretch at least 5 s after. Lane-keeping templates emit exactly 5 s with
    probability-gated checks placed inside baseline gaps.
    """

    kind: Maneuver
    schedule: tuple[GlanceSpec, ...]
    baseline: GazeZone = GazeZone.FRONT
    anchor: str = "schedule-end"

    def __post_init__(self) -> None:
        object.__setattr__(self, "schedule", tuple(self.schedule))
        if self.anchor != "schedule-end":
            raise ValueError(f"unsupported anchor rule: {self.anchor!r}")
        if self.baseline is GazeZone.UNKNOWN:
            raise ValueError("baseline must be a canonical zone")
        if self.kind is not Maneuver.LANE_KEEPING and not self.schedule:
            raise ValueError("lane-change templates need a non-empty schedule")


def default_templates() -> dict[Maneuver, BehaviorTemplate]:
    """Mirror-check schedules for lane changes, sporadic checks for keeping.

    Each lane-change schedule opens with a probability-gated scan block of
    short comfort checks and blinks. Besides being what annotated windows look
    like, the block gives every zone nonzero variance in the training windows,
    which keeps the fitted covariances well-behaved when noisy test windows
    carry stray mass in otherwise untouched zones.
    """
    return {
        Maneuver.LEFT_LANE_CHANGE: BehaviorTemplate(
            kind=Maneuver.LEFT_LANE_CHANGE,
            schedule=(
                GlanceSpec(GazeZone.LEFT, 0.45, 0.12, probability=0.60),
                GlanceSpec(GazeZone.SPEEDOMETER, 0.40, 0.10, probability=0.45),
                GlanceSpec(GazeZone.EYES_CLOSED, 0.25, 0.05, probability=0.30),
                GlanceSpec(GazeZone.CENTER_STACK, 0.45, 0.12, probability=0.30),
                GlanceSpec(GazeZone.RIGHT_WINDSHIELD, 0.35, 0.10, probability=0.25),
                GlanceSpec(GazeZone.RIGHT, 0.35, 0.10, probability=0.20),
                GlanceSpec(GazeZone.LEFT_SHOULDER, 0.35, 0.10, probability=0.35),
                GlanceSpec(GazeZone.FRONT, 0.5, 0.10),
                GlanceSpec(GazeZone.LEFT, 1.0, 0.25),
                GlanceSpec(GazeZone.REARVIEW, 0.8, 0.20),
                GlanceSpec(GazeZone.LEFT, 0.9, 0.25, probability=0.8),
                GlanceSpec(GazeZone.FRONT, 0.5, 0.10),
            ),
        ),
        Maneuver.RIGHT_LANE_CHANGE: BehaviorTemplate(
            kind=Maneuver.RIGHT_LANE_CHANGE,
            schedule=(
                GlanceSpec(GazeZone.RIGHT, 0.45, 0.12, probability=0.60),
                GlanceSpec(GazeZone.SPEEDOMETER, 0.40, 0.10, probability=0.45),
                GlanceSpec(GazeZone.EYES_CLOSED, 0.25, 0.05, probability=0.30),
                GlanceSpec(GazeZone.CENTER_STACK, 0.45, 0.12, probability=0.35),
                GlanceSpec(GazeZone.LEFT_SHOULDER, 0.30, 0.08, probability=0.25),
                GlanceSpec(GazeZone.LEFT, 0.35, 0.10, probability=0.20),
                GlanceSpec(GazeZone.RIGHT_WINDSHIELD, 0.40, 0.10, probability=0.40),
                GlanceSpec(GazeZone.FRONT, 0.5, 0.10),
                GlanceSpec(GazeZone.REARVIEW, 0.9, 0.25),
                GlanceSpec(GazeZone.RIGHT, 1.3, 0.30),
                GlanceSpec(GazeZone.FRONT, 0.5, 0.10),
            ),
        ),
        Maneuver.LANE_KEEPING: BehaviorTemplate(
            kind=Maneuver.LANE_KEEPING,
            schedule=(
                GlanceSpec(GazeZone.SPEEDOMETER, 0.50, 0.15, probability=0.45),
                GlanceSpec(GazeZone.REARVIEW, 0.60, 0.15, probability=0.35),
                GlanceSpec(GazeZone.LEFT, 0.45, 0.12, probability=0.10),
                GlanceSpec(GazeZone.RIGHT, 0.45, 0.12, probability=0.07),
                GlanceSpec(GazeZone.CENTER_STACK, 0.55, 0.15, probability=0.10),
                GlanceSpec(GazeZone.RIGHT_WINDSHIELD, 0.45, 0.12, probability=0.06),
                GlanceSpec(GazeZone.LEFT_SHOULDER, 0.35, 0.10, probability=0.04),
                GlanceSpec(GazeZone.EYES_CLOSED, 0.25, 0.05, probability=0.08),
            ),
        ),
    }


@dataclass(frozen=True, eq=False)
class NoiseChannel:
    """Frame-label corruption channel over the 9 zones plus Unknown.

    ``matrix[i, j]`` is the probability of emitting label code ``j`` when the
    true code is ``i`` (row-stochastic, canonical order with Unknown last).
    With ``burst_rho > 0`` an erroneous label persists to the next frame with
    that probability before a fresh draw, producing bursty error runs.
    """

    matrix: np.ndarray
    burst_rho: float = 0.0

    def __post_init__(self) -> None:
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.shape != (N_ZONES + 1, N_ZONES + 1):
            raise ValueError(
                f"confusion matrix must be {N_ZONES + 1}x{N_ZONES + 1}, got {m.shape}"
            )
        if (m < 0).any():
            raise ValueError("confusion matrix entries must be non-negative")
        sums = m.sum(axis=1)
        bad = np.nonzero(np.abs(sums - 1.0) > 1e-9)[0]
        if bad.size:
            raise ValueError(
                f"confusion matrix rows must sum to 1 (row {bad[0]} sums to "
                f"{sums[bad[0]]!r})"
            )
        if not 0.0 <= self.burst_rho < 1.0:
            raise ValueError("burst_rho must be in [0, 1)")
        if m.flags.writeable:
            m = m.copy()
            m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "burst_rho", float(self.burst_rho))


# Spatial neighborhoods used to place the default channel's error mass.
_NEIGHBORS: dict[GazeZone, tuple[GazeZone, ...]] = {
    GazeZone.FRONT: (
        GazeZone.SPEEDOMETER,
        GazeZone.REARVIEW,
        GazeZone.RIGHT_WINDSHIELD,
        GazeZone.LEFT,
    ),
    GazeZone.RIGHT: (GazeZone.RIGHT_WINDSHIELD, GazeZone.CENTER_STACK),
    GazeZone.LEFT: (GazeZone.LEFT_SHOULDER, GazeZone.FRONT),
    GazeZone.CENTER_STACK: (GazeZone.SPEEDOMETER, GazeZone.RIGHT, GazeZone.REARVIEW),
    GazeZone.REARVIEW: (GazeZone.FRONT, GazeZone.RIGHT_WINDSHIELD),
    GazeZone.SPEEDOMETER: (GazeZone.FRONT, GazeZone.CENTER_STACK),
    GazeZone.LEFT_SHOULDER: (GazeZone.LEFT,),
    GazeZone.RIGHT_WINDSHIELD: (GazeZone.FRONT, GazeZone.REARVIEW, GazeZone.RIGHT),
    GazeZone.EYES_CLOSED: (GazeZone.SPEEDOMETER, GazeZone.FRONT),
}


def default_noise_channel(
    error_rate: float = 0.15,
    unknown_rate: float = 0.02,
    burst_rho: float = 0.0,
) -> NoiseChannel:
    """Errors concentrated in spatially adjacent zones plus a small Unknown mass."""
    if not 0.0 <= unknown_rate <= error_rate < 1.0:
        raise ValueError("need 0 <= unknown_rate <= error_rate < 1")
    m = np.zeros((N_ZONES + 1, N_ZONES + 1))
    for zone, neighbors in _NEIGHBORS.items():
        i = zone_code(zone)
        m[i, i] = 1.0 - error_rate
        m[i, UNKNOWN_CODE] = unknown_rate
        share = (error_rate - unknown_rate) / len(neighbors)
        for nb in neighbors:
            m[i, zone_code(nb)] = share
    m[UNKNOWN_CODE, UNKNOWN_CODE] = 1.0 - error_rate
    m[UNKNOWN_CODE, :N_ZONES] = error_rate / N_ZONES
    return NoiseChannel(matrix=m, burst_rho=burst_rho)


def identity_noise_channel() -> NoiseChannel:
    return NoiseChannel(matrix=np.eye(N_ZONES + 1))


def _as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def _child_rng(master_seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(master_seed), *key]))


def corrupt_scanpath(sp: Scanpath, channel: NoiseChannel, rng) -> Scanpath:
    """Push a scanpath through the noise channel.

    ``rng`` is an integer seed or a numpy Generator. Length, fps and identity
    metadata are preserved; only labels change.
    """
    gen = _as_generator(rng)
    cum = np.cumsum(channel.matrix, axis=1)
    truth = sp.codes
    n = truth.size
    u_emit = gen.random(n)
    u_hold = gen.random(n) if channel.burst_rho > 0.0 else None
    out = np.empty(n, dtype=np.int8)
    prev_emit = -1
    prev_true = -1
    for i in range(n):
        t = int(truth[i])
        if (
            u_hold is not None
            and prev_emit >= 0
            and prev_emit != prev_true
            and u_hold[i] < channel.burst_rho
        ):
            e = prev_emit
        else:
            e = int(np.searchsorted(cum[t], u_emit[i], side="right"))
            if e > UNKNOWN_CODE:
                e = UNKNOWN_CODE
        out[i] = e
        prev_emit = e
        prev_true = t
    return Scanpath(out, sp.fps, sp.driver_id, sp.drive_id)


def _clipped_duration(rng: np.random.Generator, mean: float, jitter: float) -> float:
    lo = max(MIN_GLANCE_SECONDS, mean - 2.0 * jitter)
    hi = max(lo, mean + 2.0 * jitter)
    return float(np.clip(rng.normal(mean, jitter), lo, hi))


def _sample_schedule(
    template: BehaviorTemplate,
    rng: np.random.Generator,
    fps: int,
    duration_scale: float,
) -> list[tuple[int, int]]:
    """Scheduled (zone code, frames) runs, capped below the feature window."""
    items: list[tuple[int, float]] = []
    for spec in template.schedule:
        if spec.probability < 1.0 and rng.random() >= spec.probability:
            continue
        dur = _clipped_duration(
            rng, spec.duration_mean * duration_scale, spec.duration_jitter
        )
        items.append((zone_code(spec.zone), dur))
    total = sum(d for _, d in items)
    if total > MAX_SCHEDULE_SECONDS:
        factor = MAX_SCHEDULE_SECONDS / total
        items = [(c, d * factor) for c, d in items]
    return [(c, max(1, round(d * fps))) for c, d in items]


# (zone, duration mean, duration jitter, selection weight)
_BASELINE_CHECKS: tuple[tuple[GazeZone, float, float, float], ...] = (
    (GazeZone.SPEEDOMETER, 0.45, 0.10, 0.30),
    (GazeZone.REARVIEW, 0.55, 0.15, 0.25),
    (GazeZone.LEFT, 0.45, 0.12, 0.10),
    (GazeZone.RIGHT, 0.45, 0.12, 0.07),
    (GazeZone.CENTER_STACK, 0.55, 0.15, 0.10),
    (GazeZone.RIGHT_WINDSHIELD, 0.45, 0.12, 0.06),
    (GazeZone.LEFT_SHOULDER, 0.35, 0.10, 0.04),
    (GazeZone.EYES_CLOSED, 0.25, 0.05, 0.08),
)
_BASELINE_CHECK_WEIGHTS = np.array([w for *_, w in _BASELINE_CHECKS])
_BASELINE_CHECK_WEIGHTS = _BASELINE_CHECK_WEIGHTS / _BASELINE_CHECK_WEIGHTS.sum()


def _baseline_runs(
    n_frames: int, fps: int, rng: np.random.Generator, baseline: GazeZone
) -> list[tuple[int, int]]:
    """Baseline driving: long baseline runs with sporadic checks and blinks."""
    base = zone_code(baseline)
    runs: list[tuple[int, int]] = []
    remaining = n_frames
    while remaining > 0:
        frames = min(remaining, max(1, round(rng.uniform(1.2, 3.0) * fps)))
        runs.append((base, frames))
        remaining -= frames
        if remaining <= 0:
            break
        if rng.random() < 0.4:
            pick = int(rng.choice(len(_BASELINE_CHECKS), p=_BASELINE_CHECK_WEIGHTS))
            zone, mean, jitter, _ = _BASELINE_CHECKS[pick]
            frames = min(remaining, max(1, round(_clipped_duration(rng, mean, jitter) * fps)))
            runs.append((zone_code(zone), frames))
            remaining -= frames
    return runs


def _runs_to_codes(
    runs: Sequence[tuple[int, int]],
    rng: np.random.Generator,
    transition_unknown_prob: float = 0.7,
    max_unknown_frames: int = 3,
    min_visible_frames: int = 5,
) -> np.ndarray:
    """Concatenate runs, marking zone transitions with short Unknown stretches.

    The Unknown frames replace the head of the incoming run so run boundaries
    and total length are preserved; runs keep at least ``min_visible_frames``
    of their own label.
    """
    codes: list[int] = []
    prev = -1
    for code, frames in runs:
        if frames <= 0:
            continue
        k = 0
        if prev >= 0 and code != prev and rng.random() < transition_unknown_prob:
            k = int(rng.integers(1, max_unknown_frames + 1))
            k = min(k, max(0, frames - min_visible_frames))
        codes.extend([UNKNOWN_CODE] * k)
        codes.extend([code] * (frames - k))
        prev = code
    return np.array(codes, dtype=np.int8)


def generate_event(
    template: BehaviorTemplate,
    rng,
    fps: int = 30,
    duration_scale: float = 1.0,
    driver_id: str = "",
    drive_id: str = "",
) -> tuple[Scanpath, ManeuverEvent]:
    """Generate one event's scanpath segment and its event record.

    Lane-change segments leave at least 10 s before SyncF and 5 s after;
    lane-keeping segments are exactly 5 s. Deterministic given the rng state.
    """
    gen = _as_generator(rng)
    if template.kind is Maneuver.LANE_KEEPING:
        n = round(LANE_KEEPING_SECONDS * fps)
        runs = _layout_lane_keeping(template, gen, fps, duration_scale, n)
        codes = _runs_to_codes(runs, gen)
        if codes.size != n:
            raise ValueError(
                f"lane-keeping template produced {codes.size} frames, expected {n}"
            )
        event = ManeuverEvent(Maneuver.LANE_KEEPING, segment=(0, n))
    else:
        schedule = _sample_schedule(template, gen, fps, duration_scale)
        if not schedule:
            raise ValueError(
                f"{template.kind.value} template produced an empty glance schedule"
            )
        sched_frames = sum(f for _, f in schedule)
        lead_seconds = max(PRE_SYNCF_SECONDS - sched_frames / fps, 2.0)
        lead_frames = round((lead_seconds + gen.uniform(0.0, 2.0)) * fps)
        lead_frames = max(lead_frames, round(PRE_SYNCF_SECONDS * fps) - sched_frames)
        post_frames = max(
            round((POST_SYNCF_SECONDS + gen.uniform(0.0, 1.0)) * fps),
            round(POST_SYNCF_SECONDS * fps),
        )
        runs = (
            _baseline_runs(lead_frames, fps, gen, template.baseline)
            + list(schedule)
            + _baseline_runs(post_frames, fps, gen, template.baseline)
        )
        codes = _runs_to_codes(runs, gen)
        syncf = lead_frames + sched_frames
        if syncf < round(PRE_SYNCF_SECONDS * fps) or codes.size - syncf < round(
            POST_SYNCF_SECONDS * fps
        ):
            raise ValueError(
                f"{template.kind.value} template cannot satisfy the "
                f"{PRE_SYNCF_SECONDS:.0f} s pre / {POST_SYNCF_SECONDS:.0f} s "
                f"post SyncF margins"
            )
        event = ManeuverEvent(template.kind, syncf_frame=syncf)
    return Scanpath(codes, fps, driver_id, drive_id), event


def _layout_lane_keeping(
    template: BehaviorTemplate,
    rng: np.random.Generator,
    fps: int,
    duration_scale: float,
    n_frames: int,
) -> list[tuple[int, int]]:
    base = zone_code(template.baseline)
    checks: list[tuple[int, int]] = []
    for spec in template.schedule:
        if rng.random() < spec.probability:
            dur = _clipped_duration(
                rng, spec.duration_mean * duration_scale, spec.duration_jitter
            )
            checks.append((zone_code(spec.zone), max(1, round(dur * fps))))
    while checks and sum(f for _, f in checks) > n_frames // 2:
        checks.pop()
    gap_total = n_frames - sum(f for _, f in checks)
    n_gaps = len(checks) + 1
    gaps = rng.multinomial(gap_total, np.full(n_gaps, 1.0 / n_gaps))
    runs: list[tuple[int, int]] = []
    for idx, check in enumerate(checks):
        if gaps[idx] > 0:
            runs.append((base, int(gaps[idx])))
        runs.append(check)
    if gaps[-1] > 0:
        runs.append((base, int(gaps[-1])))
    return runs


def generate_corpus(
    counts: Optional[Sequence[tuple[int, int, int]]] = None,
    templates: Optional[dict[Maneuver, BehaviorTemplate]] = None,
    master_seed: int = 0,
    fps: int = 30,
    channel: Optional[NoiseChannel] = None,
    driver_duration_jitter: float = 0.15,
) -> Corpus:
    """Generate a multi-driver corpus of clean and noise-corrupted drives.

    ``counts`` is one (LLC, RLC, LK) triple per driver and defaults to the
    7-driver shape totaling 50/32/333 events. Each driver gets a persistent
    multiplicative offset on glance duration means so cross-driver validation
    is non-trivial. Every drive record carries the clean scanpath as truth
    and the channel-corrupted one as the estimated stream.
    """
    if master_seed < 0:
        raise ValueError("master_seed must be >= 0")
    if counts is None:
        counts = DEFAULT_EVENT_COUNTS
    if templates is None:
        templates = default_templates()
    for kind in MANEUVERS:
        if kind not in templates:
            raise ValueError(f"missing template for {kind.value}")
    if channel is None:
        channel = default_noise_channel()
    lk_frames = round(LANE_KEEPING_SECONDS * fps)
    drives: list[DriveRecord] = []
    for d_idx, (n_llc, n_rlc, n_lk) in enumerate(counts):
        driver_id = f"driver{d_idx + 1:02d}"
        drng = _child_rng(master_seed, 1, d_idx)
        scale = 1.0 + float(drng.uniform(-driver_duration_jitter, driver_duration_jitter))
        for kind_idx, (kind, n_events, prefix) in enumerate(
            (
                (Maneuver.LEFT_LANE_CHANGE, n_llc, "llc"),
                (Maneuver.RIGHT_LANE_CHANGE, n_rlc, "rlc"),
            )
        ):
            for j in range(n_events):
                drive_id = f"{prefix}{j:03d}"
                truth, event = generate_event(
                    templates[kind],
                    _child_rng(master_seed, 2, d_idx, kind_idx, j),
                    fps,
                    scale,
                    driver_id,
                    drive_id,
                )
                estimated = corrupt_scanpath(
                    truth, channel, _child_rng(master_seed, 3, d_idx, kind_idx, j)
                )
                drives.append(
                    DriveRecord(scanpath=estimated, events=(event,), truth=truth)
                )
        if n_lk > 0:
            chunks = []
            events = []
            for j in range(n_lk):
                segment_sp, _ = generate_event(
                    templates[Maneuver.LANE_KEEPING],
                    _child_rng(master_seed, 2, d_idx, 2, j),
                    fps,
                    scale,
                    driver_id,
                    "lk",
                )
                chunks.append(segment_sp.codes)
                events.append(
                    ManeuverEvent(
                        Maneuver.LANE_KEEPING,
                        segment=(j * lk_frames, (j + 1) * lk_frames),
                    )
                )
            truth = Scanpath(np.concatenate(chunks), fps, driver_id, "lk")
            estimated = corrupt_scanpath(
                truth, channel, _child_rng(master_seed, 3, d_idx, 2, 0)
            )
            drives.append(
                DriveRecord(scanpath=estimated, events=tuple(events), truth=truth)
            )
    return Corpus(tuple(drives))
