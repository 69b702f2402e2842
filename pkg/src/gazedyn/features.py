"""Spatio-temporal glance descriptors over gaze-zone windows.

Three per-zone descriptors are computed from a scanpath window: gaze
accumulation (fraction of frames spent in the zone), glance frequency
(confirmed transitions into the zone per second) and glance duration (longest
confirmed glance, in seconds). Frequency and duration are derived from a
majority-vote debouncing state machine that suppresses frame-level label
flicker in noisy zone estimates.

Unknown frames count toward window length but never toward a descriptor
entry. They do participate in the debouncing state machine, so a confirmed
stretch of Unknown terminates the previous glance without opening a reported
segment.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    N_ZONES,
    FeatureConfig,
    FeatureMode,
    GlanceFeatureVector,
    Scanpath,
)


@dataclass(frozen=True, eq=False)
class GlanceSegments:
    """Confirmed glance segments per canonical zone.

    ``segments[j]`` holds inclusive ``(start, end)`` frame-index pairs
    (0-indexed, window-relative) for zone ``j``, ordered and disjoint.
    ``counts[j]`` is the number of confirmed transitions into zone ``j`` and
    always equals ``len(segments[j])``. ``frequencies`` is ``counts`` divided
    by the window duration in seconds.
    """

    segments: tuple[tuple[tuple[int, int], ...], ...]
    counts: np.ndarray
    frequencies: np.ndarray
    n_frames: int
    fps: int

    def __post_init__(self) -> None:
        for arr_name in ("counts", "frequencies"):
            arr = np.asarray(getattr(self, arr_name))
            if arr.flags.writeable:
                arr = arr.copy()
                arr.setflags(write=False)
            object.__setattr__(self, arr_name, arr)

    def durations(self) -> np.ndarray:
        """Longest confirmed glance per zone in seconds; 0 where none."""
        out = np.zeros(N_ZONES)
        for j, segs in enumerate(self.segments):
            if segs:
                out[j] = max(end - start + 1 for start, end in segs) / self.fps
        return out


def gaze_accumulation(window: Scanpath) -> np.ndarray:
    """Fraction of window frames spent in each canonical zone.

    Unknown frames stay in the denominator but feed no entry, so the vector
    sums to ``1 - unknown_count / n_frames``.
    """
    codes = window.codes
    if codes.size < 1:
        raise ValueError("gaze accumulation requires a non-empty window")
    counts = np.bincount(codes, minlength=N_ZONES + 1)
    return counts[:N_ZONES] / codes.size


def glance_frequency_noise_free(window: Scanpath) -> np.ndarray:
    """Transitions into each zone per second, assuming noise-free labels.

    A frame counts when its zone differs from the previous frame's; the
    window's initial run is never counted. Requires at least two frames.
    """
    codes = window.codes
    if codes.size < 2:
        raise ValueError(
            f"glance frequency requires at least 2 frames, got {codes.size}"
        )
    entered = codes[1:][codes[1:] != codes[:-1]]
    counts = np.bincount(entered, minlength=N_ZONES + 1)
    return counts[:N_ZONES] / window.duration


def glance_segments_robust(window: Scanpath, debounce_w: int) -> GlanceSegments:
    """Debounced glance segmentation of a (possibly noisy) window.

    Scanning frames after the first ``debounce_w``, a transition into the
    current frame's zone is confirmed when that zone differs from the last
    confirmed zone and holds a strict majority of the ``debounce_w``
    immediately preceding frames. Confirmation opens a segment at the current
    frame and closes the previously open one at the frame before; the final
    open segment closes at the window end. The stretch before the first
    confirmed transition is not recorded, which keeps segment counts equal to
    confirmed-transition counts.
    """
    codes = window.codes
    n = codes.size
    w = int(debounce_w)
    if w < 1:
        raise ValueError(f"debounce window must be >= 1, got {debounce_w}")
    if w >= n:
        raise ValueError(
            f"debounce window ({w}) must be smaller than the frame count ({n})"
        )
    # index 9 tracks Unknown internally; it is dropped from the outputs
    counts = np.zeros(N_ZONES + 1, dtype=np.int64)
    segments: list[list[tuple[int, int]]] = [[] for _ in range(N_ZONES + 1)]
    last = int(codes[0])
    open_code = -1
    open_start = 0
    need = w // 2 + 1  # smallest integer strictly greater than w/2
    for i in range(w, n):
        gi = int(codes[i])
        if gi == last:
            continue
        if int(np.count_nonzero(codes[i - w:i] == gi)) >= need:
            counts[gi] += 1
            last = gi
            if open_code >= 0:
                segments[open_code].append((open_start, i - 1))
            open_code = gi
            open_start = i
    if open_code >= 0:
        segments[open_code].append((open_start, n - 1))
    return GlanceSegments(
        segments=tuple(tuple(segments[j]) for j in range(N_ZONES)),
        counts=counts[:N_ZONES],
        frequencies=counts[:N_ZONES] / window.duration,
        n_frames=n,
        fps=window.fps,
    )


def glance_frequency(window: Scanpath, debounce_w: int) -> np.ndarray:
    """Confirmed transitions into each zone per second (debounced)."""
    return glance_segments_robust(window, debounce_w).frequencies


def glance_duration(window: Scanpath, debounce_w: int) -> np.ndarray:
    """Longest confirmed glance per zone in seconds (debounced).

    Segment length is inclusive: ``(end - start + 1) / fps``.
    """
    return glance_segments_robust(window, debounce_w).durations()


def assemble_features(
    scanpath: Scanpath,
    config: FeatureConfig,
    window: tuple[int, int] | None = None,
) -> GlanceFeatureVector:
    """Build the feature vector for one window under ``config``.

    ``window`` is a [start, end) frame span inside ``scanpath``; by default
    the whole scanpath is used. The span must contain exactly
    ``round(window_seconds * fps)`` frames.
    """
    if window is None:
        window = (0, scanpath.n_frames)
    start, end = window
    expected = config.window_frames(scanpath.fps)
    if end - start != expected:
        raise ValueError(
            f"window [{start}, {end}) spans {end - start} frames but config "
            f"requires {expected} (= round({config.window_seconds} s x "
            f"{scanpath.fps} fps))"
        )
    view = scanpath.window(start, end)
    if config.mode is FeatureMode.GA:
        values = gaze_accumulation(view)
    elif config.mode is FeatureMode.GD:
        values = glance_duration(view, config.debounce_w)
    else:
        segs = glance_segments_robust(view, config.debounce_w)
        values = np.concatenate([segs.durations(), segs.frequencies])
    return GlanceFeatureVector(
        values=values,
        config=config,
        window=(start, end),
        source=(scanpath.driver_id, scanpath.drive_id),
    )
