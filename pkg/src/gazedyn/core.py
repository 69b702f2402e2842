"""Canonical domain types shared across the package.

Gaze zones, scanpaths, maneuver events, feature configuration, and corpus
containers. Everything here is immutable after construction and safe to share
across threads.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Iterator, Optional

import numpy as np


class ZoneLabelError(ValueError):
    """Raised when a gaze-zone label cannot be parsed."""


class GazeZone(Enum):
    """In-cabin gaze regions.

    The nine canonical zones form the descriptor space. UNKNOWN is a sentinel
    for frames that cannot be attributed to a zone (annotators use it during
    transitions); it is never part of the canonical set and never receives a
    descriptor entry.
    """

    FRONT = "Front"
    RIGHT = "Right"
    LEFT = "Left"
    CENTER_STACK = "CenterStack"
    REARVIEW = "Rearview"
    SPEEDOMETER = "Speedometer"
    LEFT_SHOULDER = "LeftShoulder"
    RIGHT_WINDSHIELD = "RightWindshield"
    EYES_CLOSED = "EyesClosed"
    UNKNOWN = "Unknown"


_ALL_ZONES: tuple[GazeZone, ...] = tuple(GazeZone)
_CANONICAL_ZONES: tuple[GazeZone, ...] = _ALL_ZONES[:9]

N_ZONES = 9
UNKNOWN_CODE = 9

_CODE_BY_ZONE = {zone: code for code, zone in enumerate(_ALL_ZONES)}
_NORMALIZED_LABELS = {
    re.sub(r"[\s_]+", "", zone.value).lower(): zone for zone in _ALL_ZONES
}


def canonical_zone_order() -> tuple[GazeZone, ...]:
    """The fixed ordering of the nine gaze zones.

    Descriptor entry ``j`` always refers to ``canonical_zone_order()[j]``.
    """
    return _CANONICAL_ZONES


def zone_code(zone: GazeZone) -> int:
    """Integer code of a zone: canonical index 0..8, UNKNOWN -> 9."""
    return _CODE_BY_ZONE[zone]


def zone_from_code(code: int) -> GazeZone:
    if not 0 <= code <= UNKNOWN_CODE:
        raise ValueError(f"zone code out of range: {code}")
    return _ALL_ZONES[code]


def parse_zone_label(text: str) -> GazeZone:
    """Parse a zone label, tolerating case, whitespace and underscores.

    ``"center_stack"`` and ``"Center Stack"`` both map to CENTER_STACK;
    ``"unknown"`` maps to the UNKNOWN sentinel. Unrecognized labels raise
    :class:`ZoneLabelError` naming the offending token.
    """
    if not isinstance(text, str):
        raise ZoneLabelError(f"gaze zone label must be a string, got {type(text).__name__}")
    key = re.sub(r"[\s_]+", "", text).lower()
    zone = _NORMALIZED_LABELS.get(key)
    if zone is None:
        raise ZoneLabelError(f"unrecognized gaze zone label: {text!r}")
    return zone


class Maneuver(Enum):
    """Driving behaviors modeled by the package, in canonical (tie-break) order."""

    LEFT_LANE_CHANGE = "LeftLaneChange"
    RIGHT_LANE_CHANGE = "RightLaneChange"
    LANE_KEEPING = "LaneKeeping"


MANEUVERS: tuple[Maneuver, ...] = tuple(Maneuver)
_MANEUVER_RANK = {kind: rank for rank, kind in enumerate(MANEUVERS)}


def maneuver_rank(kind: Maneuver) -> int:
    """Position of a maneuver in the canonical order (used for tie-breaks)."""
    return _MANEUVER_RANK[kind]


def parse_maneuver(text: str) -> Maneuver:
    for kind in MANEUVERS:
        if kind.value == text:
            return kind
    raise ValueError(f"unrecognized maneuver kind: {text!r}")


@dataclass(frozen=True, eq=False)
class Scanpath:
    """A frame-rate sequence of gaze-zone labels.

    Labels are stored as an immutable int8 code array (0..8 canonical zones,
    9 = UNKNOWN); see :func:`zone_code`. ``duration`` is ``n_frames / fps``
    seconds.
    """

    codes: np.ndarray
    fps: int
    driver_id: str = ""
    drive_id: str = ""

    def __post_init__(self) -> None:
        arr = np.asarray(self.codes, dtype=np.int8)
        if arr.ndim != 1:
            raise ValueError("scanpath codes must be a 1-D sequence")
        if arr.size < 1:
            raise ValueError("scanpath must contain at least one frame")
        if int(arr.min()) < 0 or int(arr.max()) > UNKNOWN_CODE:
            raise ValueError("scanpath codes must be in 0..9 (9 = Unknown)")
        if arr.flags.writeable:
            if arr is self.codes or arr.base is self.codes:
                arr = arr.copy()
            arr.setflags(write=False)
        object.__setattr__(self, "codes", arr)
        if not isinstance(self.fps, (int, np.integer)) or isinstance(self.fps, bool):
            raise ValueError("fps must be a positive integer")
        if self.fps <= 0:
            raise ValueError(f"fps must be positive, got {self.fps}")
        object.__setattr__(self, "fps", int(self.fps))

    @classmethod
    def from_zones(
        cls,
        zones: Iterable[GazeZone],
        fps: int,
        driver_id: str = "",
        drive_id: str = "",
    ) -> "Scanpath":
        codes = np.fromiter((zone_code(z) for z in zones), dtype=np.int8)
        return cls(codes, fps, driver_id, drive_id)

    @property
    def n_frames(self) -> int:
        return int(self.codes.size)

    def __len__(self) -> int:
        return self.n_frames

    @property
    def duration(self) -> float:
        """Length in seconds (n_frames / fps)."""
        return self.codes.size / self.fps

    @property
    def zones(self) -> tuple[GazeZone, ...]:
        return tuple(_ALL_ZONES[c] for c in self.codes)

    @property
    def unknown_count(self) -> int:
        return int(np.count_nonzero(self.codes == UNKNOWN_CODE))

    def window(self, start: int, end: int) -> "Scanpath":
        """The [start, end) frame slice as a new scanpath (shares storage)."""
        if not 0 <= start < end <= self.codes.size:
            raise ValueError(
                f"window [{start}, {end}) out of bounds for scanpath of "
                f"{self.codes.size} frames"
            )
        return Scanpath(self.codes[start:end], self.fps, self.driver_id, self.drive_id)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Scanpath):
            return NotImplemented
        return (
            self.fps == other.fps
            and self.driver_id == other.driver_id
            and self.drive_id == other.drive_id
            and np.array_equal(self.codes, other.codes)
        )

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        return (
            f"Scanpath(n_frames={self.n_frames}, fps={self.fps}, "
            f"driver_id={self.driver_id!r}, drive_id={self.drive_id!r})"
        )


@dataclass(frozen=True)
class ManeuverEvent:
    """A labeled maneuver anchored in a drive.

    Lane changes carry ``syncf_frame``, the frame where the tire touches the
    lane marking. Lane-keeping events carry a [start, end) frame ``segment``
    instead; segments must span exactly 5 seconds at the drive's frame rate
    (validated wherever the fps is known).
    """

    kind: Maneuver
    syncf_frame: Optional[int] = None
    segment: Optional[tuple[int, int]] = None

    def __post_init__(self) -> None:
        if self.kind is Maneuver.LANE_KEEPING:
            if self.segment is None or self.syncf_frame is not None:
                raise ValueError("lane-keeping events need a segment and no syncf_frame")
            start, end = self.segment
            start, end = int(start), int(end)
            if start < 0 or end <= start:
                raise ValueError(f"invalid lane-keeping segment [{start}, {end})")
            object.__setattr__(self, "segment", (start, end))
        else:
            if self.syncf_frame is None or self.segment is not None:
                raise ValueError(
                    f"{self.kind.value} events need a syncf_frame and no segment"
                )
            if self.syncf_frame < 0:
                raise ValueError(f"syncf_frame must be >= 0, got {self.syncf_frame}")
            object.__setattr__(self, "syncf_frame", int(self.syncf_frame))

    def describe(self) -> str:
        if self.kind is Maneuver.LANE_KEEPING:
            start, end = self.segment  # type: ignore[misc]
            return f"{self.kind.value}[{start},{end})"
        return f"{self.kind.value}@{self.syncf_frame}"


class FeatureMode(Enum):
    """Which descriptors make up a feature vector."""

    GA = "GA"          # gaze accumulation, 9 entries
    GD = "GD"          # glance duration, 9 entries
    GD_GF = "GD_GF"    # glance duration then glance frequency, 18 entries

    @property
    def dim(self) -> int:
        return 18 if self is FeatureMode.GD_GF else 9


@dataclass(frozen=True)
class FeatureConfig:
    """How feature vectors are computed from a scanpath window."""

    mode: FeatureMode = FeatureMode.GA
    window_seconds: float = 5.0
    debounce_w: int = 6
    ridge_epsilon: float = 1e-6

    def __post_init__(self) -> None:
        if not self.window_seconds > 0:
            raise ValueError(f"window_seconds must be positive, got {self.window_seconds}")
        if not isinstance(self.debounce_w, (int, np.integer)) or self.debounce_w < 1:
            raise ValueError(f"debounce_w must be a positive integer, got {self.debounce_w}")
        if self.ridge_epsilon < 0:
            raise ValueError(f"ridge_epsilon must be >= 0, got {self.ridge_epsilon}")
        object.__setattr__(self, "window_seconds", float(self.window_seconds))
        object.__setattr__(self, "debounce_w", int(self.debounce_w))
        object.__setattr__(self, "ridge_epsilon", float(self.ridge_epsilon))

    @property
    def feature_dim(self) -> int:
        return self.mode.dim

    def window_frames(self, fps: int) -> int:
        n = round(self.window_seconds * fps)
        if n < 1:
            raise ValueError(
                f"window of {self.window_seconds} s spans no frames at {fps} fps"
            )
        return n

    def descriptor_signature(self) -> tuple:
        """The fields that must match for features to be comparable."""
        return (self.mode, self.window_seconds, self.debounce_w)


@dataclass(frozen=True, eq=False)
class GlanceFeatureVector:
    """A descriptor vector for one scanpath window.

    ``values`` is ordered by canonical zone index; in GD_GF mode the glance
    frequency block follows the glance duration block. ``window`` is the
    [start, end) frame span inside the source scanpath and ``source`` is its
    (driver_id, drive_id) identity.
    """

    values: np.ndarray
    config: FeatureConfig
    window: tuple[int, int]
    source: tuple[str, str] = ("", "")

    def __post_init__(self) -> None:
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 1:
            raise ValueError("feature values must be a 1-D vector")
        if arr.size != self.config.feature_dim:
            raise ValueError(
                f"feature vector has {arr.size} entries but mode "
                f"{self.config.mode.value} requires {self.config.feature_dim}"
            )
        if arr.flags.writeable:
            arr = arr.copy()
            arr.setflags(write=False)
        object.__setattr__(self, "values", arr)
        start, end = self.window
        object.__setattr__(self, "window", (int(start), int(end)))

    @property
    def dim(self) -> int:
        return int(self.values.size)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GlanceFeatureVector):
            return NotImplemented
        return (
            self.config == other.config
            and self.window == other.window
            and self.source == other.source
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True, eq=False)
class DriveRecord:
    """One drive: an estimated scanpath, its events, and optionally the
    ground-truth (annotated) scanpath aligned frame-for-frame."""

    scanpath: Scanpath
    events: tuple[ManeuverEvent, ...] = ()
    truth: Optional[Scanpath] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "events", tuple(self.events))
        if self.truth is not None:
            if self.truth.fps != self.scanpath.fps:
                raise ValueError("truth scanpath fps differs from estimated scanpath")
            if self.truth.n_frames != self.scanpath.n_frames:
                raise ValueError(
                    f"truth scanpath has {self.truth.n_frames} frames, "
                    f"estimated has {self.scanpath.n_frames}"
                )
        n = self.scanpath.n_frames
        fps = self.scanpath.fps
        lk_spans = []
        for event in self.events:
            if event.kind is Maneuver.LANE_KEEPING:
                start, end = event.segment  # type: ignore[misc]
                if end > n:
                    raise ValueError(f"event {event.describe()} extends past drive end ({n})")
                if end - start != 5 * fps:
                    raise ValueError(
                        f"lane-keeping segment must span exactly 5 s "
                        f"({5 * fps} frames at {fps} fps), got {end - start}"
                    )
                lk_spans.append((start, end))
            else:
                if event.syncf_frame > n:  # type: ignore[operator]
                    raise ValueError(f"event {event.describe()} lies past drive end ({n})")
        lk_spans.sort()
        for (s0, e0), (s1, _) in zip(lk_spans, lk_spans[1:]):
            if s1 < e0:
                raise ValueError("lane-keeping segments overlap within the drive")

    @property
    def driver_id(self) -> str:
        return self.scanpath.driver_id

    @property
    def drive_id(self) -> str:
        return self.scanpath.drive_id


@dataclass(frozen=True, eq=False)
class Corpus:
    """A multi-driver collection of drives."""

    drives: tuple[DriveRecord, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "drives", tuple(self.drives))
        seen = set()
        for drive in self.drives:
            key = (drive.driver_id, drive.drive_id)
            if key in seen:
                raise ValueError(f"duplicate drive identity {key}")
            seen.add(key)

    def driver_ids(self) -> tuple[str, ...]:
        return tuple(sorted({d.driver_id for d in self.drives}))

    def iter_events(
        self, kind: Optional[Maneuver] = None
    ) -> Iterator[tuple[DriveRecord, ManeuverEvent]]:
        for drive in self.drives:
            for event in drive.events:
                if kind is None or event.kind is kind:
                    yield drive, event

    def event_counts(self) -> dict[Maneuver, int]:
        counts = {kind: 0 for kind in MANEUVERS}
        for _, event in self.iter_events():
            counts[event.kind] += 1
        return counts
