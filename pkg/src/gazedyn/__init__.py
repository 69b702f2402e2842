"""Gaze-zone scanpath analytics.

Descriptors (gaze accumulation, glance duration, glance frequency) over
frame-rate gaze-zone label streams, per-maneuver multivariate-normal behavior
models, a sliding-window lane-change prediction protocol with
leave-one-driver-out cross-validation, and a synthetic corpus generator.
"""

__version__ = "0.1.0"

from .core import (
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
    parse_zone_label,
)
from .behavior import BehaviorModel, classify, fit_behavior_model, fitness, mahalanobis_sq
from .features import (
    GlanceSegments,
    assemble_features,
    gaze_accumulation,
    glance_duration,
    glance_frequency,
    glance_frequency_noise_free,
    glance_segments_robust,
)

__all__ = [
    "__version__",
    "BehaviorModel",
    "Corpus",
    "DriveRecord",
    "FeatureConfig",
    "FeatureMode",
    "GazeZone",
    "GlanceFeatureVector",
    "GlanceSegments",
    "Maneuver",
    "ManeuverEvent",
    "Scanpath",
    "ZoneLabelError",
    "assemble_features",
    "canonical_zone_order",
    "classify",
    "fit_behavior_model",
    "fitness",
    "gaze_accumulation",
    "glance_duration",
    "glance_frequency",
    "glance_frequency_noise_free",
    "glance_segments_robust",
    "mahalanobis_sq",
    "parse_zone_label",
]
