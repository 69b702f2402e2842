"""Pydantic request/response models for the HTTP service."""

from __future__ import annotations

from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, Field, field_validator

from ..core import Scanpath, parse_zone_label, zone_code
from ..pipeline import build_feature_config, parse_mode


class FeatureParams(BaseModel):
    """Feature-extraction knobs; validated before any computation starts."""

    mode: str = "ga"
    window_seconds: float = Field(5.0, gt=0)
    debounce_w: int = Field(6, ge=1)
    ridge_epsilon: float = Field(1e-6, ge=0)

    @field_validator("mode")
    @classmethod
    def _known_mode(cls, v: str) -> str:
        parse_mode(v)
        return v

    def to_config(self):
        return build_feature_config(
            self.mode, self.window_seconds, self.debounce_w, self.ridge_epsilon
        )


class ScanpathPayload(BaseModel):
    """An inline scanpath: canonical zone labels at a fixed frame rate."""

    fps: int = Field(gt=0)
    zones: list[str] = Field(min_length=1)
    driver_id: str = ""
    drive_id: str = ""

    def to_scanpath(self) -> Scanpath:
        codes = np.fromiter(
            (zone_code(parse_zone_label(z)) for z in self.zones), dtype=np.int8
        )
        return Scanpath(codes, self.fps, self.driver_id, self.drive_id)


class SynthRequest(BaseModel):
    out_dir: str
    seed: int = Field(0, ge=0)
    drivers: int = Field(7, ge=1)
    fps: int = Field(30, gt=0)
    noise: str = "default"
    templates_path: Optional[str] = None
    counts: Optional[list[tuple[int, int, int]]] = None


class SynthResponse(BaseModel):
    manifest: str
    drivers: int
    drives: int
    events: dict[str, int]
    resolved_config: dict


class ExtractRequest(BaseModel):
    features: FeatureParams = FeatureParams()
    scanpath_path: Optional[str] = None
    scanpath: Optional[ScanpathPayload] = None
    stride_frames: int = Field(1, ge=1)
    out_path: Optional[str] = None


class FeatureWindow(BaseModel):
    window: tuple[int, int]
    values: list[float]


class ExtractResponse(BaseModel):
    n_windows: int
    dim: int
    out_path: Optional[str]
    features: list[FeatureWindow]
    resolved_config: dict


class FitRequest(BaseModel):
    manifest: str
    out_path: str
    features: FeatureParams = FeatureParams()
    lc_source: Literal["annotated", "estimated"] = "annotated"
    lk_source: Literal["annotated", "estimated"] = "estimated"


class FitResponse(BaseModel):
    model_path: str
    classes: dict[str, int]
    dim: int
    resolved_config: dict


class PredictRequest(BaseModel):
    model_path: str
    scanpath_path: Optional[str] = None
    scanpath: Optional[ScanpathPayload] = None
    stride_frames: int = Field(1, ge=1)
    out_path: Optional[str] = None


class PredictionRow(BaseModel):
    end_frame: int
    t_end_seconds: float
    predicted: str
    scores: list[float]


class PredictResponse(BaseModel):
    n_windows: int
    out_path: Optional[str]
    model_labels: list[str]
    predictions: list[PredictionRow]
    resolved_config: dict


class EvalCvRequest(BaseModel):
    manifest: str
    out_dir: str
    features: FeatureParams = FeatureParams()
    lc_source: Literal["annotated", "estimated"] = "annotated"
    lk_source: Literal["annotated", "estimated"] = "estimated"
    sweep_seconds: float = Field(5.0, gt=0)
    max_workers: Optional[int] = Field(None, ge=1)


class EvalModelRequest(BaseModel):
    manifest: str
    model_path: str
    out_dir: str
    sweep_seconds: float = Field(5.0, gt=0)
    max_workers: Optional[int] = Field(None, ge=1)


class EvalResponse(BaseModel):
    out_dir: str
    files: list[str]
    recall: dict[str, dict[str, Optional[float]]]
    decision_weighted_accuracy: float
    resolved_config: dict
    folds: Optional[int] = None


class GazeQualityRequest(BaseModel):
    manifest: str
    out_dir: str
    window_seconds: float = Field(5.0, gt=0)
    stride_seconds: float = Field(1.0, gt=0)


class GazeQualityResponse(BaseModel):
    out_dir: str
    files: list[str]
    n_windows: int
    n_pairs: int
    zone_weighted_accuracy: float
    resolved_config: dict


class HealthResponse(BaseModel):
    status: str
    version: str


class ZonesResponse(BaseModel):
    zones: list[str]
    unknown: str
