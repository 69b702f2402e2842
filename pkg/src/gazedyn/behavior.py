"""Per-maneuver gaze-behavior models and fitness scoring.

Each maneuver is modeled by the mean and covariance of its training feature
vectors. A test vector is scored with the unnormalized multivariate-normal
fitness exp(-0.5 * squared Mahalanobis distance), which lies in (0, 1] and
equals 1 exactly at the mean. Classification picks the model with the highest
fitness, i.e. the smallest squared Mahalanobis distance; the comparison is
done on distances so that far-away vectors (where the exponential underflows)
are still ordered correctly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg

from .core import (
    FeatureConfig,
    GlanceFeatureVector,
    Maneuver,
    maneuver_rank,
)


@dataclass(eq=False)
class BehaviorModel:
    """Mean/covariance gaze-behavior model for one maneuver.

    ``ridge_epsilon`` scales a trace-proportional identity ridge that is added
    to the covariance at solve time only, keeping near-singular sample
    covariances scorable. Instances are immutable by convention; the arrays
    are read-only.
    """

    label: Maneuver
    mean: np.ndarray
    covariance: np.ndarray
    ridge_epsilon: float
    config: FeatureConfig
    _cho: tuple | None = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        mean = np.asarray(self.mean, dtype=np.float64)
        cov = np.asarray(self.covariance, dtype=np.float64)
        if mean.ndim != 1:
            raise ValueError("model mean must be a 1-D vector")
        d = mean.size
        if cov.shape != (d, d):
            raise ValueError(f"covariance must be ({d}, {d}), got {cov.shape}")
        if d != self.config.feature_dim:
            raise ValueError(
                f"model dimension {d} does not match mode "
                f"{self.config.mode.value} ({self.config.feature_dim})"
            )
        if not np.allclose(cov, cov.T, rtol=0.0, atol=1e-9):
            raise ValueError("covariance must be symmetric")
        if self.ridge_epsilon < 0:
            raise ValueError("ridge_epsilon must be >= 0")
        for name, arr in (("mean", mean), ("covariance", cov)):
            if arr.flags.writeable:
                arr = arr.copy()
                arr.setflags(write=False)
            self.__dict__[name] = arr
        self.ridge_epsilon = float(self.ridge_epsilon)

    @property
    def dim(self) -> int:
        return int(self.mean.size)

    def regularized_covariance(self) -> np.ndarray:
        """Covariance plus the trace-scaled identity ridge."""
        d = self.dim
        trace = float(np.trace(self.covariance))
        scale = trace / d if trace != 0.0 else 1.0
        return self.covariance + self.ridge_epsilon * scale * np.eye(d)

    def _factor(self) -> tuple:
        if self._cho is None:
            reg = self.regularized_covariance()
            try:
                self.__dict__["_cho"] = scipy.linalg.cho_factor(reg, lower=True)
            except np.linalg.LinAlgError as exc:
                eigs = np.linalg.eigvalsh(reg)
                raise ValueError(
                    f"regularized covariance for {self.label.value} is not "
                    f"positive definite (eigenvalues in [{eigs.min():.3e}, "
                    f"{eigs.max():.3e}], ridge_epsilon={self.ridge_epsilon})"
                ) from exc
        return self._cho


def fit_behavior_model(
    samples: Sequence[GlanceFeatureVector],
    label: Maneuver,
    ridge_epsilon: float | None = None,
) -> BehaviorModel:
    """Fit a model from training feature vectors.

    Requires at least two samples sharing one feature config. The covariance
    uses the unbiased n-1 denominator. ``ridge_epsilon`` defaults to the
    samples' config value and is only applied when the model is scored.
    """
    if len(samples) < 2:
        raise ValueError(
            f"fitting {label.value} requires at least 2 samples, got {len(samples)}"
        )
    config = samples[0].config
    for s in samples[1:]:
        if s.config != config:
            raise ValueError("training samples mix different feature configs")
    x = np.stack([s.values for s in samples])
    mean = x.mean(axis=0)
    cov = np.cov(x, rowvar=False, ddof=1)
    cov = np.atleast_2d(cov)
    if ridge_epsilon is None:
        ridge_epsilon = config.ridge_epsilon
    return BehaviorModel(
        label=label,
        mean=mean,
        covariance=cov,
        ridge_epsilon=ridge_epsilon,
        config=config,
    )


def _check_compatible(h: GlanceFeatureVector, model: BehaviorModel) -> None:
    if h.dim != model.dim:
        raise ValueError(
            f"feature vector has dimension {h.dim}, model expects {model.dim}"
        )
    if h.config.descriptor_signature() != model.config.descriptor_signature():
        raise ValueError(
            f"feature config mismatch: vector computed with "
            f"(mode={h.config.mode.value}, window={h.config.window_seconds}, "
            f"debounce_w={h.config.debounce_w}) but model fitted with "
            f"(mode={model.config.mode.value}, window={model.config.window_seconds}, "
            f"debounce_w={model.config.debounce_w})"
        )


def mahalanobis_sq(h: GlanceFeatureVector, model: BehaviorModel) -> float:
    """Squared Mahalanobis distance of ``h`` from the model mean.

    Computed through a symmetric positive-definite solve of the regularized
    covariance; the covariance is never inverted explicitly.
    """
    _check_compatible(h, model)
    diff = h.values - model.mean
    solved = scipy.linalg.cho_solve(model._factor(), diff)
    return max(float(diff @ solved), 0.0)


def fitness(h: GlanceFeatureVector, model: BehaviorModel) -> float:
    """Unnormalized MVN fitness exp(-0.5 * mahalanobis_sq), in (0, 1]."""
    return math.exp(-0.5 * mahalanobis_sq(h, model))


def classify(
    h: GlanceFeatureVector, models: Sequence[BehaviorModel]
) -> tuple[Maneuver, list[float]]:
    """Label ``h`` with the best-fitting model.

    Returns the winning label and the fitness score per model (aligned with
    ``models``). The winner maximizes fitness, equivalently minimizes the
    squared Mahalanobis distance; exact ties break toward the canonical
    maneuver order LeftLaneChange < RightLaneChange < LaneKeeping.
    """
    if not models:
        raise ValueError("classify requires at least one model")
    distances = [mahalanobis_sq(h, m) for m in models]
    best = min(
        range(len(models)),
        key=lambda i: (distances[i], maneuver_rank(models[i].label), i),
    )
    scores = [math.exp(-0.5 * d) for d in distances]
    return models[best].label, scores
