from typing import Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, Field, field_validator

from facedyn.schemas.ingest import AuRecording, ManifestEntry

# Planted basis: rows follow AU_NAMES, columns are brow / smile / chin components.
DEFAULT_BASIS = [
    [1.00, 0.05, 0.05],  # AU01
    [0.85, 0.00, 0.05],  # AU02
    [0.30, 0.00, 0.20],  # AU04
    [0.45, 0.05, 0.00],  # AU05
    [0.05, 0.80, 0.00],  # AU06
    [0.10, 0.35, 0.15],  # AU07
    [0.05, 0.10, 0.25],  # AU09
    [0.00, 0.30, 0.20],  # AU10
    [0.00, 1.00, 0.05],  # AU12
    [0.05, 0.40, 0.20],  # AU14
    [0.05, 0.00, 0.60],  # AU15
    [0.00, 0.05, 1.00],  # AU17
    [0.10, 0.15, 0.30],  # AU20
    [0.05, 0.00, 0.55],  # AU23
    [0.00, 0.60, 0.30],  # AU25
    [0.05, 0.35, 0.10],  # AU26
    [0.20, 0.10, 0.10],  # AU45
]


class ActivationDynamics(BaseModel):
    ar_coef: float = Field(0.9, gt=-1, lt=1)
    innovation_sd: float = Field(0.35, gt=0)
    smoothing_window: int = Field(6, ge=1)
    baseline: float = 0.0


class BurstConfig(BaseModel):
    rate: float = Field(2.0, ge=0)  # expected bursts per video
    amplitude: float = Field(2.0, gt=0)
    duration_mean: float = Field(30.0, gt=0)  # frames
    duration_sd: float = Field(8.0, gt=0)


class DegradationConfig(BaseModel):
    jitter_sd: float = Field(0.12, ge=0)
    kl_shift_prob: float = Field(0.3, ge=0, le=1)
    kl_shift_size: float = Field(0.8, ge=0)
    scope: Literal["all", "bursts"] = "all"
    lowpass_window: int = Field(24, ge=2)


class SynthProfile(BaseModel):
    basis: list[list[float]] = Field(default_factory=lambda: [row[:] for row in DEFAULT_BASIS])
    dynamics: list[ActivationDynamics] = Field(
        default_factory=lambda: [ActivationDynamics(), ActivationDynamics(), ActivationDynamics(ar_coef=0.85)]
    )
    bursts: BurstConfig = BurstConfig()
    degradation: DegradationConfig = DegradationConfig()
    observation_sd: float = Field(0.01, gt=0)
    emotive_fraction: float = Field(0.6, ge=0, le=1)
    positive_share: float = Field(0.67, ge=0, le=1)
    low_quality_fraction: float = Field(0.0, ge=0, le=1)
    n_pairs: int = Field(250, ge=2)
    n_frames: int = Field(241, ge=64)
    fps: float = Field(24.0, gt=0)
    seed: int = 7

    @field_validator("basis")
    @classmethod
    def _non_negative(cls, v: list[list[float]]) -> list[list[float]]:
        arr = np.asarray(v, dtype=float)
        if arr.ndim != 2 or arr.shape[0] != 17:
            raise ValueError("basis must be a 17 × k matrix")
        if np.any(arr < 0):
            raise ValueError("basis must be non-negative")
        return v

    @property
    def rank(self) -> int:
        return len(self.basis[0])

    def basis_array(self) -> np.ndarray:
        return np.asarray(self.basis, dtype=float)


class FeatureLinkedRaters(BaseModel):
    kind: Literal["feature-linked"] = "feature-linked"
    feature: str
    weight: float = 2.0


class RandomRaters(BaseModel):
    kind: Literal["random"] = "random"
    bias: float = Field(0.5, ge=0, le=1)


HumanModel = Union[FeatureLinkedRaters, RandomRaters]


class SyntheticDataset(BaseModel):
    """Generated recordings plus manifest rows, in the same shape as ingested data."""

    recordings: list[AuRecording]
    manifest: list[ManifestEntry]
    profile: SynthProfile
    low_quality: list[str] = []

    def recording(self, video_id: str):
        return next(r for r in self.recordings if r.video_id == video_id)


def default_profile(n_pairs: Optional[int] = None, **updates) -> SynthProfile:
    profile = SynthProfile()
    if n_pairs is not None:
        updates["n_pairs"] = n_pairs
    return profile.model_copy(update=updates)
