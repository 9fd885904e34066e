from enum import Enum
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

AU_NAMES = [
    "AU01", "AU02", "AU04", "AU05", "AU06", "AU07", "AU09", "AU10", "AU12",
    "AU14", "AU15", "AU17", "AU20", "AU23", "AU25", "AU26", "AU45",
]  # fmt: skip
AU_COLUMNS = [f"{au}_r" for au in AU_NAMES]
META_COLUMNS = ["frame", "timestamp", "confidence", "success"]
MANIFEST_COLUMNS = ["video_id", "path", "label", "pair_id", "scene_keywords"]
DEFAULT_FPS = 24.0
N_FRAMES = 241


class Label(str, Enum):
    real = "real"
    fake = "fake"


class EmotionFlag(str, Enum):
    yes = "yes"
    no = "no"


class Valence(str, Enum):
    positive = "positive"
    neutral = "neutral"
    negative = "negative"


class FrameSample(BaseModel):
    frame_index: int = Field(..., ge=0)
    timestamp: float = Field(..., ge=0)
    confidence: float = Field(..., ge=0, le=1)
    success: bool
    au: list[float] = Field(..., min_length=17, max_length=17)

    @field_validator("au")
    @classmethod
    def _finite(cls, v: list[float]) -> list[float]:
        if not all(np.isfinite(v)):
            raise ValueError("AU intensities must be finite")
        return v


class AuFrames(BaseModel):
    """Per-frame AU intensities of one video, columns ordered as AU_NAMES."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    frame_index: np.ndarray
    timestamp: np.ndarray
    confidence: np.ndarray
    success: np.ndarray
    au: np.ndarray

    @model_validator(mode="after")
    def _check(self):
        n = len(self.frame_index)
        if self.au.shape != (n, len(AU_NAMES)):
            raise ValueError(f"au matrix must be ({n}, {len(AU_NAMES)}), got {self.au.shape}")
        if n > 1 and np.any(np.diff(self.frame_index) <= 0):
            raise ValueError("frame_index must be strictly increasing")
        if not np.all(np.isfinite(self.au)):
            raise ValueError("AU intensities must be finite")
        if np.any((self.confidence < 0) | (self.confidence > 1)):
            raise ValueError("confidence must lie in [0, 1]")
        return self

    @property
    def n_frames(self) -> int:
        return len(self.frame_index)

    def frame(self, i: int) -> FrameSample:
        return FrameSample(
            frame_index=int(self.frame_index[i]),
            timestamp=float(self.timestamp[i]),
            confidence=float(self.confidence[i]),
            success=bool(self.success[i]),
            au=self.au[i].tolist(),
        )

    def series(self, au: str) -> np.ndarray:
        return self.au[:, AU_NAMES.index(au)]


class AuRecording(AuFrames):
    video_id: str
    label: Label
    pair_id: str
    emotion_flag: EmotionFlag = EmotionFlag.no
    valence: Valence = Valence.neutral
    fps: float = DEFAULT_FPS

    @classmethod
    def from_frames(cls, frames: AuFrames, entry: "ManifestEntry", fps: float = DEFAULT_FPS) -> "AuRecording":
        return cls(
            **frames.model_dump(),
            video_id=entry.video_id,
            label=entry.label,
            pair_id=entry.pair_id,
            emotion_flag=entry.emotion_flag,
            valence=entry.valence,
            fps=fps,
        )

    def with_au(self, au: np.ndarray, n: Optional[int] = None) -> "AuRecording":
        """Copy with a replaced AU matrix, keeping the first `n` frames of the metadata columns."""
        n = len(au) if n is None else n
        return self.model_copy(
            update={
                "frame_index": self.frame_index[:n],
                "timestamp": self.timestamp[:n],
                "confidence": self.confidence[:n],
                "success": self.success[:n],
                "au": au,
            }
        )


class ManifestEntry(BaseModel):
    video_id: str
    path: str
    label: Label
    pair_id: str
    scene_keywords: str = ""
    emotion_flag: EmotionFlag = EmotionFlag.no
    valence: Valence = Valence.neutral


class NormalizationParams(BaseModel):
    global_min_z: float


class QualityReport(BaseModel):
    kept: list[str]
    excluded: dict[str, str]


class SplitAssignment(BaseModel):
    assignment: dict[str, Literal["train", "test"]]
    ratio: float = Field(..., gt=0, lt=1)
    seed: int
    stratified: bool = True

    def pairs(self, side: Literal["train", "test"]) -> list[str]:
        return sorted(p for p, s in self.assignment.items() if s == side)
