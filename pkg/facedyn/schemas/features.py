from enum import Enum
from typing import Any

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field


class Transform(str, Enum):
    none = "none"
    diff1 = "diff1"
    diff2 = "diff2"


class FeatureDescriptor(BaseModel):
    transform: Transform
    metric: str
    au: str
    params: dict[str, Any] = {}
    anchored: bool = False

    @property
    def name(self) -> str:
        prefix = "" if self.transform is Transform.none else f"{self.transform.value}_"
        return f"{prefix}{self.metric}_{self.au}"


class FeatureMatrix(BaseModel):
    """Videos × named features; `imputed_mask` flags cells that held a sentinel before imputation."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    values: pd.DataFrame
    imputed_mask: pd.DataFrame
    dropped_features: dict[str, str] = Field(default_factory=dict)
    oob_nrmse: float | None = None

    @classmethod
    def from_frame(cls, values: pd.DataFrame) -> "FeatureMatrix":
        return cls(values=values, imputed_mask=pd.DataFrame(False, index=values.index, columns=values.columns))

    @property
    def names(self) -> list[str]:
        return list(self.values.columns)

    def select(self, names: list[str]) -> "FeatureMatrix":
        return self.model_copy(update={"values": self.values[names], "imputed_mask": self.imputed_mask[names]})

    def rows(self, video_ids: list[str]) -> "FeatureMatrix":
        return self.model_copy(
            update={"values": self.values.loc[video_ids], "imputed_mask": self.imputed_mask.loc[video_ids]}
        )

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.values.to_numpy(dtype=float)).all())


class TransitionThresholds(BaseModel):
    train_mean: float
    train_sd: float

    @property
    def low(self) -> float:
        return self.train_mean - self.train_sd

    @property
    def high(self) -> float:
        return self.train_mean + self.train_sd


class TransitionEventSummary(BaseModel):
    video_id: str
    event_count: int
    total_transition_fraction: float
    mean_duration: float
    max_duration: int
    mean_velocity: float
    max_velocity: float
    velocity_range: float
    thresholds: TransitionThresholds
