from enum import Enum

import numpy as np
from pydantic import BaseModel, ConfigDict


class FeatureStatus(str, Enum):
    confirmed = "confirmed"
    tentative = "tentative"
    rejected = "rejected"


class BorutaDecision(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    features: list[str]
    status: dict[str, FeatureStatus]
    hit_counts: dict[str, int]
    importance_history: np.ndarray
    shadow_max_history: list[float]
    max_runs: int
    alpha: float
    n_runs: int
    seed: int

    def with_status(self, status: FeatureStatus) -> list[str]:
        return [f for f in self.features if self.status[f] is status]

    @property
    def confirmed(self) -> list[str]:
        return self.with_status(FeatureStatus.confirmed)

    @property
    def tentative(self) -> list[str]:
        return self.with_status(FeatureStatus.tentative)

    @property
    def rejected(self) -> list[str]:
        return self.with_status(FeatureStatus.rejected)

    def median_importance(self) -> dict[str, float]:
        hist = self.importance_history
        if hist.size == 0:
            return {f: float("nan") for f in self.features}
        return {f: float(np.nanmedian(hist[:, i])) for i, f in enumerate(self.features)}


class PcaModel(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    features: list[str]
    means: np.ndarray
    scales: np.ndarray
    loadings: np.ndarray
    eigenvalues: np.ndarray
    cumulative_variance: np.ndarray
    retained_kaiser: int
    retained_95: int
    dropped: list[str] = []
