from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field


class NmfModel(BaseModel):
    """V ≈ W · diag(d) · H on the AU × frame matrix of the training set."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    W: np.ndarray
    d: np.ndarray
    H: np.ndarray
    columns: list[tuple[str, int]] = []
    rank: int
    seed: int
    train_mse: float
    train_r2: float
    converged: bool
    n_iter: int
    objective_trace: list[float] = []

    def h_for(self, video_id: str) -> np.ndarray:
        start = 0
        for vid, n in self.columns:
            if vid == video_id:
                return self.H[:, start : start + n]
            start += n
        raise KeyError(video_id)

    def reconstruct(self, H: Optional[np.ndarray] = None) -> np.ndarray:
        H = self.H if H is None else H
        return (self.W * self.d) @ H


class RankScanEntry(BaseModel):
    rank: int
    mse: float


class RankScanResult(BaseModel):
    entries: list[RankScanEntry]

    def mse(self, rank: int) -> float:
        return next(e.mse for e in self.entries if e.rank == rank)


class RepresentativeSet(BaseModel):
    components: dict[int, str]

    @property
    def aus(self) -> list[str]:
        return [self.components[c] for c in sorted(self.components)]


class ReconstructionReport(BaseModel):
    overall_r2: float
    per_au: dict[str, Optional[float]]
    zero_variance: list[str] = Field(default_factory=list)
