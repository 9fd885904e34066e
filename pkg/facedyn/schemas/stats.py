from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field


class ConfusionMatrix(BaseModel):
    tp: int = Field(..., ge=0)
    fp: int = Field(..., ge=0)
    fn: int = Field(..., ge=0)
    tn: int = Field(..., ge=0)
    positive: str = "fake"

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


class MulticlassConfusion(BaseModel):
    """Rows are true classes, columns predicted classes, both ordered as `classes`."""

    classes: list[str]
    counts: list[list[int]]

    def array(self) -> np.ndarray:
        return np.asarray(self.counts, dtype=int)


class ConfidenceInterval(BaseModel):
    lo: float
    hi: float
    level: float = 0.95
    method: str


class TestResult(BaseModel):
    statistic: Optional[float] = None
    p: float
    p_formatted: str
    sidedness: Literal["one-sided", "two-sided"]
    method: str
    correction: Optional[str] = None


class MetricReport(BaseModel):
    metric: str
    estimate: float
    n: Optional[int] = None
    ci: Optional[ConfidenceInterval] = None
    test: Optional[TestResult] = None


class RocCurve(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    thresholds: np.ndarray
    fpr: np.ndarray
    tpr: np.ndarray
    auc: float


class DelongResult(BaseModel):
    auc: float
    variance: float
    ci: ConfidenceInterval


class DelongComparison(BaseModel):
    delta_auc: float
    z: float
    p: float
    paired: bool


class ChiSquareResult(BaseModel):
    chi2: float
    df: int
    p: float
    effect: float
    effect_name: Literal["phi", "cramers_v"]
    n: int
    yates: bool


class PowerResult(BaseModel):
    h: float
    power: float
    n_per_group_for_80: Optional[int]
