from enum import Enum
from typing import Any, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator


class Algorithm(str, Enum):
    random_forest = "random_forest"
    logistic_regression = "logistic_regression"
    svm_rbf = "svm_rbf"
    boosted_trees = "boosted_trees"


class ClassifierSpec(BaseModel):
    algorithm: Algorithm
    n_estimators: int = Field(500, ge=1)
    max_features: Optional[int] = Field(None, ge=1)  # None → ⌊√p⌋
    max_depth: Optional[int] = Field(None, ge=1)
    C: float = Field(1.0, gt=0)
    gamma: Optional[float] = Field(None, gt=0)  # None → 1 / p
    boosting_rounds: int = Field(100, ge=1)
    learning_rate: float = Field(0.1, gt=0, le=1)
    ridge: float = Field(1e-6, gt=0)
    tune: bool = True
    seed: int = 0

    @model_validator(mode="after")
    def _depth_for_boosting(self):
        if self.algorithm is Algorithm.boosted_trees and self.max_depth is None:
            self.max_depth = 3
        return self


class TrainedClassifier(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    spec: ClassifierSpec
    estimator: Any
    classes: list[str]
    positive_class: Optional[str] = None
    feature_names: list[str]
    fingerprint: str
    seed: int
    oob_error: Optional[float] = None
    best_params: dict[str, Any] = {}


class CvPlan(BaseModel):
    scheme: Literal["repeated_kfold", "lopo", "loso"]
    folds: list[list[int]]  # validation indices per fold
    repeat_of_fold: list[int] = []
    seed: int = 0


class PredictionSet(BaseModel):
    """Per-item predictions; `proba` columns follow `classes`, `score` is P(positive) for binary sets."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    ids: list[str]
    true: list[str]
    pred: list[str]
    classes: list[str]
    proba: np.ndarray
    positive_class: Optional[str] = None

    @property
    def score(self) -> np.ndarray:
        if self.positive_class is None:
            raise ValueError("score is only defined for binary prediction sets")
        return self.proba[:, self.classes.index(self.positive_class)]

    def accuracy(self) -> float:
        return float(np.mean(np.asarray(self.true) == np.asarray(self.pred)))

    def subset(self, mask: np.ndarray) -> "PredictionSet":
        idx = np.flatnonzero(mask)
        return self.model_copy(
            update={
                "ids": [self.ids[i] for i in idx],
                "true": [self.true[i] for i in idx],
                "pred": [self.pred[i] for i in idx],
                "proba": self.proba[idx],
            }
        )


class ResampleSummary(BaseModel):
    n_resamples: int
    accuracy: float
    roc_auc: Optional[float] = None
    kappa: float
    per_resample: list[dict[str, float]] = []
