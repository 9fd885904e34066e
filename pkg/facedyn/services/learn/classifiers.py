import hashlib
import logging
import math
import warnings
from typing import Optional

import numpy as np
import pandas as pd
from sklearn.ensemble import GradientBoostingClassifier, RandomForestClassifier
from sklearn.exceptions import ConvergenceWarning
from sklearn.inspection import permutation_importance
from sklearn.linear_model import LogisticRegression
from sklearn.model_selection import GridSearchCV, StratifiedKFold
from sklearn.pipeline import Pipeline, make_pipeline
from sklearn.preprocessing import StandardScaler
from sklearn.svm import SVC

from facedyn.core.config import settings
from facedyn.core.errors import ArgumentError, FeatureMismatchError
from facedyn.schemas.features import FeatureMatrix
from facedyn.schemas.learn import Algorithm, ClassifierSpec, PredictionSet, TrainedClassifier

logger = logging.getLogger(__name__)

POSITIVE_CLASS = "fake"
SVM_GRID = (0.1, 1.0, 10.0)
INNER_FOLDS = 5


def _frame(X: FeatureMatrix | pd.DataFrame) -> pd.DataFrame:
    return (X.values if isinstance(X, FeatureMatrix) else X).astype(float)


def fingerprint(X: pd.DataFrame, y: np.ndarray) -> str:
    h = hashlib.sha256()
    h.update("\x1f".join(map(str, X.columns)).encode())
    h.update(np.ascontiguousarray(X.to_numpy(dtype=float)).tobytes())
    h.update("\x1f".join(map(str, y)).encode())
    return h.hexdigest()


def _positive(classes: list[str], positive_class: Optional[str]) -> Optional[str]:
    if len(classes) != 2:
        return None
    wanted = positive_class or POSITIVE_CLASS
    return wanted if wanted in classes else classes[1]


def build_estimator(spec: ClassifierSpec, n_features: int, n_jobs: Optional[int] = None):
    n_jobs = n_jobs or settings.THREADS
    if spec.algorithm is Algorithm.random_forest:
        return RandomForestClassifier(
            n_estimators=spec.n_estimators,
            criterion="gini",
            max_features=spec.max_features or max(1, math.isqrt(n_features)),
            max_depth=spec.max_depth,
            oob_score=True,
            random_state=spec.seed,
            n_jobs=n_jobs,
        )
    if spec.algorithm is Algorithm.logistic_regression:
        return make_pipeline(
            StandardScaler(),
            LogisticRegression(C=1.0 / spec.ridge, solver="newton-cg", max_iter=1000),
        )
    if spec.algorithm is Algorithm.svm_rbf:
        return make_pipeline(
            StandardScaler(),
            SVC(
                kernel="rbf",
                C=spec.C,
                gamma=spec.gamma or 1.0 / n_features,
                tol=1e-3,
                probability=True,
                random_state=spec.seed,
            ),
        )
    return GradientBoostingClassifier(
        loss="log_loss",
        n_estimators=spec.boosting_rounds,
        learning_rate=spec.learning_rate,
        max_depth=spec.max_depth,
        random_state=spec.seed,
    )


def _tune_svm(estimator: Pipeline, X: np.ndarray, y: np.ndarray, spec: ClassifierSpec, n_jobs: int):
    base_gamma = spec.gamma or 1.0 / X.shape[1]
    grid = {
        "svc__C": [spec.C * f for f in SVM_GRID],
        "svc__gamma": [base_gamma * f for f in SVM_GRID],
    }
    search = GridSearchCV(
        estimator,
        grid,
        cv=StratifiedKFold(n_splits=INNER_FOLDS, shuffle=True, random_state=spec.seed),
        scoring="accuracy",
        n_jobs=n_jobs,
    )
    search.fit(X, y)
    return search.best_estimator_, search.best_params_


def train_classifier(
    spec: ClassifierSpec,
    X: FeatureMatrix | pd.DataFrame,
    y: np.ndarray | pd.Series | list,
    positive_class: Optional[str] = None,
    n_jobs: Optional[int] = None,
) -> TrainedClassifier:
    frame = _frame(X)
    data = frame.to_numpy()
    labels = np.asarray(y).astype(str)
    if len(labels) != len(data):
        raise ArgumentError(f"X has {len(data)} rows but y has {len(labels)} labels")
    if not np.isfinite(data).all():
        raise ArgumentError("Training features contain non-finite values")
    classes = sorted(np.unique(labels).tolist())
    if len(classes) < 2:
        raise ArgumentError(f"Training labels contain a single class: {classes}")

    n_jobs = n_jobs or settings.THREADS
    estimator = build_estimator(spec, data.shape[1], n_jobs)
    best_params = {}
    min_class = min(int((labels == c).sum()) for c in classes)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        warnings.simplefilter("ignore", UserWarning)
        if spec.algorithm is Algorithm.svm_rbf and spec.tune and min_class >= INNER_FOLDS:
            estimator, best_params = _tune_svm(estimator, data, labels, spec, n_jobs)
        else:
            estimator.fit(data, labels)

    oob_error = None
    if isinstance(estimator, RandomForestClassifier) and hasattr(estimator, "oob_score_"):
        oob_error = float(1.0 - estimator.oob_score_)
    logger.debug("Trained %s on %d rows × %d features", spec.algorithm.value, *data.shape)
    return TrainedClassifier(
        spec=spec,
        estimator=estimator,
        classes=classes,
        positive_class=_positive(classes, positive_class),
        feature_names=list(frame.columns),
        fingerprint=fingerprint(frame, labels),
        seed=spec.seed,
        oob_error=oob_error,
        best_params=best_params,
    )


def _aligned(model: TrainedClassifier, X: pd.DataFrame) -> np.ndarray:
    missing = [c for c in model.feature_names if c not in X.columns]
    unexpected = [c for c in X.columns if c not in model.feature_names]
    if missing or unexpected:
        raise FeatureMismatchError(missing, unexpected)
    return X[model.feature_names].to_numpy(dtype=float)


def predict(
    model: TrainedClassifier,
    X: FeatureMatrix | pd.DataFrame,
    y: Optional[np.ndarray | pd.Series | list] = None,
) -> PredictionSet:
    frame = _frame(X)
    data = _aligned(model, frame)
    if not np.isfinite(data).all():
        raise ArgumentError("Prediction features contain non-finite values")
    proba = model.estimator.predict_proba(data)
    order = [list(model.estimator.classes_).index(c) for c in model.classes]
    proba = proba[:, order]
    pred = np.asarray(model.estimator.predict(data)).astype(str)
    truth = [str(v) for v in y] if y is not None else [""] * len(frame)
    return PredictionSet(
        ids=[str(i) for i in frame.index],
        true=truth,
        pred=pred.tolist(),
        classes=model.classes,
        proba=proba,
        positive_class=model.positive_class,
    )


def permutation_importances(
    model: TrainedClassifier, X: FeatureMatrix | pd.DataFrame, y, n_repeats: int = 10, seed: int = 0
) -> pd.DataFrame:
    """Mean decrease in accuracy per feature, one row per repeat."""
    frame = _frame(X)
    result = permutation_importance(
        model.estimator,
        _aligned(model, frame),
        np.asarray(y).astype(str),
        n_repeats=n_repeats,
        random_state=seed,
        n_jobs=settings.THREADS,
    )
    return pd.DataFrame(result.importances.T, columns=model.feature_names)


def importance_ranking(importances: pd.DataFrame) -> pd.DataFrame:
    """Features ordered by mean decrease in accuracy, ties broken by name."""
    ranked = pd.DataFrame(
        {
            "feature": importances.columns,
            "mean_decrease_accuracy": importances.mean().to_numpy(),
            "sd": importances.std(ddof=1).to_numpy() if len(importances) > 1 else np.nan,
        }
    )
    ranked = ranked.sort_values(["mean_decrease_accuracy", "feature"], ascending=[False, True], kind="mergesort")
    ranked.insert(0, "rank", np.arange(1, len(ranked) + 1))
    return ranked.reset_index(drop=True)
