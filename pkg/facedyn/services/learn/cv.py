import logging
from typing import Optional, Sequence

import numpy as np
import pandas as pd
from sklearn.metrics import cohen_kappa_score, roc_auc_score
from sklearn.model_selection import LeaveOneGroupOut, RepeatedStratifiedKFold

from facedyn.core.errors import ArgumentError
from facedyn.core.seeding import rng, sub_seed
from facedyn.schemas.features import FeatureMatrix
from facedyn.schemas.learn import ClassifierSpec, CvPlan, PredictionSet, ResampleSummary
from facedyn.services.learn.classifiers import _frame, predict, train_classifier

logger = logging.getLogger(__name__)


def kfold_plan(y: Sequence, k: int = 5, repeats: int = 3, seed: int = 0) -> CvPlan:
    labels = np.asarray(y).astype(str)
    if k > len(labels):
        raise ArgumentError(f"k={k} exceeds the number of samples ({len(labels)})")
    if k < 2:
        raise ArgumentError(f"k must be >= 2, got {k}")
    splitter = RepeatedStratifiedKFold(n_splits=k, n_repeats=repeats, random_state=seed)
    folds = [sorted(test.tolist()) for _, test in splitter.split(np.zeros(len(labels)), labels)]
    return CvPlan(
        scheme="repeated_kfold",
        folds=folds,
        repeat_of_fold=[i // k for i in range(len(folds))],
        seed=seed,
    )


def group_plan(groups: Sequence, scheme: str) -> CvPlan:
    ids = np.asarray(groups).astype(str)
    if len(np.unique(ids)) < 2:
        raise ArgumentError(f"{scheme} needs at least two distinct ids")
    folds = [sorted(test.tolist()) for _, test in LeaveOneGroupOut().split(ids, groups=ids)]
    return CvPlan(scheme=scheme, folds=folds, repeat_of_fold=[0] * len(folds))


def _concat(parts: list[PredictionSet], order: np.ndarray) -> PredictionSet:
    """Merge fold predictions and restore input row order."""
    ids = [i for p in parts for i in p.ids]
    true = [t for p in parts for t in p.true]
    pred = [t for p in parts for t in p.pred]
    classes = sorted(set(c for p in parts for c in p.classes))
    proba = np.zeros((len(ids), len(classes)))
    row = 0
    for p in parts:
        for j, c in enumerate(p.classes):
            proba[row : row + len(p.ids), classes.index(c)] = p.proba[:, j]
        row += len(p.ids)
    inverse = np.argsort(order, kind="stable")
    return PredictionSet(
        ids=[ids[i] for i in inverse],
        true=[true[i] for i in inverse],
        pred=[pred[i] for i in inverse],
        classes=classes,
        proba=proba[inverse],
        positive_class=parts[0].positive_class,
    )


def _run_plan(
    plan: CvPlan,
    frame: pd.DataFrame,
    labels: np.ndarray,
    spec: ClassifierSpec,
    positive_class: Optional[str],
) -> tuple[list[PredictionSet], list[PredictionSet]]:
    """Fit one model per fold; returns per-fold predictions and per-repeat merged predictions."""
    n = len(labels)
    fold_sets: list[PredictionSet] = []
    by_repeat: dict[int, list[tuple[list[int], PredictionSet]]] = {}
    for f, (test_idx, repeat) in enumerate(zip(plan.folds, plan.repeat_of_fold)):
        train_mask = np.ones(n, dtype=bool)
        train_mask[test_idx] = False
        fold_spec = spec.model_copy(update={"seed": sub_seed(spec.seed, repeat, f)})
        model = train_classifier(fold_spec, frame.iloc[train_mask], labels[train_mask], positive_class)
        preds = predict(model, frame.iloc[test_idx], labels[test_idx])
        fold_sets.append(preds)
        by_repeat.setdefault(repeat, []).append((test_idx, preds))

    merged = []
    for repeat in sorted(by_repeat):
        parts = by_repeat[repeat]
        order = np.concatenate([idx for idx, _ in parts])
        merged.append(_concat([p for _, p in parts], order))
    return fold_sets, merged


def _resample_metrics(preds: PredictionSet) -> dict[str, float]:
    out = {
        "accuracy": preds.accuracy(),
        "kappa": float(cohen_kappa_score(preds.true, preds.pred)) if len(set(preds.true + preds.pred)) > 1 else 0.0,
    }
    if preds.positive_class is not None and len(set(preds.true)) == 2:
        out["roc_auc"] = float(roc_auc_score(np.asarray(preds.true) == preds.positive_class, preds.score))
    return out


def repeated_kfold(
    X: FeatureMatrix | pd.DataFrame,
    y: Sequence,
    spec: ClassifierSpec,
    k: int = 5,
    repeats: int = 3,
    seed: int = 0,
    positive_class: Optional[str] = None,
) -> tuple[list[PredictionSet], ResampleSummary]:
    """Stratified k-fold repeated `repeats` times; one merged PredictionSet per repeat."""
    frame = _frame(X)
    labels = np.asarray(y).astype(str)
    plan = kfold_plan(labels, k, repeats, seed)
    fold_sets, merged = _run_plan(plan, frame, labels, spec, positive_class)

    per_resample = [_resample_metrics(p) for p in fold_sets]
    aucs = [m["roc_auc"] for m in per_resample if "roc_auc" in m]
    summary = ResampleSummary(
        n_resamples=len(per_resample),
        accuracy=float(np.mean([m["accuracy"] for m in per_resample])),
        roc_auc=float(np.mean(aucs)) if aucs else None,
        kappa=float(np.mean([m["kappa"] for m in per_resample])),
        per_resample=per_resample,
    )
    logger.info(
        "%s %d-fold × %d: accuracy %.3f over %d resamples",
        spec.algorithm.value,
        k,
        repeats,
        summary.accuracy,
        summary.n_resamples,
    )
    return merged, summary


def downsample_balance(
    X: FeatureMatrix | pd.DataFrame, y: Sequence, seed: int = 0
) -> tuple[pd.DataFrame, np.ndarray]:
    """Downsample every class without replacement to the smallest class count; rows keep input order."""
    frame = _frame(X)
    labels = np.asarray(y).astype(str)
    classes = sorted(np.unique(labels).tolist())
    if not classes:
        raise ArgumentError("Cannot balance an empty label set")
    counts = {c: int((labels == c).sum()) for c in classes}
    target = min(counts.values())
    keep = []
    for i, c in enumerate(classes):
        idx = np.flatnonzero(labels == c)
        keep.append(idx if len(idx) == target else rng(seed, i).choice(idx, size=target, replace=False))
    rows = np.sort(np.concatenate(keep))
    logger.info("Balanced %s to %d per class", counts, target)
    return frame.iloc[rows], labels[rows]


def _group_cv(X, y, groups, spec: ClassifierSpec, scheme: str, positive_class: Optional[str]) -> PredictionSet:
    frame = _frame(X)
    labels = np.asarray(y).astype(str)
    if len(np.asarray(groups)) != len(labels):
        raise ArgumentError("groups must have one id per row")
    plan = group_plan(groups, scheme)
    _, merged = _run_plan(plan, frame, labels, spec, positive_class)
    return merged[0]


def lopo_cv(
    X: FeatureMatrix | pd.DataFrame,
    y: Sequence,
    participant_ids: Sequence,
    spec: ClassifierSpec,
    positive_class: Optional[str] = None,
) -> PredictionSet:
    return _group_cv(X, y, participant_ids, spec, "lopo", positive_class)


def loso_cv(
    X: FeatureMatrix | pd.DataFrame,
    y: Sequence,
    stimulus_ids: Sequence,
    spec: ClassifierSpec,
    positive_class: Optional[str] = None,
) -> PredictionSet:
    return _group_cv(X, y, stimulus_ids, spec, "loso", positive_class)
