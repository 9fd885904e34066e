import logging
import math
from typing import Literal, Optional, Sequence

import numpy as np
import pandas as pd
from scipy import stats
from sklearn.metrics import cohen_kappa_score, matthews_corrcoef, roc_auc_score, roc_curve
from statsmodels.stats.proportion import proportion_confint

from facedyn.core.errors import ArgumentError
from facedyn.schemas.learn import PredictionSet
from facedyn.schemas.stats import (
    ChiSquareResult,
    ConfidenceInterval,
    ConfusionMatrix,
    DelongComparison,
    DelongResult,
    MetricReport,
    MulticlassConfusion,
    PowerResult,
    RocCurve,
    TestResult,
)

logger = logging.getLogger(__name__)


def format_p(p: float) -> str:
    if p < 0.001:
        return "< .001"
    text = f"{p:.3f}"
    return text[1:] if text.startswith("0") else text


# -----------------------
# Confusion matrices
# -----------------------
def confusion(preds: PredictionSet, positive: Optional[str] = None) -> ConfusionMatrix:
    positive = positive or preds.positive_class
    if positive is None:
        raise ArgumentError("A positive class is required for a binary confusion matrix")
    true = np.asarray(preds.true) == positive
    pred = np.asarray(preds.pred) == positive
    return ConfusionMatrix(
        tp=int((true & pred).sum()),
        fp=int((~true & pred).sum()),
        fn=int((true & ~pred).sum()),
        tn=int((~true & ~pred).sum()),
        positive=positive,
    )


def multiclass_confusion(preds: PredictionSet, classes: Optional[list[str]] = None) -> MulticlassConfusion:
    classes = classes or preds.classes
    index = {c: i for i, c in enumerate(classes)}
    counts = np.zeros((len(classes), len(classes)), dtype=int)
    for t, p in zip(preds.true, preds.pred):
        counts[index[t], index[p]] += 1
    return MulticlassConfusion(classes=classes, counts=counts.tolist())


def _expand(counts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Label arrays reproducing a confusion matrix (rows true, columns predicted)."""
    k = counts.shape[0]
    true = np.repeat(np.repeat(np.arange(k), k), counts.ravel())
    pred = np.repeat(np.tile(np.arange(k), k), counts.ravel())
    return true, pred


def _ratio(num: float, den: float) -> float:
    return num / den if den else float("nan")


def binary_metrics(cm: ConfusionMatrix) -> dict[str, float]:
    if cm.total == 0:
        raise ArgumentError("Confusion matrix is empty")
    true, pred = _expand(np.array([[cm.tp, cm.fn], [cm.fp, cm.tn]]))
    # matthews_corrcoef returns 0 when any marginal product is zero
    return {
        "accuracy": (cm.tp + cm.tn) / cm.total,
        "sensitivity": _ratio(cm.tp, cm.tp + cm.fn),
        "specificity": _ratio(cm.tn, cm.tn + cm.fp),
        "mcc": float(matthews_corrcoef(true, pred)),
    }


def multiclass_metrics(
    cm: MulticlassConfusion,
    proba: Optional[np.ndarray] = None,
    true: Optional[Sequence[str]] = None,
) -> dict:
    counts = cm.array()
    if counts.shape[0] < 2:
        raise ArgumentError("Multiclass metrics need at least two classes")
    row_totals = counts.sum(axis=1)
    sensitivity = {
        c: (float(counts[i, i] / row_totals[i]) if row_totals[i] else None) for i, c in enumerate(cm.classes)
    }
    undefined = [c for c, s in sensitivity.items() if s is None]
    if undefined:
        logger.warning("Sensitivity undefined for empty classes: %s", ", ".join(undefined))
    y_true, y_pred = _expand(counts)
    out = {
        "accuracy": float(np.trace(counts) / counts.sum()),
        "sensitivity": sensitivity,
        "mcc": float(matthews_corrcoef(y_true, y_pred)),
    }
    if proba is not None and true is not None and set(true) == set(cm.classes):
        out["macro_auc"] = float(
            roc_auc_score(list(true), proba, multi_class="ovr", average="macro", labels=cm.classes)
        )
    return out


def kappa(preds: PredictionSet) -> float:
    if len(set(preds.true) | set(preds.pred)) < 2:
        return 0.0
    return float(cohen_kappa_score(preds.true, preds.pred))


# -----------------------
# Proportions
# -----------------------
def wilson_ci(successes: float, n: float, level: float = 0.95) -> ConfidenceInterval:
    """Wilson score interval; fractional counts are allowed for full-test-size intervals."""
    if n <= 0 or not 0 <= successes <= n:
        raise ArgumentError(f"Invalid proportion {successes}/{n}")
    lo, hi = proportion_confint(successes, n, alpha=1 - level, method="wilson")
    return ConfidenceInterval(lo=float(lo), hi=float(hi), level=level, method="wilson")


def one_prop_test(successes: float, n: float, p0: float = 0.5) -> TestResult:
    """One-sided (greater) continuity-corrected z-test of x/n against p0."""
    if n <= 0:
        raise ArgumentError("n must be positive")
    if not 0 < p0 < 1:
        raise ArgumentError(f"p0 must lie in (0, 1), got {p0}")
    z = (successes - n * p0 - 0.5) / math.sqrt(n * p0 * (1 - p0))
    p = float(stats.norm.sf(z))
    return TestResult(
        statistic=float(z),
        p=p,
        p_formatted=format_p(p),
        sidedness="one-sided",
        method="one-proportion z-test",
        correction="continuity",
    )


def nir_test(
    correct: int,
    n: int,
    class_counts: Optional[Sequence[int]] = None,
    mode: Literal["empirical", "fixed"] = "empirical",
    p0: Optional[float] = None,
) -> MetricReport:
    """Accuracy against the no-information rate: the largest class share, or a fixed p0."""
    if mode == "empirical":
        if not class_counts:
            raise ArgumentError("Empirical NIR needs class counts")
        p0 = max(class_counts) / sum(class_counts)
    elif p0 is None:
        raise ArgumentError("Fixed NIR needs p0")
    return MetricReport(
        metric="accuracy",
        estimate=correct / n,
        n=n,
        ci=wilson_ci(correct, n),
        test=one_prop_test(correct, n, p0),
    )


# -----------------------
# ROC and DeLong
# -----------------------
def _binary_labels(labels: Sequence) -> np.ndarray:
    y = np.asarray(labels).astype(bool)
    if y.all() or not y.any():
        raise ArgumentError("ROC analysis needs both classes present")
    return y


def roc_auc(scores: Sequence[float], labels: Sequence) -> RocCurve:
    y = _binary_labels(labels)
    s = np.asarray(scores, dtype=float)
    fpr, tpr, thresholds = roc_curve(y, s, drop_intermediate=False)
    return RocCurve(thresholds=thresholds, fpr=fpr, tpr=tpr, auc=float(roc_auc_score(y, s)))


def roc_points(curve: RocCurve) -> pd.DataFrame:
    return pd.DataFrame({"threshold": curve.thresholds, "fpr": curve.fpr, "tpr": curve.tpr})


def _placements(scores: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
    """AUC with per-positive (V10) and per-negative (V01) structural components."""
    pos, neg = scores[y], scores[~y]
    m, n = len(pos), len(neg)
    tx = stats.rankdata(pos)
    ty = stats.rankdata(neg)
    tz = stats.rankdata(np.concatenate([pos, neg]))
    auc = (tz[:m].sum() - m * (m + 1) / 2) / (m * n)
    v10 = (tz[:m] - tx) / n
    v01 = 1.0 - (tz[m:] - ty) / m
    return float(auc), v10, v01


def _delong_cov(score_sets: list[np.ndarray], y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    parts = [_placements(s, y) for s in score_sets]
    aucs = np.array([p[0] for p in parts])
    v10 = np.vstack([p[1] for p in parts])
    v01 = np.vstack([p[2] for p in parts])
    m, n = v10.shape[1], v01.shape[1]
    cov = np.atleast_2d(np.cov(v10)) / m + np.atleast_2d(np.cov(v01)) / n
    return aucs, cov


def delong(scores: Sequence[float], labels: Sequence, level: float = 0.95) -> DelongResult:
    y = _binary_labels(labels)
    aucs, cov = _delong_cov([np.asarray(scores, dtype=float)], y)
    auc, var = float(aucs[0]), max(float(cov[0, 0]), 0.0)
    half = stats.norm.ppf(1 - (1 - level) / 2) * math.sqrt(var)
    ci = ConfidenceInterval(lo=max(0.0, auc - half), hi=min(1.0, auc + half), level=level, method="delong")
    return DelongResult(auc=auc, variance=var, ci=ci)


def _z_p(delta: float, var: float) -> tuple[float, float]:
    if var <= 0:
        return (0.0, 1.0) if delta == 0 else (math.copysign(math.inf, delta), 0.0)
    z = delta / math.sqrt(var)
    return z, float(2 * stats.norm.sf(abs(z)))


def delong_compare(
    scores_a: Sequence[float],
    labels_a: Sequence,
    scores_b: Sequence[float],
    labels_b: Optional[Sequence] = None,
    paired: bool = True,
) -> DelongComparison:
    """Two-sided DeLong test of AUC_a = AUC_b; paired sets share labels and items."""
    if paired:
        y = _binary_labels(labels_a)
        if labels_b is not None and not np.array_equal(y, _binary_labels(labels_b)):
            raise ArgumentError("Paired comparison needs identical labels")
        aucs, cov = _delong_cov([np.asarray(scores_a, dtype=float), np.asarray(scores_b, dtype=float)], y)
        delta = float(aucs[0] - aucs[1])
        var = float(cov[0, 0] + cov[1, 1] - 2 * cov[0, 1])
    else:
        a = delong(scores_a, labels_a)
        b = delong(scores_b, labels_b if labels_b is not None else labels_a)
        delta = a.auc - b.auc
        var = a.variance + b.variance
    z, p = _z_p(delta, var)
    return DelongComparison(delta_auc=delta, z=z, p=p, paired=paired)


# -----------------------
# Contingency tables
# -----------------------
def _table(table) -> np.ndarray:
    t = np.asarray(table)
    if t.ndim != 2 or np.any(t < 0):
        raise ArgumentError("Contingency table must be a non-negative matrix")
    if np.any(t.sum(axis=0) == 0) or np.any(t.sum(axis=1) == 0):
        raise ArgumentError("Contingency table has an empty row or column")
    return t


def fisher_exact_2x2(table) -> TestResult:
    t = _table(table)
    if t.shape != (2, 2):
        raise ArgumentError("Fisher's exact test needs a 2×2 table")
    odds, p = stats.fisher_exact(t, alternative="two-sided")
    return TestResult(
        statistic=float(odds),
        p=float(p),
        p_formatted=format_p(float(p)),
        sidedness="two-sided",
        method="fisher exact",
    )


def phi_from_chi2(chi2: float, n: int) -> float:
    return math.sqrt(chi2 / n)


def chi_square(table, yates: Optional[bool] = None) -> ChiSquareResult:
    """Pearson chi-square; Yates correction defaults on for 2×2 tables."""
    t = _table(table)
    two_by_two = t.shape == (2, 2)
    yates = two_by_two if yates is None else yates and two_by_two
    chi2, p, dof, _ = stats.chi2_contingency(t, correction=yates)
    n = int(t.sum())
    if two_by_two:
        effect, name = phi_from_chi2(chi2, n), "phi"
    else:
        effect, name = math.sqrt(chi2 / (n * (min(t.shape) - 1))), "cramers_v"
    return ChiSquareResult(chi2=float(chi2), df=int(dof), p=float(p), effect=effect, effect_name=name, n=n, yates=yates)


# -----------------------
# Effect size and power
# -----------------------
def cohens_h_power(p1: float, p2: float, n1: int, n2: int, alpha: float = 0.05) -> PowerResult:
    for p in (p1, p2):
        if not 0 < p < 1:
            raise ArgumentError(f"proportions must lie in (0, 1), got {p}")
    h = 2 * math.asin(math.sqrt(p1)) - 2 * math.asin(math.sqrt(p2))
    z_crit = stats.norm.ppf(1 - alpha / 2)
    shift = abs(h) / math.sqrt(1 / n1 + 1 / n2)
    power = float(stats.norm.cdf(shift - z_crit) + stats.norm.cdf(-shift - z_crit))
    n_80 = math.ceil(((z_crit + stats.norm.ppf(0.8)) / h) ** 2) if h else None
    return PowerResult(h=h, power=power, n_per_group_for_80=n_80)


# -----------------------
# Reports
# -----------------------
def metric_reports(preds: PredictionSet, full_n_ci: bool = False, nir: float = 0.5) -> list[MetricReport]:
    """
    Accuracy, sensitivity, specificity, MCC and ROC-AUC of a binary prediction set.
    With `full_n_ci`, sensitivity/specificity intervals use the full test size as n.
    """
    cm = confusion(preds)
    m = binary_metrics(cm)
    reports = [
        MetricReport(
            metric="accuracy",
            estimate=m["accuracy"],
            n=cm.total,
            ci=wilson_ci(cm.tp + cm.tn, cm.total),
            test=one_prop_test(cm.tp + cm.tn, cm.total, nir),
        )
    ]
    for metric, hits, size in (
        ("sensitivity", cm.tp, cm.tp + cm.fn),
        ("specificity", cm.tn, cm.tn + cm.fp),
    ):
        if size == 0:
            reports.append(MetricReport(metric=metric, estimate=float("nan"), n=0))
            continue
        estimate = hits / size
        ci = wilson_ci(estimate * cm.total, cm.total) if full_n_ci else wilson_ci(hits, size)
        reports.append(MetricReport(metric=metric, estimate=estimate, n=size, ci=ci))
    reports.append(MetricReport(metric="mcc", estimate=m["mcc"], n=cm.total))
    truth = np.asarray(preds.true) == cm.positive
    if truth.any() and not truth.all():
        d = delong(preds.score, truth)
        reports.append(MetricReport(metric="roc_auc", estimate=d.auc, n=cm.total, ci=d.ci))
    reports.append(MetricReport(metric="kappa", estimate=kappa(preds), n=cm.total))
    return reports
