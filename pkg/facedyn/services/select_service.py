import logging
from typing import Literal, Optional

import numpy as np
import pandas as pd
from scipy import stats
from sklearn.ensemble import RandomForestClassifier
from sklearn.ensemble._forest import _generate_unsampled_indices, _get_n_samples_bootstrap
from tqdm import tqdm

from facedyn.core.config import settings
from facedyn.core.errors import ArgumentError
from facedyn.core.seeding import rng, sub_seed
from facedyn.schemas.features import FeatureMatrix
from facedyn.schemas.select import BorutaDecision, FeatureStatus, PcaModel

logger = logging.getLogger(__name__)

MIN_SHADOWS = 5


def _oob_permutation_importance(forest: RandomForestClassifier, X: np.ndarray, y: np.ndarray, seed: int) -> np.ndarray:
    """
    Per-tree drop in out-of-bag accuracy when one column is permuted among that tree's OOB rows,
    averaged over trees and scaled by its SD across trees.
    """
    n, p = X.shape
    codes = np.searchsorted(forest.classes_, y)
    n_bootstrap = _get_n_samples_bootstrap(n, forest.max_samples)
    gen = rng(seed)
    drops = np.full((len(forest.estimators_), p), np.nan)
    for t, tree in enumerate(forest.estimators_):
        oob = _generate_unsampled_indices(tree.random_state, n, n_bootstrap)
        if len(oob) < 2:
            continue
        drops[t] = 0.0
        # columns the tree never splits on cannot change its predictions
        split_on = tree.tree_.feature
        used = np.unique(split_on[split_on >= 0])
        if not len(used):
            continue
        X_oob, y_oob = X[oob], codes[oob]
        baseline = np.mean(tree.predict(X_oob) == y_oob)
        m = len(oob)
        # each used column permuted in its own block, one predict call per tree
        blocks = np.tile(X_oob, (len(used), 1))
        for b, j in enumerate(used):
            blocks[b * m : (b + 1) * m, j] = gen.permutation(X_oob[:, j])
        permuted = tree.predict(blocks).reshape(len(used), m) == y_oob
        drops[t, used] = baseline - permuted.mean(axis=1)
    mean = np.nanmean(drops, axis=0)
    sd = np.nanstd(drops, axis=0, ddof=1)
    return np.divide(mean, sd, out=np.zeros(p), where=sd > 0)


def _importances(
    X: np.ndarray,
    y: np.ndarray,
    n_estimators: int,
    seed: int,
    importance: Literal["permutation", "gini"],
    n_jobs: int,
) -> np.ndarray:
    forest = RandomForestClassifier(n_estimators=n_estimators, random_state=seed, n_jobs=n_jobs)
    forest.fit(X, y)
    if importance == "gini":
        return forest.feature_importances_
    return _oob_permutation_importance(forest, X, y, seed)


def boruta(
    X: FeatureMatrix | pd.DataFrame,
    y: np.ndarray | pd.Series,
    max_runs: int = 100,
    alpha: float = 0.01,
    seed: int = 0,
    n_estimators: int = 500,
    importance: Literal["permutation", "gini"] = "permutation",
    n_jobs: Optional[int] = None,
) -> BorutaDecision:
    """
    All-relevant selection against shuffled shadow copies. Each run scores a hit for every
    undecided feature whose importance beats the best shadow; binomial tests on the hit counts,
    Bonferroni-corrected over all features, confirm or reject. Undecided after max_runs stays tentative.
    """
    values = X.values if isinstance(X, FeatureMatrix) else X
    data = values.to_numpy(dtype=float)
    labels = np.asarray(y)
    if not np.isfinite(data).all():
        raise ArgumentError("Boruta requires a finite feature matrix; impute first")
    if len(np.unique(labels)) < 2:
        raise ArgumentError("Boruta needs at least two classes in y")
    if max_runs < 1:
        raise ArgumentError(f"max_runs must be >= 1, got {max_runs}")

    names = list(values.columns)
    n_feat = len(names)
    decision = np.zeros(n_feat, dtype=int)  # 0 tentative, 1 confirmed, -1 rejected
    hits = np.zeros(n_feat, dtype=int)
    history = []
    shadow_max = []
    n_jobs = n_jobs or settings.THREADS

    run = 0
    for run in tqdm(range(1, max_runs + 1), desc="boruta", leave=False, disable=not logger.isEnabledFor(logging.INFO)):
        active = np.flatnonzero(decision >= 0)
        current = data[:, active]
        shadows = current.copy()
        while shadows.shape[1] < MIN_SHADOWS:
            shadows = np.hstack([shadows, shadows])
        gen = rng(seed, run)
        shadows = np.column_stack([gen.permutation(col) for col in shadows.T])

        imp = _importances(
            np.hstack([current, shadows]), labels, n_estimators, sub_seed(seed, run), importance, n_jobs
        )
        imp_real = np.full(n_feat, np.nan)
        imp_real[active] = imp[: len(active)]
        best_shadow = float(imp[len(active) :].max())
        history.append(imp_real)
        shadow_max.append(best_shadow)
        hits[active[imp[: len(active)] > best_shadow]] += 1

        undecided = decision == 0
        p_accept = stats.binom.sf(hits - 1, run, 0.5) * n_feat
        p_reject = stats.binom.cdf(hits, run, 0.5) * n_feat
        decision[undecided & (p_accept < alpha)] = 1
        decision[undecided & (p_reject < alpha)] = -1
        if not (decision == 0).any():
            break

    status = {
        name: {1: FeatureStatus.confirmed, -1: FeatureStatus.rejected, 0: FeatureStatus.tentative}[int(d)]
        for name, d in zip(names, decision)
    }
    logger.info(
        "Boruta after %d runs: %d confirmed, %d tentative, %d rejected",
        run,
        int((decision == 1).sum()),
        int((decision == 0).sum()),
        int((decision == -1).sum()),
    )
    return BorutaDecision(
        features=names,
        status=status,
        hit_counts={name: int(h) for name, h in zip(names, hits)},
        importance_history=np.vstack(history) if history else np.zeros((0, n_feat)),
        shadow_max_history=shadow_max,
        max_runs=max_runs,
        alpha=alpha,
        n_runs=run,
        seed=seed,
    )


def tentative_rough_fix(decision: BorutaDecision) -> BorutaDecision:
    """Confirm a tentative feature iff its median importance beats the median best-shadow importance."""
    if not decision.tentative:
        return decision
    threshold = float(np.median(decision.shadow_max_history))
    medians = decision.median_importance()
    status = dict(decision.status)
    for name in decision.tentative:
        status[name] = FeatureStatus.confirmed if medians[name] > threshold else FeatureStatus.rejected
    return decision.model_copy(update={"status": status})


def decision_table(decision: BorutaDecision) -> pd.DataFrame:
    medians = decision.median_importance()
    return pd.DataFrame(
        [
            {
                "feature": name,
                "status": decision.status[name].value,
                "median_importance": medians[name],
                "hit_count": decision.hit_counts[name],
            }
            for name in decision.features
        ]
    )


# -----------------------
# PCA
# -----------------------
def pca_select(
    X: FeatureMatrix | pd.DataFrame,
    criterion: Literal["kaiser", "cumvar"] = "cumvar",
    tau: float = 0.95,
) -> tuple[PcaModel, pd.DataFrame]:
    """Eigendecomposition of the correlation matrix; scores keep the components the criterion retains."""
    values = (X.values if isinstance(X, FeatureMatrix) else X).astype(float)
    if not np.isfinite(values.to_numpy()).all():
        raise ArgumentError("PCA requires a finite feature matrix")
    if not 0 < tau <= 1:
        raise ArgumentError(f"tau must lie in (0, 1], got {tau}")

    sd = values.std(ddof=1)
    dropped = [c for c in values.columns if not sd[c] > 0]
    if dropped:
        logger.warning("Dropping %d constant features before PCA", len(dropped))
        values = values.drop(columns=dropped)
    if values.shape[1] == 0:
        raise ArgumentError("No non-constant features left for PCA")

    means = values.mean().to_numpy()
    scales = values.std(ddof=1).to_numpy()
    Z = (values.to_numpy() - means) / scales
    corr = np.atleast_2d(np.corrcoef(Z, rowvar=False))
    eigenvalues, vectors = np.linalg.eigh(corr)
    order = np.argsort(eigenvalues)[::-1]
    eigenvalues = np.clip(eigenvalues[order], 0.0, None)
    vectors = vectors[:, order]
    # sign convention: largest-magnitude loading of each component is positive
    flip = np.sign(vectors[np.argmax(np.abs(vectors), axis=0), np.arange(vectors.shape[1])])
    vectors = vectors * np.where(flip == 0, 1.0, flip)

    cumulative = np.cumsum(eigenvalues) / eigenvalues.sum()
    retained_kaiser = int((eigenvalues > 1).sum())
    retained_95 = int(np.searchsorted(cumulative, 0.95 - 1e-12) + 1)
    model = PcaModel(
        features=list(values.columns),
        means=means,
        scales=scales,
        loadings=vectors,
        eigenvalues=eigenvalues,
        cumulative_variance=cumulative,
        retained_kaiser=retained_kaiser,
        retained_95=min(retained_95, len(eigenvalues)),
        dropped=dropped,
    )
    if criterion == "kaiser":
        m = max(retained_kaiser, 1)
    else:
        m = int(min(np.searchsorted(cumulative, tau - 1e-12) + 1, len(eigenvalues)))
    logger.info("PCA: %d components by Kaiser, %d for 95%% variance", retained_kaiser, model.retained_95)
    return model, pca_transform(model, values, m)


def pca_transform(model: PcaModel, X: FeatureMatrix | pd.DataFrame, n_components: int) -> pd.DataFrame:
    values = (X.values if isinstance(X, FeatureMatrix) else X)[model.features].astype(float)
    Z = (values.to_numpy() - model.means) / model.scales
    scores = Z @ model.loadings[:, :n_components]
    return pd.DataFrame(scores, index=values.index, columns=[f"PC{i + 1}" for i in range(n_components)])


def scree_table(model: PcaModel) -> pd.DataFrame:
    total = model.eigenvalues.sum()
    return pd.DataFrame(
        {
            "component": np.arange(1, len(model.eigenvalues) + 1),
            "eigenvalue": model.eigenvalues,
            "variance_ratio": model.eigenvalues / total,
            "cumulative": model.cumulative_variance,
        }
    )
