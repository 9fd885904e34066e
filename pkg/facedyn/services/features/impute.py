import logging
import warnings
from typing import Optional

import numpy as np
import pandas as pd
from sklearn.ensemble import RandomForestRegressor

from facedyn.core.config import settings
from facedyn.core.seeding import sub_seed
from facedyn.schemas.features import FeatureMatrix

logger = logging.getLogger(__name__)

MAX_ITER = 10
STOP_DELTA = 1e-3
N_TREES = 100
MIN_OBSERVED = 5


def _oob_nrmse(forest: RandomForestRegressor, y: np.ndarray) -> float:
    sd = y.std()
    if sd == 0 or not hasattr(forest, "oob_prediction_"):
        return 0.0
    pred = forest.oob_prediction_
    ok = np.isfinite(pred)
    return float(np.sqrt(np.mean((y[ok] - pred[ok]) ** 2)) / sd) if ok.any() else 0.0


def impute_nonfinite(
    matrix: FeatureMatrix,
    seed: int = 0,
    reference: Optional[FeatureMatrix] = None,
    n_jobs: Optional[int] = None,
) -> FeatureMatrix:
    """
    Iterative random-forest imputation of nan/±inf cells. Cells start at the column median of
    observed values; each affected column is then regressed on all others and its missing cells
    re-predicted, until the mean out-of-bag NRMSE changes by less than 1e-3 or after 10 rounds.
    Imputed values are clamped to the observed column range.

    With `reference` (an already imputed training matrix) its rows join the regression data but
    are never modified, so held-out rows are imputed from training structure.
    """
    values = matrix.values.astype(float)
    finite = np.isfinite(values.to_numpy())
    missing = pd.DataFrame(~finite, index=values.index, columns=values.columns)
    dropped = dict(matrix.dropped_features)

    n_ref = 0
    if reference is not None:
        ref = reference.values[values.columns].astype(float)
        n_ref = len(ref)
        values = pd.concat([ref, values])
        missing = pd.concat([pd.DataFrame(False, index=ref.index, columns=ref.columns), missing])

    observed = values.where(~missing)
    empty = [c for c in values.columns if observed[c].isna().all()]
    for name in empty:
        dropped[name] = "no finite values"
    if empty:
        logger.warning("Dropping %d features with no finite values", len(empty))
        values = values.drop(columns=empty)
        missing = missing.drop(columns=empty)
        observed = observed.drop(columns=empty)

    if not missing.to_numpy().any():
        return FeatureMatrix(
            values=values.iloc[n_ref:],
            imputed_mask=missing.iloc[n_ref:],
            dropped_features=dropped,
            oob_nrmse=None,
        )

    lo, hi = observed.min(), observed.max()
    X = observed.fillna(observed.median()).to_numpy()
    mask = missing.to_numpy()
    targets = sorted(np.flatnonzero(mask.any(axis=0)), key=lambda j: mask[:, j].sum())

    previous = np.inf
    nrmse = np.nan
    for it in range(MAX_ITER):
        errors = []
        for j in targets:
            rows = mask[:, j]
            y = X[~rows, j]
            others = np.delete(X, j, axis=1)
            if len(y) < MIN_OBSERVED or others.shape[1] == 0:
                continue
            forest = RandomForestRegressor(
                n_estimators=N_TREES,
                oob_score=True,
                random_state=sub_seed(seed, it, j),
                n_jobs=n_jobs or settings.THREADS,
            )
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", UserWarning)
                forest.fit(others[~rows], y)
            X[rows, j] = np.clip(forest.predict(others[rows]), lo.iloc[j], hi.iloc[j])
            errors.append(_oob_nrmse(forest, y))
        nrmse = float(np.mean(errors)) if errors else 0.0
        logger.debug("Imputation round %d: OOB NRMSE %.4f", it + 1, nrmse)
        if abs(previous - nrmse) < STOP_DELTA:
            break
        previous = nrmse

    imputed = pd.DataFrame(X, index=values.index, columns=values.columns)
    logger.info("Imputed %d non-finite cells (OOB NRMSE %.4f)", int(mask[n_ref:].sum()), nrmse)
    return FeatureMatrix(
        values=imputed.iloc[n_ref:],
        imputed_mask=missing.iloc[n_ref:],
        dropped_features=dropped,
        oob_nrmse=nrmse,
    )
