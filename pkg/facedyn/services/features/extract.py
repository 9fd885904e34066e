import logging
from typing import Optional, Sequence

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from facedyn.core.config import settings
from facedyn.schemas.features import FeatureMatrix, Transform
from facedyn.schemas.ingest import AuRecording
from facedyn.schemas.nmf import RepresentativeSet
from facedyn.services.features import metrics
from facedyn.services.features.registry import FAMILIES, RegistryEntry, default_registry, descriptors

logger = logging.getLogger(__name__)


def _transformed(series: np.ndarray, transform: Transform) -> np.ndarray:
    if transform is Transform.none:
        return series
    return metrics.difference(series, 1 if transform is Transform.diff1 else 2)


def extract_features(
    recording: AuRecording,
    reps: RepresentativeSet,
    registry: Optional[list[RegistryEntry]] = None,
    window: int = 24,
) -> dict[str, float]:
    """One feature row named `[transform]_[metric]_[AU]`, each metric family evaluated once per series."""
    registry = registry if registry is not None else default_registry()
    row: dict[str, float] = {}
    for au in dict.fromkeys(reps.aus):
        base = recording.series(au)
        cache: dict[tuple[Transform, str], dict[str, float]] = {}
        for entry in registry:
            key = (entry.transform, entry.family)
            if key not in cache:
                cache[key] = FAMILIES[entry.family](_transformed(base, entry.transform), window)
            row[_name(entry, au)] = cache[key][entry.metric]
    return row


def _name(entry: RegistryEntry, au: str) -> str:
    prefix = "" if entry.transform is Transform.none else f"{entry.transform.value}_"
    return f"{prefix}{entry.metric}_{au}"


def extract_matrix(
    recordings: Sequence[AuRecording],
    reps: RepresentativeSet,
    registry: Optional[list[RegistryEntry]] = None,
    window: int = 24,
    n_jobs: Optional[int] = None,
) -> FeatureMatrix:
    """Raw feature matrix, sentinels intact; rows follow the input order."""
    registry = registry if registry is not None else default_registry()
    rows = Parallel(n_jobs=n_jobs or settings.THREADS)(
        delayed(extract_features)(rec, reps, registry, window) for rec in recordings
    )
    columns = [d.name for d in descriptors(reps, registry)]
    values = pd.DataFrame(rows, index=pd.Index([r.video_id for r in recordings], name="video_id"), columns=columns)
    n_sentinel = int((~np.isfinite(values.to_numpy(dtype=float))).sum())
    logger.info("Extracted %d features for %d videos (%d non-finite cells)", len(columns), len(values), n_sentinel)
    return FeatureMatrix.from_frame(values)


def drop_zero_variance(matrix: FeatureMatrix) -> FeatureMatrix:
    """Remove columns whose finite training values have zero standard deviation."""
    dropped = dict(matrix.dropped_features)
    keep = []
    for name in matrix.names:
        col = matrix.values[name].to_numpy(dtype=float)
        finite = col[np.isfinite(col)]
        if len(finite) > 1 and finite.std() > 0:
            keep.append(name)
        else:
            dropped[name] = "zero standard deviation in training set"
    if len(keep) < len(matrix.names):
        logger.warning("Dropped %d zero-variance features", len(matrix.names) - len(keep))
    return matrix.select(keep).model_copy(update={"dropped_features": dropped})
