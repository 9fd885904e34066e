from typing import Callable

import numpy as np
from pydantic import BaseModel

from facedyn.schemas.features import FeatureDescriptor, Transform
from facedyn.schemas.nmf import RepresentativeSet
from facedyn.services.features import metrics


class RegistryEntry(BaseModel):
    transform: Transform
    metric: str
    family: str
    anchored: bool = False
    enabled: bool = True


def _entry(name: str, family: str, anchored: bool = False, enabled: bool = True) -> RegistryEntry:
    transform, metric = Transform.none, name
    for prefix in (Transform.diff1, Transform.diff2):
        if name.startswith(f"{prefix.value}_"):
            transform, metric = prefix, name[len(prefix.value) + 1 :]
    return RegistryEntry(transform=transform, metric=metric, family=family, anchored=anchored, enabled=enabled)


def _permutation_family(series: np.ndarray, window: int) -> dict[str, float]:
    return {"permutation_entropy": metrics.permutation_entropy(series)}


FAMILIES: dict[str, Callable[[np.ndarray, int], dict[str, float]]] = {
    "acf": lambda x, w: metrics.acf_features(x),
    "pacf": lambda x, w: metrics.pacf_features(x),
    "shift": metrics.shift_features,
    "entropy": lambda x, w: metrics.entropy_suite(x),
    "long_range": metrics.long_range_suite,
    "shape": lambda x, w: metrics.shape_features(x),
    "permutation": _permutation_family,
}

# 37 enabled entries per AU; `anchored` marks the metrics the detection study names explicitly.
REGISTRY: list[RegistryEntry] = [
    _entry("acf1", "acf", anchored=True),
    _entry("acf10", "acf", anchored=True),
    _entry("diff1_acf1", "acf", anchored=True),
    _entry("diff1_acf10", "acf", anchored=True),
    _entry("diff2_acf1", "acf", anchored=True),
    _entry("diff2_acf10", "acf", anchored=True),
    _entry("pacf5", "pacf", anchored=True),
    _entry("diff1_pacf5", "pacf", anchored=True),
    _entry("diff2_pacf5", "pacf", anchored=True),
    _entry("lumpiness", "shift", anchored=True),
    _entry("stability", "long_range"),
    _entry("max_kl_shift", "shift", anchored=True),
    _entry("time_kl_shift", "shift"),
    _entry("max_level_shift", "shift"),
    _entry("time_level_shift", "shift"),
    _entry("max_var_shift", "shift"),
    _entry("time_var_shift", "shift"),
    _entry("shannon_entropy", "entropy", anchored=True),
    _entry("approx_entropy", "entropy", anchored=True),
    _entry("sample_entropy", "entropy", anchored=True),
    _entry("spectral_entropy", "entropy", anchored=True),
    _entry("diff1_approx_entropy", "entropy"),
    _entry("diff1_sample_entropy", "entropy"),
    _entry("diff1_spectral_entropy", "entropy"),
    _entry("hurst", "long_range", anchored=True),
    _entry("trend_strength", "long_range", anchored=True),
    _entry("kpss_stat", "long_range", anchored=True),
    _entry("adf_stat", "long_range", anchored=True),
    _entry("lz_complexity", "long_range", anchored=True),
    _entry("diff1_lz_complexity", "long_range"),
    _entry("crossing_points", "shape"),
    _entry("flat_spots", "shape"),
    _entry("arch_stat", "shape"),
    _entry("std1st_der", "shape"),
    _entry("linearity", "shape"),
    _entry("curvature", "shape"),
    _entry("e_acf1", "shape"),
    _entry("permutation_entropy", "permutation", anchored=True, enabled=False),
]


def default_registry(include_permutation_entropy: bool = False) -> list[RegistryEntry]:
    return [e for e in REGISTRY if e.enabled or (include_permutation_entropy and e.metric == "permutation_entropy")]


def descriptors(reps: RepresentativeSet, registry: list[RegistryEntry]) -> list[FeatureDescriptor]:
    """Column layout: AUs in component order, registry order within each AU."""
    return [
        FeatureDescriptor(transform=e.transform, metric=e.metric, au=au, anchored=e.anchored)
        for au in dict.fromkeys(reps.aus)
        for e in registry
    ]
