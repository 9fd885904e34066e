from facedyn.services.features.extract import drop_zero_variance, extract_features, extract_matrix
from facedyn.services.features.impute import impute_nonfinite
from facedyn.services.features.registry import REGISTRY, default_registry, descriptors
from facedyn.services.features.transitions import (
    fit_transition_thresholds,
    transition_events,
    transition_feature_matrix,
)

__all__ = [
    "REGISTRY",
    "default_registry",
    "descriptors",
    "drop_zero_variance",
    "extract_features",
    "extract_matrix",
    "fit_transition_thresholds",
    "impute_nonfinite",
    "transition_events",
    "transition_feature_matrix",
]
