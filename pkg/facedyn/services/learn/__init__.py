from facedyn.services.learn.classifiers import (
    build_estimator,
    importance_ranking,
    permutation_importances,
    predict,
    train_classifier,
)
from facedyn.services.learn.cv import (
    downsample_balance,
    group_plan,
    kfold_plan,
    lopo_cv,
    loso_cv,
    repeated_kfold,
)

__all__ = [
    "build_estimator",
    "downsample_balance",
    "group_plan",
    "importance_ranking",
    "kfold_plan",
    "lopo_cv",
    "loso_cv",
    "permutation_importances",
    "predict",
    "repeated_kfold",
    "train_classifier",
]
