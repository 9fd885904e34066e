# facedyn/repositories/artifact_repo.py

import logging
from enum import Enum
from pathlib import Path
from typing import Any, Optional

import joblib
import numpy as np
import orjson
import pandas as pd
from pydantic import BaseModel

from facedyn.core.errors import DataError
from facedyn.schemas.features import FeatureMatrix
from facedyn.schemas.learn import ClassifierSpec, PredictionSet, TrainedClassifier
from facedyn.schemas.nmf import NmfModel, RepresentativeSet
from facedyn.schemas.select import BorutaDecision

logger = logging.getLogger(__name__)

JSON_OPTIONS = orjson.OPT_SORT_KEYS | orjson.OPT_SERIALIZE_NUMPY | orjson.OPT_NON_STR_KEYS | orjson.OPT_INDENT_2


def _default(obj: Any) -> Any:
    if isinstance(obj, BaseModel):
        return obj.model_dump()
    if isinstance(obj, np.ndarray):
        return np.ascontiguousarray(obj).tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, (Path, Enum)):
        return str(obj.value if isinstance(obj, Enum) else obj)
    if isinstance(obj, pd.DataFrame):
        return obj.to_dict(orient="records")
    raise TypeError(f"Cannot serialize {type(obj).__name__}")


def dumps(obj: Any) -> bytes:
    if isinstance(obj, BaseModel):
        obj = obj.model_dump()
    return orjson.dumps(obj, default=_default, option=JSON_OPTIONS)


class ArtifactRepository:
    """Reports, tables and fitted models under the run's output directory."""

    def __init__(self, root: Path):
        self.root = Path(root)

    def path(self, name: str) -> Path:
        target = self.root / name
        target.parent.mkdir(parents=True, exist_ok=True)
        return target

    def _existing(self, name: str) -> Path:
        source = self.root / name
        if not source.exists():
            raise DataError(f"Artifact not found: {source}")
        return source

    # -----------------------
    # Documents and tables
    # -----------------------
    def write_json(self, name: str, obj: Any) -> Path:
        target = self.path(name)
        target.write_bytes(dumps(obj))
        return target

    def read_json(self, name: str) -> Any:
        return orjson.loads(self._existing(name).read_bytes())

    def write_table(self, name: str, df: pd.DataFrame, index: bool = False) -> Path:
        target = self.path(name)
        target.write_bytes(df.to_csv(index=index, na_rep="nan", float_format="%.10g").encode())
        return target

    def read_table(self, name: str, index_col: Optional[str] = None) -> pd.DataFrame:
        return pd.read_csv(self._existing(name), index_col=index_col)

    def exists(self, name: str) -> bool:
        return (self.root / name).exists()

    def write_frame(self, name: str, df: pd.DataFrame) -> Path:
        """Per-video numeric table keyed by `video_id`."""
        return self.write_table(name, df.rename_axis("video_id"), index=True)

    def read_frame(self, name: str) -> pd.DataFrame:
        values = self.read_table(name, index_col="video_id").astype(float)
        values.index = values.index.astype(str)
        return values

    def write_predictions(self, name: str, preds: PredictionSet) -> Path:
        score = preds.score if preds.positive_class is not None else preds.proba.max(axis=1)
        df = pd.DataFrame({"id": preds.ids, "true": preds.true, "pred": preds.pred, "score": score})
        return self.write_table(name, df)

    # -----------------------
    # Domain artifacts
    # -----------------------
    def save_nmf(self, name: str, model: NmfModel, reps: RepresentativeSet) -> Path:
        return self.write_json(name, {"model": model, "representatives": reps})

    def load_nmf(self, name: str) -> tuple[NmfModel, RepresentativeSet]:
        doc = self.read_json(name)
        raw = doc["model"]
        for key in ("W", "d", "H"):
            raw[key] = np.asarray(raw[key], dtype=float)
        raw["columns"] = [tuple(c) for c in raw["columns"]]
        reps = RepresentativeSet(components={int(k): v for k, v in doc["representatives"]["components"].items()})
        return NmfModel(**raw), reps

    def save_features(self, name: str, matrix: FeatureMatrix) -> Path:
        self.write_table(f"{name}.csv", matrix.values.rename_axis("video_id"), index=True)
        self.write_table(f"{name}.imputed.csv", matrix.imputed_mask.rename_axis("video_id"), index=True)
        return self.write_json(
            f"{name}.json", {"dropped_features": matrix.dropped_features, "oob_nrmse": matrix.oob_nrmse}
        )

    def load_features(self, name: str) -> FeatureMatrix:
        values = self.read_table(f"{name}.csv", index_col="video_id").astype(float)
        values.index = values.index.astype(str)
        mask = self.read_table(f"{name}.imputed.csv", index_col="video_id").astype(bool)
        mask.index = mask.index.astype(str)
        meta = self.read_json(f"{name}.json")
        return FeatureMatrix(
            values=values, imputed_mask=mask, dropped_features=meta["dropped_features"], oob_nrmse=meta["oob_nrmse"]
        )

    def save_boruta(self, name: str, decision: BorutaDecision) -> Path:
        return self.write_json(name, decision)

    def load_boruta(self, name: str) -> BorutaDecision:
        raw = self.read_json(name)
        raw["importance_history"] = np.asarray(raw["importance_history"], dtype=float).reshape(
            -1, len(raw["features"])
        )
        return BorutaDecision(**raw)

    def save_model(self, name: str, model: TrainedClassifier) -> Path:
        joblib.dump(model.estimator, self.path(f"{name}.joblib"))
        return self.write_json(f"{name}.json", model.model_dump(exclude={"estimator"}))

    def load_model(self, name: str) -> TrainedClassifier:
        meta = self.read_json(f"{name}.json")
        estimator = joblib.load(self._existing(f"{name}.joblib"))
        meta["spec"] = ClassifierSpec(**meta["spec"])
        return TrainedClassifier(estimator=estimator, **meta)
