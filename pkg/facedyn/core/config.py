import hashlib
from pathlib import Path
from typing import Literal, Optional

import orjson
import yaml
from pydantic import BaseModel, Field, ValidationError
from pydantic_settings import BaseSettings, SettingsConfigDict

from facedyn.core.errors import ConfigError
from facedyn.schemas.learn import ClassifierSpec
from facedyn.schemas.synth import SynthProfile


class Settings(BaseSettings):
    APP_NAME: str = "FaceDyn"
    THREADS: int = Field(1, ge=1)
    LOG_LEVEL: str = "INFO"
    OUTPUT_DIR: Path = Path("facedyn-out")

    model_config = SettingsConfigDict(env_prefix="FACEDYN_", env_file=".env", case_sensitive=True, extra="ignore")


settings = Settings()


class PathsConfig(BaseModel):
    data_dir: Optional[Path] = None
    manifest: Optional[Path] = None
    output_dir: Path = Path("facedyn-out")


class IngestConfig(BaseModel):
    window: int = Field(4, ge=1)
    n_frames: int = Field(241, ge=2)
    conf_thresh: float = Field(0.83, ge=0, le=1)
    succ_thresh: float = Field(0.94, ge=0, le=1)
    quality_statistic: Literal["mean", "median"] = "mean"
    exclude: list[str] = []


class SplitConfig(BaseModel):
    ratio: float = Field(0.8, gt=0, lt=1)
    seed: int = 11


class NmfConfig(BaseModel):
    rank: int = Field(3, ge=1, le=17)
    ranks: list[int] = list(range(2, 11))
    restarts: int = Field(3, ge=1)
    max_iter: int = Field(500, ge=1)
    tol: float = Field(1e-5, gt=0)
    seed: int = 23


class FeaturesConfig(BaseModel):
    window: int = Field(24, ge=2)
    include_permutation_entropy: bool = False
    seed: int = 31


class SelectConfig(BaseModel):
    max_runs: int = Field(100, ge=10)
    alpha: float = Field(0.01, gt=0, lt=1)
    n_estimators: int = Field(500, ge=10)
    importance: Literal["permutation", "gini"] = "permutation"
    rough_fix: bool = True
    seed: int = 37


class CvConfig(BaseModel):
    k: int = Field(5, ge=2)
    repeats: int = Field(3, ge=1)


class ReportConfig(BaseModel):
    formats: list[Literal["csv", "json", "svg"]] = ["csv", "json", "svg"]


def _default_classifiers() -> list[ClassifierSpec]:
    return [
        ClassifierSpec(algorithm="random_forest", seed=41),
        ClassifierSpec(algorithm="logistic_regression", seed=41),
        ClassifierSpec(algorithm="svm_rbf", seed=41),
        ClassifierSpec(algorithm="boosted_trees", seed=41),
    ]


class PipelineConfig(BaseModel):
    """Single structured configuration for every pipeline stage."""

    paths: PathsConfig = PathsConfig()
    ingest: IngestConfig = IngestConfig()
    split: SplitConfig = SplitConfig()
    nmf: NmfConfig = NmfConfig()
    features: FeaturesConfig = FeaturesConfig()
    select: SelectConfig = SelectConfig()
    classifiers: list[ClassifierSpec] = Field(default_factory=_default_classifiers)
    cv: CvConfig = CvConfig()
    synth: SynthProfile = SynthProfile()
    report: ReportConfig = ReportConfig()

    def config_hash(self) -> str:
        # paths are not part of the hash
        blob = orjson.dumps(self.model_dump(mode="json", exclude={"paths"}), option=orjson.OPT_SORT_KEYS)
        return hashlib.sha256(blob).hexdigest()

    def seeds(self) -> dict[str, int]:
        return {
            "split": self.split.seed,
            "nmf": self.nmf.seed,
            "features": self.features.seed,
            "select": self.select.seed,
            "synth": self.synth.seed,
            **{f"classifier.{spec.algorithm}": spec.seed for spec in self.classifiers},
        }

    def with_seed(self, seed: int) -> "PipelineConfig":
        """Re-key every stochastic stage from one master seed."""
        return self.model_copy(
            update={
                "split": self.split.model_copy(update={"seed": seed + 1}),
                "nmf": self.nmf.model_copy(update={"seed": seed + 2}),
                "features": self.features.model_copy(update={"seed": seed + 3}),
                "select": self.select.model_copy(update={"seed": seed + 4}),
                "synth": self.synth.model_copy(update={"seed": seed}),
                "classifiers": [spec.model_copy(update={"seed": seed + 5}) for spec in self.classifiers],
            }
        )


def load_config(path: Optional[Path]) -> PipelineConfig:
    if path is None:
        return PipelineConfig()
    try:
        raw = yaml.safe_load(Path(path).read_text()) or {}
    except FileNotFoundError:
        raise ConfigError(f"Config file not found: {path}")
    except yaml.YAMLError as e:
        raise ConfigError(f"Config file {path} is not valid YAML: {e}")
    try:
        return PipelineConfig.model_validate(raw)
    except ValidationError as e:
        raise ConfigError(f"Invalid config {path}: {e}")
