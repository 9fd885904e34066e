from typing import Optional

import numpy as np
import pytest
import yaml
from click.testing import CliRunner

from facedyn.schemas.ingest import AU_NAMES, AuRecording, EmotionFlag, Label, Valence
from facedyn.schemas.synth import default_profile


def make_recording(
    video_id: str,
    label: str = "real",
    pair_id: Optional[str] = None,
    au: Optional[np.ndarray] = None,
    n_frames: int = 8,
    confidence: float = 0.95,
    success: int = 1,
    valence: str = "neutral",
) -> AuRecording:
    au = np.zeros((n_frames, len(AU_NAMES))) if au is None else np.asarray(au, dtype=float)
    n = len(au)
    return AuRecording(
        frame_index=np.arange(1, n + 1),
        timestamp=np.arange(n) / 24.0,
        confidence=np.full(n, confidence),
        success=np.full(n, success, dtype=int),
        au=au,
        video_id=video_id,
        label=Label(label),
        pair_id=pair_id or video_id.rsplit("_", 1)[0],
        emotion_flag=EmotionFlag.no if valence == "neutral" else EmotionFlag.yes,
        valence=Valence(valence),
    )


def make_pairs(n_pairs: int, valence: str = "neutral", prefix: str = "p", **kwargs) -> list[AuRecording]:
    recs = []
    for i in range(n_pairs):
        pid = f"{prefix}{i:03d}"
        for label in ("real", "fake"):
            recs.append(make_recording(f"{pid}_{label}", label, pid, valence=valence, **kwargs))
    return recs


@pytest.fixture
def small_profile():
    return default_profile(n_pairs=12, seed=5)


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def fast_config(tmp_path):
    """Pipeline config small enough for end-to-end runs in seconds."""
    config = {
        "nmf": {"rank": 3, "ranks": [2, 3], "restarts": 1, "max_iter": 150},
        "select": {"max_runs": 12, "n_estimators": 60, "importance": "gini"},
        "classifiers": [
            {"algorithm": "random_forest", "n_estimators": 60, "seed": 3},
            {"algorithm": "logistic_regression", "seed": 3},
        ],
        "cv": {"k": 3, "repeats": 1},
        "synth": {"n_pairs": 24, "seed": 5},
    }
    path = tmp_path / "facedyn.yaml"
    path.write_text(yaml.safe_dump(config))
    return path
