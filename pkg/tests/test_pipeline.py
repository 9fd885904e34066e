import pytest

from facedyn.core.config import CvConfig, NmfConfig, PipelineConfig, SelectConfig
from facedyn.schemas.learn import ClassifierSpec
from facedyn.schemas.synth import DegradationConfig, default_profile
from facedyn.services.pipeline_service import PipelineService


def detection_config(**updates) -> PipelineConfig:
    config = PipelineConfig(
        nmf=NmfConfig(rank=3, ranks=[3], restarts=1),
        select=SelectConfig(max_runs=30, n_estimators=200),
        classifiers=[ClassifierSpec(algorithm="random_forest", n_estimators=300, seed=41)],
        cv=CvConfig(k=3, repeats=1),
    )
    return config.model_copy(update=updates)


def metrics_of(entry: dict) -> dict[str, dict]:
    return {m["metric"]: m for m in entry["metrics"]}


@pytest.mark.slow
def test_default_profile_detects_face_swaps(tmp_path):
    service = PipelineService(detection_config(), tmp_path)
    service.pipeline()
    rf = metrics_of(service.artifacts.read_json("eval/report.json")["random_forest"])
    assert rf["roc_auc"]["estimate"] >= 0.65
    assert rf["accuracy"]["test"]["p"] < 0.05


@pytest.mark.slow
def test_burst_degradation_over_seeds(tmp_path):
    gaps, drops = [], []
    for seed in range(5):
        profile = default_profile(n_pairs=120, seed=seed, degradation=DegradationConfig(scope="bursts"))
        service = PipelineService(detection_config(synth=profile), tmp_path / f"seed{seed}")
        service.synth()
        service.ingest()
        service.nmf(scan=False)
        service.features()
        service.select()
        service.train()
        service.eval(strata="emotion")
        strata = service.artifacts.read_json("eval/report.json")["random_forest"]["strata"]
        emotive = metrics_of(strata["emotion"])["accuracy"]["estimate"]
        quiet = metrics_of(strata["no_emotion"])["accuracy"]["estimate"]
        gaps.append(emotive - quiet)
        drops.append(service.valence()["accuracy_drop"])
    # emotive fakes carry the degradation, and the valence model loses accuracy on them
    assert sum(gap > 0 for gap in gaps) >= 4, gaps
    assert sum(drop > 0 for drop in drops) >= 4, drops
