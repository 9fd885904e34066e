from types import SimpleNamespace

import numpy as np
import orjson
import pandas as pd
import pytest
import yaml
from click.testing import CliRunner

from facedyn.main import app
from facedyn.repositories.artifact_repo import ArtifactRepository
from facedyn.schemas.learn import PredictionSet
from facedyn.services import pipeline_service
from facedyn.services.pipeline_service import PipelineService

SUBCOMMANDS = [
    "synth",
    "ingest",
    "nmf",
    "features",
    "select",
    "train",
    "eval",
    "valence",
    "human",
    "pipeline",
    "report",
]


def invoke(runner, config, out, *args):
    return runner.invoke(app, ["--config", str(config), "--output-dir", str(out), *args])


def test_help_lists_every_stage(runner):
    result = runner.invoke(app, ["--help"])
    assert result.exit_code == 0
    for name in SUBCOMMANDS:
        assert name in result.output


def test_unknown_subcommand_is_a_usage_error(runner):
    result = runner.invoke(app, ["deploy"])
    assert result.exit_code == 2


def test_missing_config_is_a_config_error(runner, tmp_path):
    result = invoke(runner, tmp_path / "absent.yaml", tmp_path / "out", "ingest")
    assert result.exit_code == 2


def test_invalid_config_value(runner, tmp_path):
    config = tmp_path / "bad.yaml"
    config.write_text(yaml.safe_dump({"nmf": {"rank": 40}}))
    result = invoke(runner, config, tmp_path / "out", "ingest")
    assert result.exit_code == 2


def test_ingest_without_data_is_a_data_error(runner, fast_config, tmp_path):
    result = invoke(runner, fast_config, tmp_path / "out", "ingest")
    assert result.exit_code == 3
    assert "Manifest not found" in result.output


def test_synth_then_ingest(runner, fast_config, tmp_path):
    out = tmp_path / "out"
    result = invoke(runner, fast_config, out, "synth", "--pairs", "6")
    assert result.exit_code == 0, result.output
    assert (out / "data" / "manifest.csv").exists()
    result = invoke(runner, fast_config, out, "ingest")
    assert result.exit_code == 0, result.output
    assert "Kept 12 of 12 recordings" in result.output
    report = orjson.loads((out / "ingest" / "report.json").read_bytes())
    assert report["counts"]["train"] + report["counts"]["test"] == 12


def test_seed_rekeys_every_stage(runner, fast_config, tmp_path):
    plain, seeded = tmp_path / "plain", tmp_path / "seeded"
    assert invoke(runner, fast_config, plain, "synth", "--pairs", "2").exit_code == 0
    assert runner.invoke(
        app, ["--config", str(fast_config), "--output-dir", str(seeded), "--seed", "100", "synth", "--pairs", "2"]
    ).exit_code == 0
    a = orjson.loads((plain / "synth" / "report.json").read_bytes())
    b = orjson.loads((seeded / "synth" / "report.json").read_bytes())
    assert a["config_hash"] != b["config_hash"]
    assert b["seeds"]["synth"] == 100
    assert b["seeds"]["split"] == 101
    assert a["seeds"]["synth"] == 5


def test_report_before_eval_fails(runner, fast_config, tmp_path):
    result = invoke(runner, fast_config, tmp_path / "out", "report")
    assert result.exit_code == 3


def test_transition_models_need_transition_features(runner, fast_config, tmp_path):
    result = invoke(runner, fast_config, tmp_path / "out", "train", "--feature-set", "transitions")
    assert result.exit_code == 3
    assert "features --transitions" in result.output


@pytest.fixture
def fixed_test_predictions(monkeypatch, tmp_path):
    """Eval over a stubbed 94-video test split: 34 of 47 fakes and 28 of 47 reals correct."""
    ids = [f"v{i:03d}" for i in range(94)]
    true = ["fake"] * 47 + ["real"] * 47
    pred = ["fake"] * 34 + ["real"] * 13 + ["fake"] * 19 + ["real"] * 28
    p_fake = np.where(np.asarray(pred) == "fake", 0.8, 0.2)
    preds = PredictionSet(
        ids=ids,
        true=true,
        pred=pred,
        classes=["fake", "real"],
        proba=np.column_stack([p_fake, 1.0 - p_fake]),
        positive_class="fake",
    )
    table = pd.DataFrame({"f": np.zeros(94)}, index=ids)
    meta = pd.DataFrame({"label": true, "emotion_flag": "no", "valence": "neutral"}, index=ids)
    monkeypatch.setattr(PipelineService, "feature_table", lambda self, feature_set, side: table)
    monkeypatch.setattr(PipelineService, "_metadata", lambda self, side: meta)
    monkeypatch.setattr(ArtifactRepository, "load_model", lambda self, name: SimpleNamespace(feature_names=["f"]))
    monkeypatch.setattr(pipeline_service, "predict", lambda model, X, y: preds)

    config = tmp_path / "facedyn.yaml"
    config.write_text(yaml.safe_dump({"classifiers": [{"algorithm": "random_forest", "seed": 3}]}))
    return config


@pytest.mark.parametrize("flag", ["--paper-compat", "--full-n-ci"])
def test_eval_full_n_intervals(runner, fixed_test_predictions, tmp_path, flag):
    out = tmp_path / "out"
    result = invoke(runner, fixed_test_predictions, out, "eval", flag)
    assert result.exit_code == 0, result.output
    report = orjson.loads((out / "eval/report.json").read_bytes())
    assert report["full_n_ci"]
    metrics = {m["metric"]: m for m in report["random_forest"]["metrics"]}
    sens, spec = metrics["sensitivity"]["ci"], metrics["specificity"]["ci"]
    assert (sens["lo"], sens["hi"]) == (pytest.approx(0.625, abs=0.002), pytest.approx(0.803, abs=0.002))
    assert (spec["lo"], spec["hi"]) == (pytest.approx(0.495, abs=0.002), pytest.approx(0.690, abs=0.002))


def test_eval_default_intervals_use_class_sizes(runner, fixed_test_predictions, tmp_path):
    out = tmp_path / "out"
    assert invoke(runner, fixed_test_predictions, out, "eval").exit_code == 0
    report = orjson.loads((out / "eval/report.json").read_bytes())
    sens = {m["metric"]: m for m in report["random_forest"]["metrics"]}["sensitivity"]
    assert sens["n"] == 47
    assert sens["ci"]["hi"] - sens["ci"]["lo"] > 0.803 - 0.625


# ----- End to end -----
@pytest.fixture(scope="module")
def pipeline_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("pipeline")
    config = root / "facedyn.yaml"
    config.write_text(
        yaml.safe_dump(
            {
                "nmf": {"rank": 3, "ranks": [2, 3], "restarts": 1, "max_iter": 150},
                "select": {"max_runs": 12, "n_estimators": 60, "importance": "gini"},
                "classifiers": [
                    {"algorithm": "random_forest", "n_estimators": 60, "seed": 3},
                    {"algorithm": "logistic_regression", "seed": 3},
                ],
                "cv": {"k": 3, "repeats": 1},
                "synth": {"n_pairs": 40, "seed": 5},
            }
        )
    )
    out = root / "out"
    result = invoke(CliRunner(), config, out, "pipeline")
    assert result.exit_code == 0, result.output
    return config, out


@pytest.mark.slow
def test_pipeline_writes_artifacts(pipeline_run):
    _, out = pipeline_run
    for name in (
        "ingest/report.json",
        "nmf/model.json",
        "nmf/rank_scan.csv",
        "features/train.csv",
        "features/transitions_train.csv",
        "select/boruta.json",
        "select/pca_train.csv",
        "select/pca_test.csv",
        "models/random_forest.joblib",
        "eval/report.json",
        "eval/predictions_logistic_regression.csv",
        "report/summary.json",
        "report/importance.csv",
        "plots/roc.svg",
    ):
        assert (out / name).exists(), name
    summary = orjson.loads((out / "report/summary.json").read_bytes())
    assert set(summary["auc"]) == {"random_forest", "logistic_regression"}
    evaluation = orjson.loads((out / "eval/report.json").read_bytes())
    assert "strata" in evaluation["random_forest"]


@pytest.mark.slow
def test_report_is_byte_identical_on_rerun(pipeline_run, runner):
    config, out = pipeline_run
    first = {p: p.read_bytes() for p in (out / "plots").glob("*.svg")}
    first[out / "report/summary.json"] = (out / "report/summary.json").read_bytes()
    assert invoke(runner, config, out, "report").exit_code == 0
    for path, body in first.items():
        assert path.read_bytes() == body, path.name


@pytest.mark.slow
def test_valence_stage(pipeline_run, runner):
    config, out = pipeline_run
    result = invoke(runner, config, out, "valence")
    assert result.exit_code == 0, result.output
    report = orjson.loads((out / "valence/report.json").read_bytes())
    assert report["balanced"]
    assert len(set(report["train_counts"].values())) == 1


@pytest.mark.slow
def test_human_stage_with_synthetic_raters(pipeline_run, runner):
    config, out = pipeline_run
    result = invoke(runner, config, out, "human", "--participants", "6", "--random-raters", "0.5")
    assert result.exit_code == 0, result.output
    report = orjson.loads((out / "human/report.json").read_bytes())
    assert report["n_participants"] == 6
    assert {"predict_loso", "predict_lopo"} <= set(report)
    assert (out / "human/ratings.csv").exists()


@pytest.mark.slow
@pytest.mark.parametrize("feature_set", ["pca", "transitions"])
def test_alternative_feature_sets(pipeline_run, runner, feature_set):
    config, out = pipeline_run
    result = invoke(runner, config, out, "train", "--feature-set", feature_set)
    assert result.exit_code == 0, result.output
    result = invoke(runner, config, out, "eval", "--feature-set", feature_set)
    assert result.exit_code == 0, result.output

    trained = orjson.loads((out / f"train/report_{feature_set}.json").read_bytes())
    model = orjson.loads((out / f"models/random_forest_{feature_set}.json").read_bytes())
    evaluation = orjson.loads((out / f"eval/report_{feature_set}.json").read_bytes())
    assert trained["feature_set"] == evaluation["feature_set"] == feature_set
    assert model["feature_names"] == trained["features"]
    if feature_set == "pca":
        assert all(name.startswith("PC") for name in trained["features"])
    else:
        assert "event_count" in trained["features"]
    assert "roc_auc" in {m["metric"] for m in evaluation["random_forest"]["metrics"]}
    # the Boruta models stay in place
    assert (out / "models/random_forest.json").exists()


@pytest.mark.slow
def test_report_ranks_forest_importances(pipeline_run):
    _, out = pipeline_run
    assert (out / "plots/importance.svg").exists()
    ranked = pd.read_csv(out / "report/importance.csv")
    model = orjson.loads((out / "models/random_forest.json").read_bytes())
    assert list(ranked.columns) == ["rank", "feature", "mean_decrease_accuracy", "sd"]
    assert list(ranked["rank"]) == list(range(1, len(ranked) + 1))
    assert sorted(ranked["feature"]) == sorted(model["feature_names"])
    assert ranked["mean_decrease_accuracy"].is_monotonic_decreasing
