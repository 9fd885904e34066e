"""
Stage orchestration over the persisted artifacts of one output directory.

Every stage reads what earlier stages wrote, so each CLI subcommand can rerun on its own.
Reports carry the config hash and every seed.
"""

import logging
from pathlib import Path
from typing import Any, Optional

import numpy as np
import pandas as pd
from tqdm import tqdm

from facedyn.core.config import PipelineConfig
from facedyn.core.errors import ArgumentError, DataError
from facedyn.schemas.features import FeatureMatrix
from facedyn.schemas.humancmp import HumanRating
from facedyn.schemas.ingest import AuRecording, Label
from facedyn.schemas.learn import Algorithm, ClassifierSpec, PredictionSet
from facedyn.schemas.select import FeatureStatus
from facedyn.schemas.synth import FeatureLinkedRaters, HumanModel
from facedyn.repositories.artifact_repo import ArtifactRepository
from facedyn.repositories.plot_repo import PlotRepository
from facedyn.repositories.recording_repo import RecordingRepository, RecordingStore
from facedyn.services import humancmp_service, ingest_service, nmf_service, select_service, stats_service
from facedyn.services import synth_service
from facedyn.services.features import (
    default_registry,
    drop_zero_variance,
    extract_matrix,
    fit_transition_thresholds,
    impute_nonfinite,
    transition_events,
    transition_feature_matrix,
)
from facedyn.services.learn import (
    downsample_balance,
    importance_ranking,
    permutation_importances,
    predict,
    repeated_kfold,
    train_classifier,
)

logger = logging.getLogger(__name__)

POSITIVE = Label.fake.value
FEATURE_SETS = ("boruta", "pca", "transitions")


class PipelineService:
    def __init__(self, config: PipelineConfig, output_dir: Optional[Path] = None):
        self.config = config
        self.output_dir = Path(output_dir or config.paths.output_dir)
        self.artifacts = ArtifactRepository(self.output_dir)
        self.store = RecordingStore(self.output_dir / "ingest")
        self.plots = PlotRepository(self.output_dir / "plots")

    @property
    def data_dir(self) -> Path:
        return Path(self.config.paths.data_dir or self.output_dir / "data")

    def recordings_repo(self) -> RecordingRepository:
        return RecordingRepository(self.data_dir, self.config.paths.manifest)

    def write_report(self, name: str, body: dict[str, Any]) -> Path:
        return self.artifacts.write_json(
            name, {**body, "config_hash": self.config.config_hash(), "seeds": self.config.seeds()}
        )

    # -----------------------
    # synth
    # -----------------------
    def synth(self) -> Path:
        dataset = synth_service.generate_dataset(self.config.synth)
        self.recordings_repo().write_dataset(dataset.recordings, dataset.manifest)
        self.write_report("synth/report.json", {"profile": dataset.profile, "low_quality": dataset.low_quality})
        return self.data_dir

    # -----------------------
    # ingest
    # -----------------------
    def ingest(self) -> dict[str, Any]:
        cfg = self.config.ingest
        recordings = self.recordings_repo().read_all()
        kept, excluded = ingest_service.exclude_videos(recordings, cfg.exclude)
        kept, low_quality = ingest_service.quality_filter(kept, cfg.conf_thresh, cfg.succ_thresh, cfg.quality_statistic)
        excluded.update(low_quality)
        if not kept:
            raise DataError("Every recording was excluded; nothing left to analyse")

        processed = ingest_service.preprocess(kept, cfg.window, cfg.n_frames)
        split = ingest_service.split_pairs(processed, self.config.split.ratio, self.config.split.seed)
        train, test = ingest_service.apply_split(processed, split)
        params = ingest_service.fit_normalization(train)

        clamps: dict[str, int] = {}
        normalized = {}
        for side, members, train_mode in (("train", train, True), ("test", test, False)):
            out = []
            for rec in members:
                rec, n = ingest_service.normalize(rec, params, train_mode=train_mode)
                clamps[rec.video_id] = n
                out.append(rec)
            normalized[side] = out
            self.store.save(side, out)
        if any(clamps[r.video_id] for r in test):
            logger.warning("Clamped %d test cells below the training minimum", sum(clamps[r.video_id] for r in test))

        summary = {
            "n_input": len(recordings),
            "n_kept": len(kept),
            "excluded": excluded,
            "split": split,
            "normalization": params,
            "clamps": {vid: n for vid, n in sorted(clamps.items()) if n},
            "counts": {side: len(members) for side, members in normalized.items()},
        }
        self.write_report("ingest/report.json", summary)
        return summary

    def load_split(self) -> tuple[list[AuRecording], list[AuRecording]]:
        return self.store.load("train"), self.store.load("test")

    # -----------------------
    # nmf
    # -----------------------
    def nmf(self, scan: bool = True) -> dict[str, Any]:
        cfg = self.config.nmf
        train, test = self.load_split()
        V, columns = nmf_service.assemble_v(train)
        body: dict[str, Any] = {}
        if scan:
            result = nmf_service.rank_scan(V, cfg.ranks, cfg.restarts, cfg.seed, cfg.max_iter, cfg.tol)
            self.artifacts.write_table("nmf/rank_scan.csv", nmf_service.export_rank_scan(result))
            body["rank_scan"] = result

        model = nmf_service.nmf_fit(V, cfg.rank, cfg.max_iter, cfg.tol, cfg.seed, columns=columns)
        reps = nmf_service.representative_aus(model.W, model.d)
        self.artifacts.save_nmf("nmf/model.json", model, reps)
        self.artifacts.write_table("nmf/basis.csv", nmf_service.export_basis_heatmap(model), index=True)

        body.update(
            rank=model.rank,
            converged=model.converged,
            n_iter=model.n_iter,
            train_mse=model.train_mse,
            representatives=reps.components,
            reconstruction={
                "train": nmf_service.reconstruction_r2(train, model),
                "test": nmf_service.reconstruction_r2(test, model) if test else None,
            },
        )
        logger.info("Representative AUs: %s", ", ".join(reps.aus))
        self.write_report("nmf/report.json", body)
        return body

    # -----------------------
    # features
    # -----------------------
    def features(self, transitions: bool = False) -> dict[str, Any]:
        cfg = self.config.features
        _, reps = self.artifacts.load_nmf("nmf/model.json")
        train, test = self.load_split()
        registry = default_registry(cfg.include_permutation_entropy)

        raw_train = drop_zero_variance(extract_matrix(train, reps, registry, cfg.window))
        train_matrix = impute_nonfinite(raw_train, seed=cfg.seed)
        self.artifacts.save_features("features/train", train_matrix)
        body: dict[str, Any] = {
            "representatives": reps.aus,
            "n_features": len(train_matrix.names),
            "dropped": train_matrix.dropped_features,
            "oob_nrmse": train_matrix.oob_nrmse,
        }
        if test:
            raw_test = extract_matrix(test, reps, registry, cfg.window).select(train_matrix.names)
            test_matrix = impute_nonfinite(raw_test, seed=cfg.seed, reference=train_matrix)
            self.artifacts.save_features("features/test", test_matrix)
            body["n_test_imputed"] = int(test_matrix.imputed_mask.to_numpy().sum())

        if transitions:
            thresholds = fit_transition_thresholds(train, reps)
            for side, members in (("train", train), ("test", test)):
                table = transition_feature_matrix(transition_events(members, reps, thresholds))
                self.artifacts.write_frame(f"features/transitions_{side}.csv", table)
            body["transition_thresholds"] = thresholds
        self.write_report("features/report.json", body)
        return body

    def load_features(self, side: str) -> FeatureMatrix:
        return self.artifacts.load_features(f"features/{side}")

    def _metadata(self, side: str) -> pd.DataFrame:
        recs = self.store.load(side)
        return pd.DataFrame(
            {
                "label": [r.label.value for r in recs],
                "emotion_flag": [r.emotion_flag.value for r in recs],
                "valence": [r.valence.value for r in recs],
            },
            index=[r.video_id for r in recs],
        )

    # -----------------------
    # select
    # -----------------------
    def select(self) -> dict[str, Any]:
        cfg = self.config.select
        X = self.load_features("train")
        y = self._metadata("train").loc[X.values.index, "label"].to_numpy()
        decision = select_service.boruta(
            X, y, cfg.max_runs, cfg.alpha, cfg.seed, cfg.n_estimators, cfg.importance
        )
        if cfg.rough_fix:
            decision = select_service.tentative_rough_fix(decision)
        self.artifacts.save_boruta("select/boruta.json", decision)
        self.artifacts.write_table("select/decisions.csv", select_service.decision_table(decision))

        pca, scores = select_service.pca_select(X)
        self.artifacts.write_table("select/scree.csv", select_service.scree_table(pca))
        self.artifacts.write_frame("select/pca_train.csv", scores)
        if self.artifacts.exists("features/test.csv"):
            test_scores = select_service.pca_transform(pca, self.load_features("test"), scores.shape[1])
            self.artifacts.write_frame("select/pca_test.csv", test_scores)
        body = {
            "confirmed": decision.confirmed,
            "tentative": decision.tentative,
            "rejected": decision.rejected,
            "n_runs": decision.n_runs,
            "pca": {
                "retained_kaiser": pca.retained_kaiser,
                "retained_95": pca.retained_95,
                "n_scores": scores.shape[1],
                "dropped": pca.dropped,
            },
        }
        self.write_report("select/report.json", body)
        return body

    def selected_features(self) -> list[str]:
        decision = self.artifacts.load_boruta("select/boruta.json")
        names = decision.with_status(FeatureStatus.confirmed)
        if not names:
            logger.warning("Boruta confirmed no features; falling back to all %d features", len(decision.features))
            names = decision.features
        return names

    # -----------------------
    # train / eval
    # -----------------------
    @staticmethod
    def _suffix(feature_set: str = "boruta", balanced: bool = False) -> str:
        return ("" if feature_set == "boruta" else f"_{feature_set}") + ("_emotion_balanced" if balanced else "")

    def _model_name(self, spec: ClassifierSpec, balanced: bool = False, feature_set: str = "boruta") -> str:
        return f"models/{spec.algorithm.value}{self._suffix(feature_set, balanced)}"

    def feature_table(self, feature_set: str, side: str) -> pd.DataFrame:
        """
        Classifier inputs for one split: Boruta-confirmed features, PCA component scores or the
        transition-event summaries.
        """
        if feature_set == "boruta":
            return self.load_features(side).select(self.selected_features()).values
        if feature_set == "pca":
            return self.artifacts.read_frame(f"select/pca_{side}.csv")
        if feature_set == "transitions":
            name = f"features/transitions_{side}.csv"
            if not self.artifacts.exists(name):
                raise DataError(f"No transition features under {self.output_dir}; run features --transitions first")
            return self.artifacts.read_frame(name)
        raise ArgumentError(f"Unknown feature set {feature_set!r}; expected one of {', '.join(FEATURE_SETS)}")

    def train(self, balance_emotion: bool = False, feature_set: str = "boruta") -> dict[str, Any]:
        X = self.feature_table(feature_set, "train")
        names = list(X.columns)
        meta = self._metadata("train").loc[X.index]
        y = meta["label"].to_numpy()
        if balance_emotion:
            X, _ = downsample_balance(X, meta["emotion_flag"].to_numpy(), seed=self.config.split.seed)
            y = meta.loc[X.index, "label"].to_numpy()

        body: dict[str, Any] = {
            "feature_set": feature_set,
            "features": names,
            "n_train": len(X),
            "balanced_on_emotion": balance_emotion,
        }
        for spec in tqdm(self.config.classifiers, desc="train", disable=None):
            _, summary = repeated_kfold(
                X, y, spec, self.config.cv.k, self.config.cv.repeats, seed=spec.seed, positive_class=POSITIVE
            )
            model = train_classifier(spec, X, y, positive_class=POSITIVE)
            self.artifacts.save_model(self._model_name(spec, balance_emotion, feature_set), model)
            body[spec.algorithm.value] = {"cv": summary, "oob_error": model.oob_error, "best_params": model.best_params}
        suffix = self._suffix(feature_set, balance_emotion)
        self.write_report(f"train/report{suffix}.json", body)
        return body

    def _stratum_report(self, preds: PredictionSet, full_n_ci: bool) -> dict[str, Any]:
        return {
            "n": len(preds.ids),
            "metrics": stats_service.metric_reports(preds, full_n_ci=full_n_ci),
            "confusion": stats_service.confusion(preds),
        }

    def _emotion_strata(self, preds: PredictionSet, meta: pd.DataFrame) -> dict[str, Any]:
        emotive = meta.loc[preds.ids, "emotion_flag"].to_numpy() == "yes"
        groups = {"emotion": preds.subset(emotive), "no_emotion": preds.subset(~emotive)}
        out: dict[str, Any] = {}
        correct = {}
        for name, part in groups.items():
            if not part.ids:
                logger.warning("Stratum %s is empty", name)
                continue
            out[name] = self._stratum_report(part, full_n_ci=False)
            hits = int(np.sum(np.asarray(part.true) == np.asarray(part.pred)))
            correct[name] = (hits, len(part.ids))
        if len(correct) == 2:
            (ce, ne), (cn, nn) = correct["emotion"], correct["no_emotion"]
            try:
                out["fisher"] = stats_service.fisher_exact_2x2([[ce, ne - ce], [cn, nn - cn]])
            except ArgumentError as e:
                logger.warning("Fisher test skipped: %s", e.detail)
            pe, pn = ce / ne, cn / nn
            if 0 < pe < 1 and 0 < pn < 1:
                out["power"] = stats_service.cohens_h_power(pe, pn, ne, nn)
            a, b = groups["emotion"], groups["no_emotion"]
            if len(set(a.true)) == 2 and len(set(b.true)) == 2:
                out["delong"] = stats_service.delong_compare(
                    a.score, np.asarray(a.true) == POSITIVE, b.score, np.asarray(b.true) == POSITIVE, paired=False
                )
        return out

    def eval(
        self,
        strata: Optional[str] = None,
        full_n_ci: bool = False,
        balanced: bool = False,
        feature_set: str = "boruta",
    ) -> dict[str, Any]:
        X = self.feature_table(feature_set, "test")
        meta = self._metadata("test").loc[X.index]
        y = meta["label"].to_numpy()
        body: dict[str, Any] = {"n_test": len(X), "full_n_ci": full_n_ci, "strata": strata, "feature_set": feature_set}
        scores = {}
        suffix = self._suffix(feature_set, balanced)
        for spec in self.config.classifiers:
            model = self.artifacts.load_model(self._model_name(spec, balanced, feature_set))
            preds = predict(model, X[model.feature_names], y)
            self.artifacts.write_predictions(f"eval/predictions_{spec.algorithm.value}{suffix}.csv", preds)
            curve = stats_service.roc_auc(preds.score, np.asarray(preds.true) == POSITIVE)
            self.artifacts.write_table(
                f"eval/roc_{spec.algorithm.value}{suffix}.csv", stats_service.roc_points(curve)
            )
            entry = self._stratum_report(preds, full_n_ci)
            if strata == "emotion":
                entry["strata"] = self._emotion_strata(preds, meta)
            body[spec.algorithm.value] = entry
            scores[spec.algorithm.value] = preds.score

        # pairwise DeLong between classifiers on the shared test set
        truth = y == POSITIVE
        names = sorted(scores)
        body["comparisons"] = {
            f"{a}_vs_{b}": stats_service.delong_compare(scores[a], truth, scores[b], truth, paired=True)
            for i, a in enumerate(names)
            for b in names[i + 1 :]
        }
        self.write_report(f"eval/report{suffix}.json", body)
        return body

    # -----------------------
    # valence
    # -----------------------
    def valence(self, unbalanced: bool = False, spec: Optional[ClassifierSpec] = None) -> dict[str, Any]:
        """Valence classifier trained on real videos only, then scored on real and fake test videos."""
        spec = spec or self._spec(Algorithm.random_forest)
        names = self.selected_features()
        train = self.load_features("train").select(names).values
        test = self.load_features("test").select(names).values
        meta_train = self._metadata("train").loc[train.index]
        meta_test = self._metadata("test").loc[test.index]

        real = meta_train["label"] == Label.real.value
        X, y = train[real.to_numpy()], meta_train.loc[real, "valence"].to_numpy()
        if not unbalanced:
            X, y = downsample_balance(X, y, seed=spec.seed)
        model = train_classifier(spec, X, y)

        body: dict[str, Any] = {
            "balanced": not unbalanced,
            "train_counts": pd.Series(y).value_counts().sort_index().to_dict(),
            "algorithm": spec.algorithm.value,
        }
        accuracies = {}
        for label in (Label.real.value, Label.fake.value):
            rows = (meta_test["label"] == label).to_numpy()
            if not rows.any():
                continue
            truth = meta_test.loc[rows, "valence"].to_numpy()
            preds = predict(model, test[rows], truth)
            cm = stats_service.multiclass_confusion(preds, classes=model.classes)
            counts = cm.array().sum(axis=1).tolist()
            correct = int(np.trace(cm.array()))
            body[label] = {
                "confusion": cm,
                "metrics": stats_service.multiclass_metrics(cm, preds.proba, preds.true),
                "nir_test": stats_service.nir_test(correct, len(truth), counts, mode="empirical"),
                "kappa": stats_service.kappa(preds),
            }
            self.artifacts.write_predictions(f"valence/predictions_{label}.csv", preds)
            accuracies[label] = correct / len(truth)
        if len(accuracies) == 2:
            body["accuracy_drop"] = accuracies["real"] - accuracies["fake"]
            logger.info("Valence accuracy real %.3f, fake %.3f", accuracies["real"], accuracies["fake"])
        suffix = "_unbalanced" if unbalanced else ""
        self.write_report(f"valence/report{suffix}.json", body)
        return body

    def _spec(self, algorithm: Algorithm) -> ClassifierSpec:
        for spec in self.config.classifiers:
            if spec.algorithm is algorithm:
                return spec
        return ClassifierSpec(algorithm=algorithm, seed=self.config.split.seed)

    # -----------------------
    # human comparison
    # -----------------------
    def _synthetic_ratings(self, features: pd.DataFrame, n_participants: int, human_model: Optional[HumanModel]):
        if human_model is None:
            decision = self.artifacts.load_boruta("select/boruta.json")
            medians = decision.median_importance()
            top = max(self.selected_features(), key=lambda f: medians.get(f, float("-inf")))
            human_model = FeatureLinkedRaters(feature=top)
        ratings = synth_service.generate_judgments(
            None,
            human_model,
            n_participants=n_participants,
            seed=self.config.synth.seed,
            features=features,
            video_ids=list(features.index),
        )
        self.recordings_repo().write_ratings(ratings, self.artifacts.path("human/ratings.csv"))
        return ratings

    def human(
        self,
        ratings_path: Optional[Path] = None,
        n_participants: int = 89,
        human_model: Optional[HumanModel] = None,
        predict_schemes: tuple[str, ...] = ("loso", "lopo"),
    ) -> dict[str, Any]:
        features = self.load_features("test").values
        meta = self._metadata("test").loc[features.index]
        ratings: list[HumanRating]
        if ratings_path is not None:
            ratings = self.recordings_repo().read_ratings(ratings_path)
        else:
            ratings = self._synthetic_ratings(features, n_participants, human_model)

        rf = self._spec(Algorithm.random_forest)
        preds = self.artifacts.read_table(f"eval/predictions_{rf.algorithm.value}.csv")
        model_preds = dict(zip(preds["id"].astype(str), preds["pred"].astype(str)))
        truth = meta["label"].to_dict()

        votes = humancmp_service.consensus([r for r in ratings if r.video_id in truth])
        human = votes.judgments()
        ids = sorted(set(human) & set(model_preds))
        model_correct = {v: model_preds[v] == truth[v] for v in ids}
        human_correct = {v: human[v] == truth[v] for v in ids}
        strata = {v: "emotion" if meta.loc[v, "emotion_flag"] == "yes" else "no_emotion" for v in ids}
        per_rater = humancmp_service.rater_accuracy(ratings, truth)

        body: dict[str, Any] = {
            "n_videos": len(ids),
            "n_participants": len(per_rater),
            "consensus_accuracy": float(np.mean(list(human_correct.values()))) if ids else None,
            "mean_rater_accuracy": float(np.mean(list(per_rater.values()))) if per_rater else None,
            "model_accuracy": float(np.mean(list(model_correct.values()))) if ids else None,
            "ties": sorted(v for v, vote in votes.votes.items() if vote.tie),
            "agreement": humancmp_service.agreement(
                {v: model_preds[v] for v in ids}, {v: human[v] for v in ids}, strata
            ),
            "correctness": humancmp_service.correctness_correspondence(model_correct, human_correct),
            "outcome_groups": humancmp_service.feature_stratified_accuracy(
                features, model_correct, human_correct, self.selected_features()
            ),
        }
        spec = rf.model_copy(update={"n_estimators": min(rf.n_estimators, 200)})
        for scheme in predict_schemes:
            _, report = humancmp_service.predict_human(features, ratings, scheme, spec)
            body[f"predict_{scheme}"] = report
        self.write_report("human/report.json", body)
        return body

    # -----------------------
    # report
    # -----------------------
    def feature_importance(self, n_repeats: int = 10) -> Optional[pd.DataFrame]:
        """Random-forest mean decrease in accuracy on the test split, ranked."""
        spec = self._spec(Algorithm.random_forest)
        name = self._model_name(spec)
        if not self.artifacts.exists(f"{name}.json"):
            logger.info("No trained random forest; skipping the importance ranking")
            return None
        model = self.artifacts.load_model(name)
        X = self.load_features("test").values[model.feature_names]
        y = self._metadata("test").loc[X.index, "label"].to_numpy()
        return importance_ranking(permutation_importances(model, X, y, n_repeats=n_repeats, seed=spec.seed))

    def report(self) -> dict[str, Path]:
        out: dict[str, Path] = {}
        formats = self.config.report.formats
        curves = {}
        for spec in self.config.classifiers:
            name = f"eval/predictions_{spec.algorithm.value}.csv"
            if not (self.output_dir / name).exists():
                continue
            preds = self.artifacts.read_table(name)
            truth = preds["true"].astype(str).to_numpy() == POSITIVE
            curves[spec.algorithm.value] = stats_service.roc_auc(preds["score"].to_numpy(), truth)
        if not curves:
            raise DataError(f"No evaluation predictions under {self.output_dir / 'eval'}; run eval first")

        if "svg" in formats:
            out["roc"] = self.plots.roc_curves(curves)
            if (self.output_dir / "nmf/rank_scan.csv").exists():
                out["rank_scan"] = self.plots.rank_scan(self.artifacts.read_table("nmf/rank_scan.csv"))
            out["basis_heatmap"] = self.plots.basis_heatmap(self.artifacts.read_table("nmf/basis.csv", index_col="au"))
            decision = self.artifacts.load_boruta("select/boruta.json")
            out["boruta"] = self.plots.boruta_importance(
                decision.importance_history, decision.features, {f: s.value for f, s in decision.status.items()}
            )
            out["scree"] = self.plots.scree(self.artifacts.read_table("select/scree.csv"))

        ranked = self.feature_importance()
        if ranked is not None:
            out["importance_csv"] = self.artifacts.write_table("report/importance.csv", ranked)
            if "svg" in formats:
                out["importance"] = self.plots.importance_ranking(ranked)

        summary = {
            "auc": {name: curve.auc for name, curve in curves.items()},
            "plots": {name: str(path.relative_to(self.output_dir)) for name, path in out.items()},
        }
        if "json" in formats:
            out["summary"] = self.write_report("report/summary.json", summary)
        if "csv" in formats:
            table = pd.DataFrame({"algorithm": list(curves), "roc_auc": [c.auc for c in curves.values()]})
            out["summary_csv"] = self.artifacts.write_table("report/summary.csv", table)
        return out

    # -----------------------
    # full chain
    # -----------------------
    def pipeline(self, synthesize: bool = True) -> dict[str, Path]:
        if synthesize:
            self.synth()
        self.ingest()
        self.nmf()
        self.features(transitions=True)
        self.select()
        self.train()
        self.eval(strata="emotion")
        return self.report()
