import io
import logging
from collections import defaultdict
from typing import Literal, Mapping, Optional, Sequence

import numpy as np
import pandas as pd

from facedyn.core.errors import ArgumentError, DataError, SchemaError
from facedyn.schemas.humancmp import (
    AgreementReport,
    ConsensusJudgment,
    ConsensusVote,
    HumanRating,
    OutcomeGroupSummary,
)
from facedyn.schemas.learn import ClassifierSpec, PredictionSet
from facedyn.services import stats_service
from facedyn.services.learn import lopo_cv, loso_cv

logger = logging.getLogger(__name__)

RATING_COLUMNS = ["participant_id", "video_id", "rating"]
FAKE_THRESHOLD = 50.0
OUTCOME_GROUPS = ["both_correct", "model_only_correct", "human_only_correct", "both_incorrect"]


def parse_ratings(data: bytes) -> list[HumanRating]:
    df = pd.read_csv(io.BytesIO(data), dtype=str, keep_default_na=False, skipinitialspace=True)
    df.columns = [c.strip() for c in df.columns]
    for column in RATING_COLUMNS:
        if column not in df.columns:
            raise SchemaError(column, source="Ratings CSV")
    ratings = []
    for row, rec in enumerate(df.itertuples(index=False)):
        try:
            value = float(rec.rating)
        except ValueError:
            raise DataError(f"Non-numeric rating {rec.rating!r} at row {row}")
        if not 0 <= value <= 100:
            raise DataError(f"Rating {value} at row {row} is outside [0, 100]")
        ratings.append(
            HumanRating(participant_id=rec.participant_id.strip(), video_id=rec.video_id.strip(), rating=value)
        )
    return ratings


def binarize(rating: float) -> str:
    if not 0 <= rating <= 100:
        raise ArgumentError(f"Rating {rating} is outside [0, 100]")
    return "fake" if rating >= FAKE_THRESHOLD else "real"


def consensus(ratings: Sequence[HumanRating]) -> ConsensusJudgment:
    """Majority vote of binarized ratings per video; an exact tie resolves to real and is flagged."""
    fake: dict[str, int] = defaultdict(int)
    real: dict[str, int] = defaultdict(int)
    for r in ratings:
        if binarize(r.rating) == "fake":
            fake[r.video_id] += 1
        else:
            real[r.video_id] += 1
    votes = {}
    for vid in sorted(set(fake) | set(real)):
        tie = fake[vid] == real[vid]
        votes[vid] = ConsensusVote(
            judgment="fake" if fake[vid] > real[vid] else "real",
            fake_votes=fake[vid],
            real_votes=real[vid],
            tie=tie,
        )
    ties = [vid for vid, v in votes.items() if v.tie]
    if ties:
        logger.warning("Tied human votes resolved to real for %d videos", len(ties))
    return ConsensusJudgment(votes=votes)


def rater_accuracy(ratings: Sequence[HumanRating], truth: Mapping[str, str]) -> dict[str, float]:
    """Per-participant accuracy of binarized judgments; distinct from majority-vote accuracy."""
    hits: dict[str, list[bool]] = defaultdict(list)
    for r in ratings:
        if r.video_id in truth:
            hits[r.participant_id].append(binarize(r.rating) == truth[r.video_id])
    return {pid: float(np.mean(h)) for pid, h in sorted(hits.items())}


def _aligned_ids(a: Mapping[str, object], b: Mapping[str, object]) -> list[str]:
    only_a = sorted(set(a) - set(b))
    only_b = sorted(set(b) - set(a))
    if only_a or only_b:
        raise DataError(f"Video ids do not align; unmatched: {', '.join(only_a + only_b)}")
    return sorted(a)


def _report(
    stratum: str,
    rows: Sequence[str],
    cols: Sequence[str],
    labels: list[str],
    row_values: list[str],
    col_values: list[str],
    yates: Optional[bool],
) -> AgreementReport:
    table = np.zeros((len(labels), len(labels)), dtype=int)
    for r, c in zip(row_values, col_values):
        table[labels.index(r), labels.index(c)] += 1
    n = int(table.sum())
    chi = None
    try:
        chi = stats_service.chi_square(table, yates=yates)
    except ArgumentError:
        logger.warning("Chi-square undefined for stratum %s (empty margin)", stratum)
    return AgreementReport(
        stratum=stratum,
        row_labels=list(rows),
        col_labels=list(cols),
        contingency=table.tolist(),
        n=n,
        agreement_rate=float(np.trace(table) / n) if n else float("nan"),
        chi_square=chi,
    )


def agreement(
    model_preds: Mapping[str, str],
    human: Mapping[str, str],
    strata: Optional[Mapping[str, str]] = None,
    yates: Optional[bool] = None,
) -> list[AgreementReport]:
    """Model label × human label contingency, one report for all videos plus one per stratum."""
    ids = _aligned_ids(model_preds, human)
    labels = ["fake", "real"]
    groups: dict[str, list[str]] = {"all": ids}
    if strata:
        for vid in ids:
            groups.setdefault(strata[vid], []).append(vid)
    return [
        _report(
            name,
            [f"model_{lab}" for lab in labels],
            [f"human_{lab}" for lab in labels],
            labels,
            [model_preds[v] for v in members],
            [human[v] for v in members],
            yates,
        )
        for name, members in groups.items()
    ]


def correctness_correspondence(
    model_correct: Mapping[str, bool],
    human_correct: Mapping[str, bool],
    stratum: str = "all",
    yates: Optional[bool] = None,
) -> AgreementReport:
    ids = _aligned_ids(model_correct, human_correct)
    labels = ["correct", "incorrect"]
    as_label = {True: "correct", False: "incorrect"}
    return _report(
        stratum,
        [f"model_{lab}" for lab in labels],
        [f"human_{lab}" for lab in labels],
        labels,
        [as_label[bool(model_correct[v])] for v in ids],
        [as_label[bool(human_correct[v])] for v in ids],
        yates,
    )


def outcome_group(model_ok: bool, human_ok: bool) -> str:
    if model_ok and human_ok:
        return "both_correct"
    if model_ok:
        return "model_only_correct"
    if human_ok:
        return "human_only_correct"
    return "both_incorrect"


def feature_stratified_accuracy(
    features: pd.DataFrame,
    model_correct: Mapping[str, bool],
    human_correct: Mapping[str, bool],
    names: Optional[Sequence[str]] = None,
) -> list[OutcomeGroupSummary]:
    """Mean ± SE of each feature within the four (model correct, human correct) outcome groups."""
    ids = _aligned_ids(model_correct, human_correct)
    missing = [v for v in ids if v not in features.index]
    if missing:
        raise DataError(f"No features for videos: {', '.join(missing)}")
    group = pd.Series({v: outcome_group(bool(model_correct[v]), bool(human_correct[v])) for v in ids})
    names = list(names or features.columns)
    out = []
    for name in names:
        values = features.loc[ids, name].astype(float)
        for g in OUTCOME_GROUPS:
            members = values[group == g]
            n = len(members)
            out.append(
                OutcomeGroupSummary(
                    feature=name,
                    group=g,
                    n=n,
                    mean=float(members.mean()) if n else None,
                    se=float(members.std(ddof=1) / np.sqrt(n)) if n > 1 else None,
                )
            )
    return out


def judgment_table(ratings: Sequence[HumanRating]) -> pd.DataFrame:
    return pd.DataFrame(
        [
            {"participant_id": r.participant_id, "video_id": r.video_id, "judgment": binarize(r.rating)}
            for r in ratings
        ]
    )


def predict_human(
    features: pd.DataFrame,
    ratings: Sequence[HumanRating],
    scheme: Literal["lopo", "loso"],
    spec: ClassifierSpec,
) -> tuple[PredictionSet, dict[str, float]]:
    """Predict each (participant, video) binary judgment from the video's features."""
    table = judgment_table(ratings)
    unknown = sorted(set(table["video_id"]) - set(features.index))
    if unknown:
        raise DataError(f"No features for rated videos: {', '.join(unknown)}")
    X = features.loc[table["video_id"]].reset_index(drop=True)
    X.index = [f"{p}:{v}" for p, v in zip(table["participant_id"], table["video_id"])]
    y = table["judgment"].to_numpy()
    cv = lopo_cv if scheme == "lopo" else loso_cv
    groups = table["participant_id"] if scheme == "lopo" else table["video_id"]
    preds = cv(X, y, groups.to_numpy(), spec, positive_class="fake")

    report = {"accuracy": preds.accuracy(), "kappa": stats_service.kappa(preds)}
    if preds.positive_class is not None:
        m = stats_service.binary_metrics(stats_service.confusion(preds))
        report.update(sensitivity=m["sensitivity"], specificity=m["specificity"])
    logger.info(
        "%s human-judgment prediction: accuracy %.3f, kappa %.3f", scheme.upper(), report["accuracy"], report["kappa"]
    )
    return preds, report
