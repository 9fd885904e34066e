import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from facedyn.core.errors import ArgumentError, DataError, SchemaError
from facedyn.schemas.humancmp import HumanRating
from facedyn.schemas.learn import ClassifierSpec
from facedyn.schemas.synth import RandomRaters
from facedyn.services import humancmp_service, synth_service


def ratings_for(video_id: str, fake: int, real: int) -> list[HumanRating]:
    votes = [80.0] * fake + [20.0] * real
    return [HumanRating(participant_id=f"P{i + 1:03d}", video_id=video_id, rating=v) for i, v in enumerate(votes)]


@pytest.mark.parametrize("rating, judgment", [(50.0, "fake"), (49.9, "real"), (0.0, "real"), (100.0, "fake")])
def test_binarize(rating, judgment):
    assert humancmp_service.binarize(rating) == judgment


def test_binarize_rejects_out_of_range():
    with pytest.raises(ArgumentError):
        humancmp_service.binarize(101.0)


# ----- Consensus -----
def test_consensus_majority():
    result = humancmp_service.consensus(ratings_for("v1", 45, 44))
    vote = result.votes["v1"]
    assert vote.judgment == "fake"
    assert (vote.fake_votes, vote.real_votes) == (45, 44)
    assert not vote.tie


def test_consensus_tie_resolves_to_real():
    vote = humancmp_service.consensus(ratings_for("v1", 10, 10)).votes["v1"]
    assert vote.judgment == "real"
    assert vote.tie


@given(st.permutations(ratings_for("v1", 6, 3) + ratings_for("v2", 2, 7)))
@settings(max_examples=30)
def test_consensus_ignores_rating_order(ratings):
    assert humancmp_service.consensus(ratings).judgments() == {"v1": "fake", "v2": "real"}


def test_rater_accuracy_is_per_participant():
    ratings = [
        HumanRating(participant_id="P1", video_id="a", rating=90),
        HumanRating(participant_id="P1", video_id="b", rating=90),
        HumanRating(participant_id="P2", video_id="a", rating=90),
        HumanRating(participant_id="P2", video_id="b", rating=10),
    ]
    assert humancmp_service.rater_accuracy(ratings, {"a": "fake", "b": "real"}) == {"P1": 0.5, "P2": 1.0}


# ----- Agreement -----
def test_identical_judgments_agree_fully():
    labels = {f"v{i}": "fake" if i % 2 else "real" for i in range(20)}
    (report,) = humancmp_service.agreement(labels, dict(labels), yates=False)
    assert report.stratum == "all"
    assert report.agreement_rate == 1.0
    assert report.contingency == [[10, 0], [0, 10]]
    assert report.chi_square.effect == pytest.approx(1.0)


def test_agreement_per_stratum():
    model = {f"v{i}": "fake" if i % 2 else "real" for i in range(8)}
    human = {vid: "fake" for vid in model}
    strata = {vid: "emotive" if int(vid[1:]) < 4 else "non_emotive" for vid in model}
    reports = {r.stratum: r for r in humancmp_service.agreement(model, human, strata)}
    assert set(reports) == {"all", "emotive", "non_emotive"}
    assert reports["emotive"].n == 4
    assert reports["all"].agreement_rate == 0.5
    # human column "real" is empty
    assert reports["all"].chi_square is None


def test_agreement_rejects_mismatched_ids():
    with pytest.raises(DataError):
        humancmp_service.agreement({"a": "fake"}, {"b": "fake"})


@given(st.lists(st.tuples(st.booleans(), st.booleans()), min_size=8, max_size=60))
@settings(max_examples=50)
def test_reported_phi_matches_reported_chi_square(pairs):
    model = {f"v{i}": m for i, (m, _) in enumerate(pairs)}
    human = {f"v{i}": h for i, (_, h) in enumerate(pairs)}
    report = humancmp_service.correctness_correspondence(model, human)
    if report.chi_square is not None:
        chi = report.chi_square
        assert chi.effect == pytest.approx(np.sqrt(chi.chi2 / report.n))


def test_correctness_correspondence_on_shared_half():
    correct = {f"v{i}": i < 5 for i in range(10)}
    report = humancmp_service.correctness_correspondence(correct, dict(correct), yates=False)
    assert report.contingency == [[5, 0], [0, 5]]
    assert report.chi_square.effect == pytest.approx(1.0)
    assert report.row_labels == ["model_correct", "model_incorrect"]


# ----- Feature-stratified accuracy -----
def test_feature_stratified_accuracy_groups():
    features = pd.DataFrame({"f": [1.0, 3.0, 5.0, 7.0]}, index=["a", "b", "c", "d"])
    model = {"a": True, "b": True, "c": True, "d": False}
    human = {"a": True, "b": True, "c": False, "d": False}
    rows = {s.group: s for s in humancmp_service.feature_stratified_accuracy(features, model, human)}
    assert rows["both_correct"].n == 2
    assert rows["both_correct"].mean == 2.0
    assert rows["both_correct"].se == pytest.approx(np.std([1.0, 3.0], ddof=1) / np.sqrt(2))
    assert rows["model_only_correct"].se is None
    assert rows["human_only_correct"].n == 0
    assert rows["human_only_correct"].mean is None


def test_feature_stratified_accuracy_needs_features():
    with pytest.raises(DataError):
        humancmp_service.feature_stratified_accuracy(pd.DataFrame({"f": [1.0]}, index=["a"]), {"b": True}, {"b": True})


# ----- Ratings files -----
def test_parse_ratings():
    data = b"participant_id,video_id,rating\nP001, v1 ,72.5\nP002,v1,0\n"
    ratings = humancmp_service.parse_ratings(data)
    assert ratings[0] == HumanRating(participant_id="P001", video_id="v1", rating=72.5)
    assert len(ratings) == 2


def test_parse_ratings_missing_column():
    with pytest.raises(SchemaError) as err:
        humancmp_service.parse_ratings(b"participant_id,video_id\nP1,v1\n")
    assert err.value.column == "rating"


@pytest.mark.parametrize("value", [b"lots", b"150"])
def test_parse_ratings_bad_values(value):
    with pytest.raises(DataError):
        humancmp_service.parse_ratings(b"participant_id,video_id,rating\nP1,v1," + value + b"\n")


# ----- Predicting human judgments -----
def test_predict_human_loso_learns_feature_rule():
    gen = np.random.default_rng(0)
    values = np.r_[gen.uniform(0.0, 0.3, 6), gen.uniform(0.7, 1.0, 6)]
    features = pd.DataFrame({"f": values}, index=[f"v{i}" for i in range(12)])
    ratings = [
        HumanRating(participant_id=f"P{p}", video_id=vid, rating=90.0 if f > 0.5 else 10.0)
        for p in range(5)
        for vid, f in features["f"].items()
    ]
    preds, report = humancmp_service.predict_human(
        features, ratings, "loso", ClassifierSpec(algorithm="logistic_regression")
    )
    assert len(preds.ids) == 60
    assert report["accuracy"] >= 0.95
    assert "sensitivity" in report


def test_predict_human_unknown_video():
    ratings = [HumanRating(participant_id="P1", video_id="ghost", rating=60)]
    with pytest.raises(DataError):
        humancmp_service.predict_human(
            pd.DataFrame({"f": [0.0]}, index=["v0"]), ratings, "lopo", ClassifierSpec(algorithm="logistic_regression")
        )


def test_predict_human_random_judgments_have_no_agreement():
    ids = [f"v{i}" for i in range(40)]
    features = pd.DataFrame(np.random.default_rng(3).normal(size=(40, 3)), index=ids, columns=["a", "b", "c"])
    ratings = synth_service.generate_judgments(
        None, RandomRaters(bias=0.5), n_participants=60, seed=8, features=features, video_ids=ids
    )
    _, report = humancmp_service.predict_human(
        features, ratings, "loso", ClassifierSpec(algorithm="logistic_regression")
    )
    assert report["kappa"] == pytest.approx(0.0, abs=0.05)
    assert report["accuracy"] == pytest.approx(0.5, abs=0.05)
