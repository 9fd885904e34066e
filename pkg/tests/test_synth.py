import numpy as np
import pandas as pd
import pytest

from facedyn.core.errors import ArgumentError
from facedyn.repositories.recording_repo import au_csv_bytes
from facedyn.schemas.synth import DegradationConfig, FeatureLinkedRaters, RandomRaters, default_profile
from facedyn.services import humancmp_service, ingest_service, nmf_service, synth_service
from facedyn.services.features import metrics


def test_generation_is_deterministic(small_profile):
    a = synth_service.generate_dataset(small_profile, n_jobs=1)
    b = synth_service.generate_dataset(small_profile, n_jobs=1)
    for x, y in zip(a.recordings, b.recordings):
        np.testing.assert_array_equal(x.au, y.au)
    assert a.manifest == b.manifest


def test_recording_shape_and_range(small_profile):
    dataset = synth_service.generate_dataset(small_profile, n_jobs=1)
    assert len(dataset.recordings) == 24
    for rec in dataset.recordings:
        assert rec.au.shape == (241, 17)
        assert (rec.au >= 0).all() and (rec.au <= 5).all()
    assert dataset.recordings[0].video_id == "pair0000_real"
    assert dataset.recordings[1].video_id == "pair0000_fake"


def test_emotive_fraction_is_exact():
    dataset = synth_service.generate_dataset(default_profile(n_pairs=10, emotive_fraction=0.6), n_jobs=1)
    reals = [r for r in dataset.recordings if r.label.value == "real"]
    assert sum(r.emotion_flag.value == "yes" for r in reals) == 6


def test_manifest_matches_recordings(small_profile):
    dataset = synth_service.generate_dataset(small_profile, n_jobs=1)
    for rec, entry in zip(dataset.recordings, dataset.manifest):
        assert entry.video_id == rec.video_id
        assert ingest_service.classify_metadata(entry.scene_keywords) == (rec.emotion_flag, rec.valence)


def test_without_degradation_fakes_differ_only_by_noise():
    profile = default_profile(n_pairs=2, degradation=DegradationConfig(jitter_sd=0.0, kl_shift_prob=0.0))
    real, fake = synth_service.generate_pair(profile, 0)
    assert np.std(fake.au - real.au) < 0.1


def test_csv_round_trip(small_profile):
    real, _ = synth_service.generate_pair(small_profile, 3)
    frames = ingest_service.parse_au_csv(au_csv_bytes(real))
    np.testing.assert_allclose(frames.au, real.au, atol=1e-9)
    np.testing.assert_array_equal(frames.frame_index, real.frame_index)


def test_fakes_have_lower_acceleration_autocorrelation():
    profile = default_profile(n_pairs=20, seed=11)
    gaps = []
    for i in range(profile.n_pairs):
        real, fake = (ingest_service.smooth_recording(r, 4) for r in synth_service.generate_pair(profile, i))
        gaps.append(
            metrics.acf(np.diff(real.series("AU12"), n=2), 1)[0] - metrics.acf(np.diff(fake.series("AU12"), n=2), 1)[0]
        )
    assert np.mean(gaps) > 0


def test_low_quality_fakes_are_marked():
    dataset = synth_service.generate_dataset(default_profile(n_pairs=20, low_quality_fraction=1.0), n_jobs=1)
    assert len(dataset.low_quality) == 20
    fake = dataset.recording("pair0000_fake")
    assert fake.confidence.mean() < 0.8


def test_too_few_pairs():
    profile = default_profile(n_pairs=2).model_copy(update={"n_pairs": 1})
    with pytest.raises(ArgumentError):
        synth_service.generate_dataset(profile)


# ----- Judgments -----
def test_random_raters_are_at_chance():
    ids = [f"v{i}" for i in range(200)]
    truth = {vid: "fake" if i % 2 else "real" for i, vid in enumerate(ids)}
    ratings = synth_service.generate_judgments(None, RandomRaters(bias=0.5), n_participants=20, seed=1, video_ids=ids)
    accuracy = humancmp_service.rater_accuracy(ratings, truth)
    assert np.mean(list(accuracy.values())) == pytest.approx(0.5, abs=0.05)


def test_participant_ids(small_profile):
    dataset = synth_service.generate_dataset(small_profile, n_jobs=1)
    ratings = synth_service.generate_judgments(dataset, RandomRaters(), n_participants=89)
    participants = sorted({r.participant_id for r in ratings})
    assert len(participants) == 89
    assert participants[0] == "P001" and participants[-1] == "P089"
    assert len(ratings) == 89 * len(dataset.recordings)


def test_judgments_need_video_ids():
    with pytest.raises(ArgumentError):
        synth_service.generate_judgments(None, RandomRaters())


def test_feature_linked_raters_follow_feature():
    ids = [f"v{i}" for i in range(40)]
    features = pd.DataFrame({"f": np.linspace(-1.0, 1.0, 40)}, index=ids)
    ratings = synth_service.generate_judgments(
        None, FeatureLinkedRaters(feature="f", weight=8.0), n_participants=30, seed=2, features=features, video_ids=ids
    )
    votes = humancmp_service.consensus(ratings).votes
    assert votes["v0"].judgment == "real"
    assert votes["v39"].judgment == "fake"
    with pytest.raises(ArgumentError):
        synth_service.generate_judgments(None, FeatureLinkedRaters(feature="g"), features=features, video_ids=ids)


@pytest.mark.slow
def test_nmf_recovers_planted_basis():
    profile = default_profile(n_pairs=40, seed=3)
    dataset = synth_service.generate_dataset(profile, n_jobs=1)
    reals = [r for r in dataset.recordings if r.label.value == "real"]
    V, _ = nmf_service.assemble_v(reals)
    model = nmf_service.nmf_fit(V, profile.rank, max_iter=500, seed=1)
    planted = profile.basis_array()
    planted = planted / np.linalg.norm(planted, axis=0)
    fitted = model.W / np.linalg.norm(model.W, axis=0)
    cosine = planted.T @ fitted
    # match components greedily by best cosine
    best = [cosine[i].max() for i in range(profile.rank)]
    assert np.mean(best) >= 0.9
