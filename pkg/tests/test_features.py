import math

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_recording
from facedyn.core.errors import ArgumentError
from facedyn.schemas.features import FeatureMatrix, TransitionThresholds
from facedyn.schemas.nmf import RepresentativeSet
from facedyn.services.features import (
    REGISTRY,
    default_registry,
    descriptors,
    drop_zero_variance,
    extract_features,
    extract_matrix,
    fit_transition_thresholds,
    impute_nonfinite,
    metrics,
    transition_events,
    transition_feature_matrix,
)

REPS = RepresentativeSet(components={0: "AU01", 1: "AU12", 2: "AU17"})


def ar1(phi: float, n: int, seed: int = 0) -> np.ndarray:
    eps = np.random.default_rng(seed).normal(size=n)
    x = np.zeros(n)
    for t in range(1, n):
        x[t] = phi * x[t - 1] + eps[t]
    return x


def smooth_recording(video_id: str, seed: int, n: int = 241) -> object:
    gen = np.random.default_rng(seed)
    au = np.abs(np.cumsum(gen.normal(0.0, 0.2, size=(n, 17)), axis=0)) + gen.uniform(0, 0.05, size=(n, 17))
    return make_recording(video_id, au=au)


# ----- Autocorrelation -----
def test_acf_of_alternating_series():
    x = np.array([1.0, -1.0] * 4)
    assert metrics.acf(x, 1)[0] == pytest.approx(-0.875)


def test_acf_constant_series_is_nan():
    assert np.isnan(metrics.acf(np.ones(30), 10)).all()


def test_acf_lag_must_be_below_length():
    with pytest.raises(ArgumentError):
        metrics.acf(np.arange(5.0), 5)


def test_pacf5_of_ar1():
    x = ar1(0.8, 100_000, seed=1)
    assert metrics.pacf_features(x)["pacf5"] == pytest.approx(0.64, abs=0.02)


def test_pacf5_of_white_noise():
    x = np.random.default_rng(7).normal(size=100_000)
    assert metrics.pacf_features(x)["pacf5"] < 0.01


@given(st.integers(0, 2**16), st.floats(0.01, 100.0), st.floats(-100.0, 100.0))
@settings(max_examples=40, deadline=None)
def test_autocorrelations_ignore_affine_maps(seed, scale, offset):
    x = ar1(0.5, 241, seed=seed)
    np.testing.assert_allclose(metrics.acf(scale * x + offset, 10), metrics.acf(x, 10), rtol=0, atol=1e-9)
    np.testing.assert_allclose(metrics.pacf(scale * x + offset, 5), metrics.pacf(x, 5), rtol=0, atol=1e-9)


def test_difference_orders():
    x = np.array([1.0, 4.0, 9.0, 16.0])
    np.testing.assert_array_equal(metrics.difference(x, 1), [3, 5, 7])
    np.testing.assert_array_equal(metrics.difference(x, 2), [2, 2])
    with pytest.raises(ArgumentError):
        metrics.difference(np.ones(2), 2)


# ----- Distribution shift -----
def test_max_kl_shift_locates_step():
    gen = np.random.default_rng(2)
    x = np.concatenate([np.zeros(120), np.full(121, 3.0)]) + gen.normal(0.0, 0.3, 241)
    kl, t = metrics.max_kl_shift(x, 24)
    assert kl > 1.0
    assert abs(t - 120) <= 24


def test_max_kl_shift_constant_series():
    assert metrics.max_kl_shift(np.ones(100), 24) == (0.0, 24)


def test_level_shift_of_step():
    x = np.concatenate([np.zeros(100), np.ones(100)])
    level, t = metrics.level_shift(x, 24)
    assert level == pytest.approx(1.0)
    assert abs(t - 100) <= 24


def test_lumpiness_and_stability_constant_series():
    assert metrics.lumpiness(np.ones(96)) == 0.0
    assert metrics.stability(np.ones(96)) == 0.0


def test_half_quiet_series_is_lumpier_than_noise():
    for seed in range(100):
        noise = np.random.default_rng(seed).normal(size=241)
        half_quiet = noise * np.r_[np.full(120, 0.1), np.ones(121)]
        assert metrics.lumpiness(half_quiet) > metrics.lumpiness(noise)


# ----- Entropy and long-range -----
def test_white_noise_hurst_near_half():
    x = np.random.default_rng(3).normal(size=4096)
    assert metrics.hurst(x) == pytest.approx(0.5, abs=0.1)


def test_random_walk_hurst_is_persistent():
    x = np.cumsum(np.random.default_rng(3).normal(size=4096))
    assert metrics.hurst(x) >= 0.85


def test_spectral_entropy_white_noise_vs_sinusoid():
    t = np.arange(512)
    # exponential periodogram ordinates put white noise at 1 - (1 - euler_gamma) / ln(n / 2 + 1)
    expected = 1 - (1 - np.euler_gamma) / np.log(2049)
    assert metrics.spectral_entropy(np.random.default_rng(4).normal(size=4096)) == pytest.approx(expected, abs=0.01)
    assert metrics.spectral_entropy(np.sin(2 * np.pi * t / 32)) <= 0.01


def test_spectral_entropy_uses_the_full_periodogram():
    x = np.random.default_rng(5).normal(size=600)
    power = np.abs(np.fft.rfft(x - x.mean())) ** 2
    power[1:-1] *= 2
    p = power[power > 0] / power.sum()
    expected = -np.sum(p * np.log(p)) / np.log(len(power))
    assert metrics.spectral_entropy(x) == pytest.approx(expected, rel=1e-9)


def test_entropy_sentinels_for_constant_series():
    suite = metrics.entropy_suite(np.full(50, 2.0))
    assert suite["shannon_entropy"] == -math.inf
    assert suite["approx_entropy"] == 0.0
    assert suite["sample_entropy"] == 0.0


def test_entropy_suite_needs_ten_samples():
    with pytest.raises(ArgumentError):
        metrics.entropy_suite(np.arange(9.0))


def test_regular_series_has_low_sample_entropy():
    gen = np.random.default_rng(5)
    regular = np.sin(np.arange(300) / 5.0)
    noisy = gen.normal(size=300)
    assert metrics.sample_entropy(regular) < metrics.sample_entropy(noisy)
    assert metrics.approx_entropy(regular) < metrics.approx_entropy(noisy)


def test_trend_strength_of_line():
    assert metrics.trend_strength(np.arange(100.0)) == pytest.approx(1.0)


def test_lz_complexity_ordering():
    periodic = np.tile([0.0, 1.0], 128)
    noise = np.random.default_rng(6).normal(size=256)
    assert metrics.lz_complexity(periodic) < metrics.lz_complexity(noise)


@given(st.lists(st.floats(-50, 50), min_size=8, max_size=80))
@settings(max_examples=50)
def test_permutation_entropy_is_normalized(values):
    pe = metrics.permutation_entropy(np.asarray(values))
    assert 0.0 <= pe <= 1.0 + 1e-12


def test_crossing_points_and_flat_spots():
    x = np.array([0.0, 1.0, 0.0, 1.0, 0.0, 1.0])
    assert metrics.crossing_points(x) == 5.0
    assert metrics.flat_spots(np.ones(12)) == 12.0


# ----- Registry and extraction -----
def test_registry_has_37_enabled_entries():
    assert len(default_registry()) == 37
    assert len(default_registry(include_permutation_entropy=True)) == 38
    assert len({(e.transform, e.metric) for e in REGISTRY}) == len(REGISTRY)


def test_descriptor_names_follow_au_order():
    names = [d.name for d in descriptors(REPS, default_registry())]
    assert len(names) == 3 * 37
    assert names[0] == "acf1_AU01"
    assert "diff2_acf1_AU12" in names
    assert names[-1] == "e_acf1_AU17"


def test_extract_features_names_and_values():
    rec = smooth_recording("v_real", 0)
    row = extract_features(rec, REPS)
    assert set(row) == {d.name for d in descriptors(REPS, default_registry())}
    assert row["acf1_AU01"] == pytest.approx(metrics.acf(rec.series("AU01"), 1)[0])
    assert row["diff2_acf1_AU12"] == pytest.approx(metrics.acf(np.diff(rec.series("AU12"), n=2), 1)[0])


def test_constant_series_yields_sentinels():
    row = extract_features(make_recording("flat_real", au=np.ones((241, 17))), REPS)
    assert math.isnan(row["acf1_AU01"])
    assert row["shannon_entropy_AU12"] == -math.inf


def test_extract_matrix_keeps_row_order():
    recs = [smooth_recording(f"v{i}_real", i) for i in range(3)]
    matrix = extract_matrix(recs, REPS, n_jobs=1)
    assert list(matrix.values.index) == ["v0_real", "v1_real", "v2_real"]
    assert matrix.values.shape == (3, 111)


def test_extract_matrix_is_identical_across_thread_counts():
    recs = [smooth_recording(f"v{i}_real", i) for i in range(4)]
    serial = extract_matrix(recs, REPS, n_jobs=1)
    parallel = extract_matrix(recs, REPS, n_jobs=2)
    pd.testing.assert_frame_equal(serial.values, parallel.values, check_exact=True)


def test_drop_zero_variance():
    values = pd.DataFrame({"a": [1.0, 2.0, 3.0], "b": [5.0, 5.0, 5.0], "c": [np.nan, 1.0, np.inf]})
    matrix = drop_zero_variance(FeatureMatrix.from_frame(values))
    assert matrix.names == ["a"]
    assert set(matrix.dropped_features) == {"b", "c"}


# ----- Imputation -----
def _matrix_with_gaps(seed: int = 0) -> FeatureMatrix:
    gen = np.random.default_rng(seed)
    base = gen.normal(size=40)
    values = pd.DataFrame(
        {"a": base, "b": 2 * base + gen.normal(0, 0.1, 40), "c": gen.normal(size=40)},
        index=[f"v{i}" for i in range(40)],
    )
    values.iloc[3, 1] = np.nan
    values.iloc[7, 1] = np.inf
    values.iloc[11, 2] = -np.inf
    return FeatureMatrix.from_frame(values)


def test_impute_nonfinite_fills_and_flags():
    raw = _matrix_with_gaps()
    out = impute_nonfinite(raw, seed=1, n_jobs=1)
    assert out.is_finite()
    assert out.imputed_mask.to_numpy().sum() == 3
    assert out.imputed_mask.iloc[3, 1] and out.imputed_mask.iloc[11, 2]
    observed = raw.values["b"][np.isfinite(raw.values["b"])]
    assert observed.min() <= out.values.iloc[7, 1] <= observed.max()
    # observed cells are untouched
    pd.testing.assert_series_equal(out.values["a"], raw.values["a"])


def test_impute_is_deterministic():
    a = impute_nonfinite(_matrix_with_gaps(), seed=4, n_jobs=1)
    b = impute_nonfinite(_matrix_with_gaps(), seed=4, n_jobs=1)
    pd.testing.assert_frame_equal(a.values, b.values)


def test_impute_with_training_reference():
    train = impute_nonfinite(_matrix_with_gaps(), seed=1, n_jobs=1)
    test_values = pd.DataFrame({"a": [0.5, -0.2], "b": [np.nan, 0.1], "c": [0.3, 0.3]}, index=["t0", "t1"])
    out = impute_nonfinite(FeatureMatrix.from_frame(test_values), seed=1, reference=train, n_jobs=1)
    assert list(out.values.index) == ["t0", "t1"]
    assert out.is_finite()
    assert out.values.loc["t1", "b"] == 0.1


def test_impute_drops_all_missing_column():
    values = pd.DataFrame({"a": np.arange(10.0), "b": [np.nan] * 10})
    out = impute_nonfinite(FeatureMatrix.from_frame(values), n_jobs=1)
    assert out.names == ["a"]
    assert out.dropped_features["b"] == "no finite values"


# ----- Transitions -----
def test_transition_events_counts_runs():
    au = np.zeros((12, 17))
    au[:, 0] = [0, 0, 1, 2, 2, 2, 2, 1, 0, 0, 0, 0]
    rec = make_recording("v_real", au=au)
    reps = RepresentativeSet(components={0: "AU01"})
    thresholds = TransitionThresholds(train_mean=0.0, train_sd=0.5)
    (summary,) = transition_events([rec], reps, thresholds)
    assert summary.event_count == 2
    assert summary.max_duration == 2
    assert summary.total_transition_fraction == pytest.approx(4 / 11)
    assert summary.max_velocity == 1.0
    assert summary.velocity_range == 2.0


def test_transition_thresholds_from_training_differences():
    au = np.zeros((5, 17))
    au[:, 0] = [0, 1, 0, 1, 0]
    thresholds = fit_transition_thresholds([make_recording("v_real", au=au)], RepresentativeSet(components={0: "AU01"}))
    assert thresholds.train_mean == 0.0
    assert thresholds.high == pytest.approx(np.std([1, -1, 1, -1], ddof=1))


def test_transition_feature_matrix_index():
    thresholds = TransitionThresholds(train_mean=0.0, train_sd=0.1)
    recs = [smooth_recording(f"v{i}_real", i, n=60) for i in range(2)]
    table = transition_feature_matrix(transition_events(recs, REPS, thresholds))
    assert list(table.index) == ["v0_real", "v1_real"]
    assert "event_count" in table.columns
