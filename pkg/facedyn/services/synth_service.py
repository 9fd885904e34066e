"""
Synthetic AU dynamics with a planted basis.

Real videos are the planted basis applied to smooth non-negative activations. Fakes share the
activations but carry high-passed jitter on their velocity and optional level shifts, which is
where the detector's velocity/acceleration autocorrelation features look.
"""

import logging
import math
from typing import Optional

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from scipy.ndimage import uniform_filter1d
from scipy.special import expit

from facedyn.core.config import settings
from facedyn.core.errors import ArgumentError
from facedyn.core.seeding import rng
from facedyn.schemas.humancmp import HumanRating
from facedyn.schemas.ingest import AuRecording, EmotionFlag, Label, ManifestEntry, Valence
from facedyn.schemas.synth import FeatureLinkedRaters, HumanModel, SynthProfile, SyntheticDataset

logger = logging.getLogger(__name__)

BURN_IN = 50
MAX_INTENSITY = 5.0
SCENES = {
    Valence.positive: "outdoor_laughing_happy",
    Valence.negative: "kitchen_argument_angry",
    Valence.neutral: "podium_speech_serious",
}
SMILE, BROW = 1, 0


def _is_emotive(profile: SynthProfile, pair_index: int) -> bool:
    # evenly spread so any prefix of n pairs holds floor(n * fraction) emotive ones
    f = profile.emotive_fraction
    return math.floor((pair_index + 1) * f + 1e-9) - math.floor(pair_index * f + 1e-9) == 1


def _valence(profile: SynthProfile, pair_index: int) -> Valence:
    if not _is_emotive(profile, pair_index):
        return Valence.neutral
    draw = rng(profile.seed, pair_index, 0).random()
    return Valence.positive if draw < profile.positive_share else Valence.negative


def _activations(profile: SynthProfile, gen: np.random.Generator) -> np.ndarray:
    n = profile.n_frames
    rows = []
    for dyn in profile.dynamics[: profile.rank]:
        eps = gen.normal(0.0, dyn.innovation_sd, n + BURN_IN)
        a = np.zeros(n + BURN_IN)
        for t in range(1, n + BURN_IN):
            a[t] = dyn.ar_coef * a[t - 1] + eps[t]
        a = uniform_filter1d(a, dyn.smoothing_window, mode="nearest")[BURN_IN:]
        rows.append(np.logaddexp(0.0, a + dyn.baseline))  # softplus
    return np.vstack(rows)


def _bursts(profile: SynthProfile, valence: Valence, gen: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Additive burst activations and the frame mask they cover."""
    n = profile.n_frames
    extra = np.zeros((profile.rank, n))
    mask = np.zeros(n, dtype=bool)
    if valence is Valence.neutral:
        return extra, mask
    component = SMILE if valence is Valence.positive else BROW
    cfg = profile.bursts
    for _ in range(max(1, gen.poisson(cfg.rate))):
        duration = int(np.clip(round(gen.normal(cfg.duration_mean, cfg.duration_sd)), 4, n // 2))
        start = int(gen.integers(0, n - duration))
        extra[component, start : start + duration] += cfg.amplitude * np.hanning(duration)
        mask[start : start + duration] = True
    return extra, mask


def _degrade(
    profile: SynthProfile, activations: np.ndarray, burst_mask: np.ndarray, gen: np.random.Generator
) -> np.ndarray:
    cfg = profile.degradation
    k, n = activations.shape
    out = activations.copy()
    if cfg.jitter_sd > 0:
        walk = np.cumsum(gen.normal(0.0, cfg.jitter_sd, (k, n)), axis=1)
        jitter = walk - uniform_filter1d(walk, cfg.lowpass_window, axis=1, mode="nearest")
        if cfg.scope == "bursts":
            jitter = jitter * burst_mask
        out = out + jitter
    for c in range(k):
        if gen.random() < cfg.kl_shift_prob:
            length = int(gen.integers(n // 8, n // 3))
            start = int(gen.integers(0, n - length))
            out[c, start : start + length] += cfg.kl_shift_size * activations[c].std()
    return np.clip(out, 0.0, None)


def _render(
    profile: SynthProfile,
    activations: np.ndarray,
    gen: np.random.Generator,
    low_quality: bool,
) -> dict[str, np.ndarray]:
    n = profile.n_frames
    au = profile.basis_array() @ activations + gen.normal(0.0, profile.observation_sd, (17, n))
    if low_quality:
        confidence = gen.uniform(0.55, 0.8, n)
        success = (gen.random(n) > 0.2).astype(int)
    else:
        confidence = gen.uniform(0.93, 0.99, n)
        success = np.ones(n, dtype=int)
    return {
        "frame_index": np.arange(1, n + 1),
        "timestamp": np.arange(n) / profile.fps,
        "confidence": confidence,
        "success": success,
        "au": np.clip(au.T, 0.0, MAX_INTENSITY),
    }


def _low_quality(profile: SynthProfile, pair_index: int) -> bool:
    return rng(profile.seed, pair_index, 5).random() < profile.low_quality_fraction


def generate_pair(profile: SynthProfile, pair_index: int) -> tuple[AuRecording, AuRecording]:
    valence = _valence(profile, pair_index)
    emotion = EmotionFlag.no if valence is Valence.neutral else EmotionFlag.yes
    base = _activations(profile, rng(profile.seed, pair_index, 1))
    extra, mask = _bursts(profile, valence, rng(profile.seed, pair_index, 2))
    real_act = base + extra
    fake_act = _degrade(profile, real_act, mask, rng(profile.seed, pair_index, 3))
    low_quality = _low_quality(profile, pair_index)

    pair_id = f"pair{pair_index:04d}"
    recordings = []
    for label, act, key in ((Label.real, real_act, 4), (Label.fake, fake_act, 6)):
        recordings.append(
            AuRecording(
                **_render(profile, act, rng(profile.seed, pair_index, key), low_quality and label is Label.fake),
                video_id=f"{pair_id}_{label.value}",
                label=label,
                pair_id=pair_id,
                emotion_flag=emotion,
                valence=valence,
                fps=profile.fps,
            )
        )
    return recordings[0], recordings[1]


def manifest_entry(rec: AuRecording) -> ManifestEntry:
    return ManifestEntry(
        video_id=rec.video_id,
        path=f"{rec.video_id}.csv",
        label=rec.label,
        pair_id=rec.pair_id,
        scene_keywords=SCENES[rec.valence],
        emotion_flag=rec.emotion_flag,
        valence=rec.valence,
    )


def generate_dataset(profile: SynthProfile, n_jobs: Optional[int] = None) -> SyntheticDataset:
    if profile.n_pairs < 2:
        raise ArgumentError("A synthetic dataset needs at least two pairs")
    pairs = Parallel(n_jobs=n_jobs or settings.THREADS)(
        delayed(generate_pair)(profile, i) for i in range(profile.n_pairs)
    )
    recordings = [rec for pair in pairs for rec in pair]
    low_quality = [f"pair{i:04d}_fake" for i in range(profile.n_pairs) if _low_quality(profile, i)]
    logger.info(
        "Generated %d pairs (%d emotive, %d low quality)",
        profile.n_pairs,
        sum(_is_emotive(profile, i) for i in range(profile.n_pairs)),
        len(low_quality),
    )
    return SyntheticDataset(
        recordings=recordings,
        manifest=[manifest_entry(r) for r in recordings],
        profile=profile,
        low_quality=low_quality,
    )


def generate_judgments(
    dataset: Optional[SyntheticDataset],
    human_model: HumanModel,
    n_participants: int = 89,
    seed: int = 0,
    features: Optional[pd.DataFrame] = None,
    video_ids: Optional[list[str]] = None,
) -> list[HumanRating]:
    """
    One 0-100 rating per participant and video. Feature-linked raters judge fake with probability
    logistic(weight · z(feature)); random raters flip a coin with P(fake) = bias.

    `video_ids` restricts the rated videos; without a dataset it is required.
    """
    if video_ids is None:
        if dataset is None:
            raise ArgumentError("generate_judgments needs a dataset or explicit video ids")
        video_ids = [r.video_id for r in dataset.recordings]
    if n_participants < 1:
        raise ArgumentError(f"n_participants must be >= 1, got {n_participants}")
    if isinstance(human_model, FeatureLinkedRaters):
        if features is None or human_model.feature not in features.columns:
            raise ArgumentError(f"Feature-linked raters need feature column {human_model.feature!r}")
        values = features.loc[video_ids, human_model.feature].astype(float)
        z = (values - values.mean()) / (values.std(ddof=0) or 1.0)
        p_fake = expit(human_model.weight * z.to_numpy())
    else:
        p_fake = np.full(len(video_ids), human_model.bias)

    ratings = []
    for p in range(n_participants):
        gen = rng(seed, p)
        says_fake = gen.random(len(video_ids)) < p_fake
        scores = np.where(says_fake, gen.uniform(50.0, 100.0, len(video_ids)), gen.uniform(0.0, 49.9, len(video_ids)))
        ratings.extend(
            HumanRating(participant_id=f"P{p + 1:03d}", video_id=vid, rating=round(float(s), 1))
            for vid, s in zip(video_ids, scores)
        )
    return ratings
