import io
import logging
import re
from collections import defaultdict
from pathlib import PurePath
from typing import Iterable, Literal

import numpy as np
import pandas as pd

from facedyn.core.errors import ArgumentError, CsvParseError, DataError, LabelError, PairingError, SchemaError
from facedyn.core.seeding import rng
from facedyn.schemas.ingest import (
    AU_COLUMNS,
    MANIFEST_COLUMNS,
    META_COLUMNS,
    N_FRAMES,
    AuFrames,
    AuRecording,
    EmotionFlag,
    Label,
    ManifestEntry,
    NormalizationParams,
    SplitAssignment,
    Valence,
)

logger = logging.getLogger(__name__)

POSITIVE_KEYWORDS = {"laughing", "happy"}
NEGATIVE_KEYWORDS = {"angry", "disgust"}


# -----------------------
# Parsing
# -----------------------
def parse_au_csv(data: bytes) -> AuFrames:
    """
    Parse one OpenFace-style CSV. Only the `_r` intensity columns are read; `_c` presence
    columns and any other extras are ignored.
    """
    try:
        df = pd.read_csv(io.BytesIO(data), dtype=str, keep_default_na=False, skipinitialspace=True)
    except pd.errors.EmptyDataError:
        raise SchemaError("frame")
    df.columns = [c.strip() for c in df.columns]

    for column in META_COLUMNS + AU_COLUMNS:
        if column not in df.columns:
            raise SchemaError(column)

    parsed = {}
    for column in META_COLUMNS + AU_COLUMNS:
        raw = df[column].str.strip()
        values = pd.to_numeric(raw, errors="coerce")
        bad = values.isna().to_numpy()
        if bad.any():
            row = int(np.flatnonzero(bad)[0])
            raise CsvParseError(row, column, raw.iloc[row])
        parsed[column] = values.to_numpy(dtype=float)

    try:
        return AuFrames(
            frame_index=parsed["frame"].astype(int),
            timestamp=parsed["timestamp"],
            confidence=parsed["confidence"],
            success=parsed["success"].astype(int),
            au=np.column_stack([parsed[c] for c in AU_COLUMNS]),
        )
    except ValueError as e:
        raise DataError(f"Invalid AU CSV: {e}")


def classify_metadata(scene_keywords: str) -> tuple[EmotionFlag, Valence]:
    tokens = {t for t in re.split(r"[^a-z]+", scene_keywords.lower()) if t}
    if tokens & POSITIVE_KEYWORDS:
        return EmotionFlag.yes, Valence.positive
    if tokens & NEGATIVE_KEYWORDS:
        return EmotionFlag.yes, Valence.negative
    return EmotionFlag.no, Valence.neutral


def parse_manifest(data: bytes) -> list[ManifestEntry]:
    df = pd.read_csv(io.BytesIO(data), dtype=str, keep_default_na=False, skipinitialspace=True)
    df.columns = [c.strip() for c in df.columns]
    for column in MANIFEST_COLUMNS:
        if column not in df.columns:
            raise SchemaError(column, source="Manifest")

    entries = []
    for row in df.itertuples(index=False):
        label = row.label.strip().lower()
        if label not in (Label.real.value, Label.fake.value):
            raise LabelError(row.label, row.video_id)
        # filename keywords are the fallback when the manifest leaves scene_keywords empty
        keywords = row.scene_keywords.strip() or PurePath(row.path).stem
        emotion_flag, valence = classify_metadata(keywords)
        entries.append(
            ManifestEntry(
                video_id=row.video_id.strip(),
                path=row.path.strip(),
                label=Label(label),
                pair_id=row.pair_id.strip(),
                scene_keywords=row.scene_keywords.strip(),
                emotion_flag=emotion_flag,
                valence=valence,
            )
        )

    by_pair: dict[str, list[ManifestEntry]] = defaultdict(list)
    for entry in entries:
        by_pair[entry.pair_id].append(entry)
    unpaired = sorted(
        pid for pid, members in by_pair.items() if sorted(m.label.value for m in members) != ["fake", "real"]
    )
    if unpaired:
        raise PairingError(unpaired)
    return entries


# -----------------------
# Curation
# -----------------------
def _partners(recordings: Iterable[AuRecording]) -> dict[str, list[str]]:
    by_pair: dict[str, list[str]] = defaultdict(list)
    for rec in recordings:
        by_pair[rec.pair_id].append(rec.video_id)
    return by_pair


def exclude_videos(recordings: list[AuRecording], video_ids: Iterable[str]) -> tuple[list[AuRecording], dict[str, str]]:
    """Manual exclusion list; listed videos take their pair partners with them."""
    listed = set(video_ids)
    pairs = _partners(recordings)
    excluded: dict[str, str] = {}
    for rec in recordings:
        if rec.video_id in listed:
            excluded[rec.video_id] = "manual exclusion"
            for partner in pairs[rec.pair_id]:
                excluded.setdefault(partner, f"pair partner of excluded video {rec.video_id}")
    kept = [r for r in recordings if r.video_id not in excluded]
    return kept, excluded


def quality_filter(
    recordings: list[AuRecording],
    conf_thresh: float = 0.83,
    succ_thresh: float = 0.94,
    statistic: Literal["mean", "median"] = "mean",
) -> tuple[list[AuRecording], dict[str, str]]:
    stat = np.mean if statistic == "mean" else np.median
    excluded: dict[str, str] = {}
    for rec in recordings:
        if rec.n_frames == 0:
            raise DataError(f"Recording {rec.video_id} has no frames")
        conf = float(stat(rec.confidence))
        succ = float(stat(rec.success))
        reasons = []
        if conf < conf_thresh:
            reasons.append(f"{statistic} confidence {conf:.3f} < {conf_thresh}")
        if succ < succ_thresh:
            reasons.append(f"{statistic} success {succ:.3f} < {succ_thresh}")
        if reasons:
            excluded[rec.video_id] = "; ".join(reasons)

    pairs = _partners(recordings)
    by_id = {r.video_id: r for r in recordings}
    for vid in list(excluded):
        for partner in pairs[by_id[vid].pair_id]:
            excluded.setdefault(partner, f"pair partner of excluded video {vid}")

    kept = [r for r in recordings if r.video_id not in excluded]
    logger.info("Quality filter kept %d of %d recordings", len(kept), len(recordings))
    return kept, excluded


# -----------------------
# Signal preprocessing
# -----------------------
def smooth(series: np.ndarray, window: int = 4) -> np.ndarray:
    """
    Left-aligned rolling mean: out[i] = mean(x[i : i + window]), with the last value repeated
    past the end so the output keeps the input length.
    """
    x = np.asarray(series, dtype=float)
    if window < 1:
        raise ArgumentError(f"window must be >= 1, got {window}")
    if window > len(x):
        raise ArgumentError(f"window {window} exceeds series length {len(x)}")
    if window == 1:
        return x.copy()
    padded = np.concatenate([x, np.repeat(x[-1:], window - 1, axis=0)])
    rolled = pd.DataFrame(padded).rolling(window).mean().to_numpy()
    out = rolled[window - 1 :]
    return out.reshape(x.shape)


def smooth_recording(recording: AuRecording, window: int = 4) -> AuRecording:
    return recording.with_au(smooth(recording.au, window))


def truncate(recording: AuRecording, n_frames: int = N_FRAMES) -> AuRecording:
    if recording.n_frames < n_frames:
        raise DataError(f"Recording {recording.video_id} has {recording.n_frames} frames, need {n_frames}")
    return recording.with_au(recording.au[:n_frames], n_frames)


def _zscore(au: np.ndarray) -> np.ndarray:
    mean = au.mean(axis=0)
    sd = au.std(axis=0, ddof=1) if len(au) > 1 else np.zeros(au.shape[1])
    constant = sd == 0
    sd = np.where(constant, 1.0, sd)
    z = (au - mean) / sd
    z[:, constant] = 0.0
    return z


def fit_normalization(train: list[AuRecording]) -> NormalizationParams:
    if not train:
        raise ArgumentError("Cannot fit normalization on an empty training set")
    global_min = min(float(_zscore(rec.au).min()) for rec in train)
    return NormalizationParams(global_min_z=global_min)


def normalize(
    recording: AuRecording, params: NormalizationParams, train_mode: bool = False
) -> tuple[AuRecording, int]:
    """Per-video, per-AU z-scores shifted by the training minimum; returns (recording, clamped cells)."""
    shifted = _zscore(recording.au) - params.global_min_z
    below = shifted < 0
    clamps = int(below.sum())
    if clamps:
        if train_mode:
            logger.warning("%d training cells of %s fell below the fitted minimum", clamps, recording.video_id)
        shifted[below] = 0.0
    return recording.with_au(shifted), clamps


def preprocess(recordings: list[AuRecording], window: int = 4, n_frames: int = N_FRAMES) -> list[AuRecording]:
    return [smooth_recording(truncate(rec, n_frames), window) for rec in recordings]


# -----------------------
# Train / test split
# -----------------------
def _group_pairs(recordings: list[AuRecording]) -> dict[str, list[AuRecording]]:
    by_pair: dict[str, list[AuRecording]] = defaultdict(list)
    for rec in recordings:
        by_pair[rec.pair_id].append(rec)
    bad = sorted(pid for pid, members in by_pair.items() if len(members) != 2)
    if bad:
        raise PairingError(bad)
    return by_pair


def _allocate(sizes: list[int], ratio: float) -> list[int]:
    """Largest-remainder allocation: each stratum gets floor or ceil of ratio·n, total round(ratio·N)."""
    quotas = np.asarray(sizes, dtype=float) * ratio
    counts = np.floor(quotas).astype(int)
    target = int(round(ratio * sum(sizes)))
    remainders = quotas - counts
    for i in np.argsort(-remainders, kind="stable")[: max(0, target - counts.sum())]:
        counts[i] += 1
    return counts.tolist()


def split_pairs(recordings: list[AuRecording], ratio: float = 0.8, seed: int = 0) -> SplitAssignment:
    if not 0 < ratio < 1:
        raise ArgumentError(f"ratio must lie in (0, 1), got {ratio}")
    by_pair = _group_pairs(recordings)

    strata: dict[tuple[str, str], list[str]] = defaultdict(list)
    for pid in sorted(by_pair):
        rec = by_pair[pid][0]
        strata[(rec.emotion_flag.value, rec.valence.value)].append(pid)

    stratified = all(len(members) >= 2 for members in strata.values())
    if not stratified:
        logger.warning("Stratum with fewer than 2 pairs; falling back to global sampling")
        strata = {("all", "all"): sorted(by_pair)}

    keys = sorted(strata)
    counts = _allocate([len(strata[k]) for k in keys], ratio)
    assignment: dict[str, Literal["train", "test"]] = {}
    for i, (key, n_train) in enumerate(zip(keys, counts)):
        order = rng(seed, i).permutation(len(strata[key]))
        for rank, j in enumerate(order):
            assignment[strata[key][j]] = "train" if rank < n_train else "test"

    n_train = sum(1 for s in assignment.values() if s == "train")
    logger.info("Split %d pairs into %d train / %d test", len(assignment), n_train, len(assignment) - n_train)
    return SplitAssignment(assignment=assignment, ratio=ratio, seed=seed, stratified=stratified)


def apply_split(
    recordings: list[AuRecording], split: SplitAssignment
) -> tuple[list[AuRecording], list[AuRecording]]:
    train = [r for r in recordings if split.assignment.get(r.pair_id) == "train"]
    test = [r for r in recordings if split.assignment.get(r.pair_id) == "test"]
    return train, test
