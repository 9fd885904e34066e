import logging
from typing import Sequence

import numpy as np
import pandas as pd

from facedyn.core.errors import ArgumentError
from facedyn.schemas.features import TransitionEventSummary, TransitionThresholds
from facedyn.schemas.ingest import AuRecording
from facedyn.schemas.nmf import RepresentativeSet

logger = logging.getLogger(__name__)


def fit_transition_thresholds(train: Sequence[AuRecording], reps: RepresentativeSet) -> TransitionThresholds:
    """Mean and SD of the pooled frame-to-frame differences of the representative AUs."""
    if not train:
        raise ArgumentError("Cannot fit transition thresholds on an empty training set")
    pooled = np.concatenate([np.diff(rec.series(au)) for rec in train for au in dict.fromkeys(reps.aus)])
    return TransitionThresholds(train_mean=float(pooled.mean()), train_sd=float(pooled.std(ddof=1)))


def _runs(flags: np.ndarray) -> list[tuple[int, int]]:
    """(start, length) of each maximal run of True."""
    edges = np.diff(np.concatenate([[0], flags.astype(np.int8), [0]]))
    starts = np.flatnonzero(edges == 1)
    ends = np.flatnonzero(edges == -1)
    return [(int(s), int(e - s)) for s, e in zip(starts, ends)]


def transition_events(
    recordings: Sequence[AuRecording], reps: RepresentativeSet, thresholds: TransitionThresholds
) -> list[TransitionEventSummary]:
    """
    A frame is a transition frame when its first difference falls outside mean ± SD of the training
    differences; maximal runs of such frames are events. Counts and durations pool the
    representative AUs of each video.
    """
    summaries = []
    for rec in recordings:
        durations: list[int] = []
        velocities: list[np.ndarray] = []
        n_frames = 0
        n_transition = 0
        for au in dict.fromkeys(reps.aus):
            v = np.diff(rec.series(au))
            flags = (v < thresholds.low) | (v > thresholds.high)
            n_frames += len(v)
            n_transition += int(flags.sum())
            for start, length in _runs(flags):
                durations.append(length)
                velocities.append(v[start : start + length])
        speed = np.abs(np.concatenate(velocities)) if velocities else np.zeros(0)
        signed = np.concatenate(velocities) if velocities else np.zeros(0)
        summaries.append(
            TransitionEventSummary(
                video_id=rec.video_id,
                event_count=len(durations),
                total_transition_fraction=n_transition / n_frames if n_frames else 0.0,
                mean_duration=float(np.mean(durations)) if durations else 0.0,
                max_duration=max(durations, default=0),
                mean_velocity=float(speed.mean()) if len(speed) else 0.0,
                max_velocity=float(speed.max()) if len(speed) else 0.0,
                velocity_range=float(np.ptp(signed)) if len(signed) else 0.0,
                thresholds=thresholds,
            )
        )
    return summaries


def transition_feature_matrix(summaries: Sequence[TransitionEventSummary]) -> pd.DataFrame:
    frame = pd.DataFrame([s.model_dump(exclude={"thresholds"}) for s in summaries])
    if frame.empty:
        return frame
    return frame.set_index("video_id").astype(float)
