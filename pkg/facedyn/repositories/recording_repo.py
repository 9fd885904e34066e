# facedyn/repositories/recording_repo.py

import io
import logging
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import orjson
import pandas as pd

from facedyn.core.errors import DataError
from facedyn.schemas.humancmp import HumanRating
from facedyn.schemas.ingest import AU_COLUMNS, MANIFEST_COLUMNS, AuFrames, AuRecording, ManifestEntry
from facedyn.services import humancmp_service, ingest_service

logger = logging.getLogger(__name__)

ARRAY_FIELDS = ("frame_index", "timestamp", "confidence", "success", "au")


def au_csv_bytes(frames: AuFrames) -> bytes:
    """Serialize frames in the OpenFace intensity schema read by `parse_au_csv`."""
    df = pd.DataFrame(frames.au, columns=AU_COLUMNS)
    df.insert(0, "frame", frames.frame_index.astype(int))
    df.insert(1, "timestamp", frames.timestamp)
    df.insert(2, "confidence", frames.confidence)
    df.insert(3, "success", frames.success.astype(int))
    return df.to_csv(index=False, float_format="%.17g").encode()


class RecordingRepository:
    """AU CSVs plus manifest under one data directory."""

    def __init__(self, data_dir: Path, manifest: Optional[Path] = None):
        self.data_dir = Path(data_dir)
        self.manifest = Path(manifest) if manifest else self.data_dir / "manifest.csv"

    def write_recording(self, recording: AuRecording, path: Optional[str] = None) -> Path:
        target = self.data_dir / (path or f"{recording.video_id}.csv")
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_bytes(au_csv_bytes(recording))
        return target

    def write_manifest(self, entries: Sequence[ManifestEntry]) -> Path:
        self.manifest.parent.mkdir(parents=True, exist_ok=True)
        df = pd.DataFrame([e.model_dump(mode="json") for e in entries], columns=MANIFEST_COLUMNS)
        self.manifest.write_bytes(df.to_csv(index=False).encode())
        return self.manifest

    def read_manifest(self) -> list[ManifestEntry]:
        if not self.manifest.exists():
            raise DataError(f"Manifest not found: {self.manifest}")
        return ingest_service.parse_manifest(self.manifest.read_bytes())

    def read_recording(self, entry: ManifestEntry) -> AuRecording:
        path = Path(entry.path)
        if not path.is_absolute():
            path = self.data_dir / path
        if not path.exists():
            raise DataError(f"AU CSV for {entry.video_id} not found: {path}")
        frames = ingest_service.parse_au_csv(path.read_bytes())
        return AuRecording.from_frames(frames, entry)

    def read_all(self) -> list[AuRecording]:
        entries = self.read_manifest()
        recordings = [self.read_recording(e) for e in entries]
        logger.info("Loaded %d recordings from %s", len(recordings), self.data_dir)
        return recordings

    def write_dataset(self, recordings: Sequence[AuRecording], entries: Sequence[ManifestEntry]) -> None:
        for rec, entry in zip(recordings, entries):
            self.write_recording(rec, entry.path)
        self.write_manifest(entries)
        logger.info("Wrote %d AU CSVs to %s", len(recordings), self.data_dir)

    # -----------------------
    # Ratings
    # -----------------------
    def write_ratings(self, ratings: Sequence[HumanRating], path: Optional[Path] = None) -> Path:
        target = Path(path) if path else self.data_dir / "ratings.csv"
        df = pd.DataFrame([r.model_dump() for r in ratings], columns=humancmp_service.RATING_COLUMNS)
        target.write_bytes(df.to_csv(index=False).encode())
        return target

    def read_ratings(self, path: Optional[Path] = None) -> list[HumanRating]:
        source = Path(path) if path else self.data_dir / "ratings.csv"
        if not source.exists():
            raise DataError(f"Ratings file not found: {source}")
        return humancmp_service.parse_ratings(source.read_bytes())


class RecordingStore:
    """Preprocessed recordings as one npz archive plus a metadata document, so stages rerun independently."""

    def __init__(self, root: Path):
        self.root = Path(root)

    def save(self, name: str, recordings: Sequence[AuRecording]) -> Path:
        self.root.mkdir(parents=True, exist_ok=True)
        arrays = {f"{i}.{field}": getattr(rec, field) for i, rec in enumerate(recordings) for field in ARRAY_FIELDS}
        buf = io.BytesIO()
        np.savez_compressed(buf, **arrays)
        (self.root / f"{name}.npz").write_bytes(buf.getvalue())
        meta = [rec.model_dump(mode="json", exclude=set(ARRAY_FIELDS)) for rec in recordings]
        (self.root / f"{name}.json").write_bytes(orjson.dumps(meta, option=orjson.OPT_SORT_KEYS))
        return self.root / f"{name}.npz"

    def load(self, name: str) -> list[AuRecording]:
        npz, meta_path = self.root / f"{name}.npz", self.root / f"{name}.json"
        if not npz.exists() or not meta_path.exists():
            raise DataError(f"No stored recordings named '{name}' in {self.root}; run the ingest stage first")
        meta = orjson.loads(meta_path.read_bytes())
        with np.load(npz) as arrays:
            return [
                AuRecording(**m, **{field: arrays[f"{i}.{field}"] for field in ARRAY_FIELDS})
                for i, m in enumerate(meta)
            ]
