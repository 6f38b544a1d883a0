from __future__ import annotations

import csv
import logging
import os
from collections.abc import Iterator, Mapping
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .models import Split, VoicePreset

logger = logging.getLogger(__name__)

MANIFEST_COLUMNS = ("utterance_id", "audio_path", "split", "voice", "speaker")


@dataclass(frozen=True)
class ManifestEntry:
    """One utterance of a dataset.

    Attributes:
        utterance_id: Unique identifier.
        audio_path: Path of the WAV file.
        split: Dataset split.
        voice: Optional voice preset override.
        speaker: Optional speaker key used for split assignment.
    """

    utterance_id: str
    audio_path: Path
    split: Split
    voice: VoicePreset | None = None
    speaker: str | None = None


class Manifest:
    """An ordered collection of utterances with unique ids."""

    def __init__(self, entries: list[ManifestEntry], root: str | Path | None = None):
        """Initialize the manifest.

        Args:
            entries: The utterances.
            root: Directory that relative audio paths are resolved against.
        """
        seen: set[str] = set()
        duplicates = []
        for entry in entries:
            if entry.utterance_id in seen:
                duplicates.append(entry.utterance_id)
            seen.add(entry.utterance_id)
        if duplicates:
            raise ValueError(f"Duplicate utterance ids in manifest: {duplicates}.")
        self.entries = list(entries)
        self.root = Path(root) if root is not None else Path(".")

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[ManifestEntry]:
        return iter(self.entries)

    def __repr__(self) -> str:
        counts = {split.value: len(self.by_split(split)) for split in Split}
        return f"Manifest({len(self)} utterances, {counts})"

    def by_split(self, split: Split | str) -> list[ManifestEntry]:
        """Entries of one split, in manifest order."""
        split = Split(split)
        return [entry for entry in self.entries if entry.split is split]

    def resolve(self, entry: ManifestEntry) -> Path:
        """Absolute-or-root-relative path of an entry's audio."""
        if entry.audio_path.is_absolute():
            return entry.audio_path
        return self.root / entry.audio_path


def read_manifest(path: str | Path) -> Manifest:
    """Reads a manifest CSV; audio paths are relative to the manifest file.

    Args:
        path: Path of the CSV with header
            `utterance_id,audio_path,split[,voice][,speaker]`.

    Returns:
        Manifest: The parsed manifest.
    """
    path = Path(path)
    with path.open(newline="") as f:
        reader = csv.DictReader(f)
        missing = {"utterance_id", "audio_path", "split"} - set(reader.fieldnames or [])
        if missing:
            raise ValueError(f"Manifest {path} lacks columns {sorted(missing)}.")
        entries = []
        for row in reader:
            voice = (row.get("voice") or "").strip()
            speaker = (row.get("speaker") or "").strip()
            entries.append(
                ManifestEntry(
                    utterance_id=row["utterance_id"].strip(),
                    audio_path=Path(row["audio_path"].strip()),
                    split=Split(row["split"].strip().lower()),
                    voice=VoicePreset(voice.lower()) if voice else None,
                    speaker=speaker or None,
                )
            )
    return Manifest(entries, root=path.parent)


def write_manifest(manifest: Manifest, path: str | Path):
    """Writes a manifest CSV with audio paths relative to its directory."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(MANIFEST_COLUMNS)
        for entry in manifest:
            audio = manifest.resolve(entry)
            try:
                relative = Path(os.path.relpath(audio.resolve(), path.parent.resolve()))
            except ValueError:
                relative = audio
            writer.writerow(
                [
                    entry.utterance_id,
                    relative.as_posix(),
                    entry.split.value,
                    entry.voice.value if entry.voice else "",
                    entry.speaker or "",
                ]
            )


def assign_splits(
    speakers: Mapping[str, str | None],
    ratios: tuple[float, float, float] = (0.8, 0.1, 0.1),
    seed: int = 0,
) -> dict[str, Split]:
    """Assigns whole speakers to train, validation and test splits.

    Utterances without a speaker key count as their own speaker.

    Args:
        speakers: Speaker key of every utterance id.
        ratios: Train/val/test proportions of speakers.
        seed: Seed of the speaker shuffle.

    Returns:
        dict[str, Split]: The split of every utterance id.
    """
    if len(ratios) != 3 or any(r < 0 for r in ratios) or sum(ratios) <= 0:
        raise ValueError(
            f"Expected three non-negative split ratios; received {ratios}."
        )
    keys = {uid: speaker or uid for uid, speaker in speakers.items()}
    unique = sorted(set(keys.values()))
    order = np.random.default_rng(seed).permutation(len(unique))
    shuffled = [unique[i] for i in order]

    total = sum(ratios)
    n_val = int(round(len(unique) * ratios[1] / total))
    n_test = int(round(len(unique) * ratios[2] / total))
    if len(unique) >= 3:
        n_val = max(n_val, 1 if ratios[1] > 0 else 0)
        n_test = max(n_test, 1 if ratios[2] > 0 else 0)
    n_train = max(0, len(unique) - n_val - n_test)

    speaker_split: dict[str, Split] = {}
    for position, speaker in enumerate(shuffled):
        if position < n_train:
            speaker_split[speaker] = Split.TRAIN
        elif position < n_train + n_val:
            speaker_split[speaker] = Split.VAL
        else:
            speaker_split[speaker] = Split.TEST
    logger.debug(f"Split {len(unique)} speakers into {n_train}/{n_val}/{n_test}.")
    return {uid: speaker_split[key] for uid, key in keys.items()}
