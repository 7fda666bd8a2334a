"""
Dataset manifests.

A manifest is a UTF-8 JSONL file with one entry per image: id, relative path,
label, split and an optional face box in source-pixel coordinates.
"""

import json
import logging
import os
from dataclasses import dataclass
from typing import Optional

from forgefighter.core.errors import ManifestError
from forgefighter.core.trainer import TrainingSample
from forgefighter.utils.filters import resize_bilinear
from forgefighter.utils.image_io import load_image
from forgefighter.utils.priors import DEFAULT_MARGIN, DEFAULT_SIGMA_FRAC, FaceBox, build_prior

logger = logging.getLogger(__name__)

MANIFEST_FILE = "manifest.jsonl"
DATA_SPLITS = ("train", "val", "test")


@dataclass(frozen=True)
class ManifestEntry:
    id: str
    path: str
    label: int
    split: str
    box: Optional[FaceBox] = None

    def to_record(self):
        return {
            "id": self.id,
            "path": self.path,
            "label": self.label,
            "split": self.split,
            "box": self.box.as_list() if self.box else None,
        }

    @classmethod
    def from_record(cls, record):
        try:
            box = record.get("box")
            return cls(
                id=str(record["id"]),
                path=str(record["path"]),
                label=int(record["label"]),
                split=str(record["split"]),
                box=FaceBox.from_list(box) if box is not None else None,
            )
        except (KeyError, TypeError, ValueError) as e:
            raise ManifestError(f"Invalid manifest record {record!r}: {e}")


def validate_entries(entries, require_boxes=False):
    """
    Check manifest invariants.

    Args:
        entries: ManifestEntry list
        require_boxes: Whether fakes must carry a box (mask supervision)

    Raises:
        ManifestError: On duplicate ids, bad labels or splits, or missing boxes
    """
    seen = set()
    duplicates = []
    for entry in entries:
        if entry.id in seen:
            duplicates.append(entry.id)
        seen.add(entry.id)
        if entry.label not in (0, 1):
            raise ManifestError(f"Entry {entry.id}: label must be 0 or 1, got {entry.label}")
        if entry.split not in DATA_SPLITS:
            raise ManifestError(f"Entry {entry.id}: unknown split {entry.split!r}")
    if duplicates:
        raise ManifestError(f"Duplicate ids: {', '.join(duplicates)}")
    if require_boxes:
        missing = [e.id for e in entries if e.label == 1 and e.box is None]
        if missing:
            raise ManifestError(f"Fake entries without a face box: {', '.join(missing)}")


def write_manifest(entries, path):
    with open(path, "w", encoding="utf-8") as f:
        for entry in entries:
            f.write(json.dumps(entry.to_record(), sort_keys=True) + "\n")


def read_manifest(path):
    """
    Parse and validate a manifest.

    Args:
        path: JSONL file path

    Returns:
        list: ManifestEntry objects in file order
    """
    entries = []
    with open(path, encoding="utf-8") as f:
        for number, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as e:
                raise ManifestError(f"{path}:{number}: {e}")
            entries.append(ManifestEntry.from_record(record))
    validate_entries(entries)
    logger.info(f"Read {len(entries)} manifest entries from {path}")
    return entries


def select_split(entries, split):
    return [e for e in entries if e.split == split]


def load_samples(
    entries,
    root,
    working_size,
    margin=DEFAULT_MARGIN,
    sigma_frac=DEFAULT_SIGMA_FRAC,
):
    """
    Load entries as working-resolution TrainingSamples with their priors.

    Args:
        entries: ManifestEntry list
        root: Directory that entry paths are relative to
        working_size: Working resolution
        margin: Prior box margin
        sigma_frac: Prior blur as a fraction of the working size

    Returns:
        list: TrainingSample per entry

    Raises:
        ManifestError: Listing the ids whose files are missing
    """
    missing = [e.id for e in entries if not os.path.isfile(os.path.join(root, e.path))]
    if missing:
        raise ManifestError(f"Missing image files for ids: {', '.join(missing)}")

    samples = []
    for entry in entries:
        img = load_image(os.path.join(root, entry.path))
        src_h, src_w = img.shape[:2]
        prior = None
        if entry.box is not None:
            prior = build_prior(entry.box, src_h, src_w, working_size, margin, sigma_frac).grid
        samples.append(
            TrainingSample(
                id=entry.id,
                image=resize_bilinear(img, working_size, working_size),
                label=entry.label,
                prior=prior,
            )
        )
    return samples
