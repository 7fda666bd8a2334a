"""
Synthetic paired corpus.

Reals are smooth color fields with texture and an elliptical skin-toned region.
Fakes take a pristine image of the same kind and replace the inner part of its
ellipse with pixels from a donor image, slightly blurred and chroma-shifted,
blended through a feathered alpha.
"""

import logging
import math
import os
from dataclasses import dataclass

import cv2
import numpy as np

from forgefighter.core.errors import PreconditionError
from forgefighter.harness.manifest import MANIFEST_FILE, ManifestEntry, write_manifest
from forgefighter.utils.filters import gaussian_blur, resize_bilinear
from forgefighter.utils.image_io import save_image
from forgefighter.utils.priors import FaceBox
from forgefighter.utils.seeding import make_rng, seed_for

logger = logging.getLogger(__name__)

DEFAULT_SIZE = 256
FEATHER_SIGMA = 1.0
FEATHER_WIDTH = int(math.ceil(3.0 * FEATHER_SIGMA))
INNER_SCALE = 0.8
DONOR_BLUR_SIGMA = 0.8
IMAGE_DIR = "images"


@dataclass
class SyntheticImage:
    image: np.ndarray
    box: FaceBox
    center: tuple
    axes: tuple


def ellipse_mask(size, center, axes):
    """Filled ellipse as a boolean mask."""
    canvas = np.zeros((size, size), dtype=np.uint8)
    cv2.ellipse(canvas, center, axes, 0, 0, 360, 1, thickness=-1)
    return canvas.astype(bool)


def synth_base(seed, size=DEFAULT_SIZE):
    """
    One bona fide synthetic face-like image.

    Args:
        seed: Generator seed
        size: Side length

    Returns:
        SyntheticImage: Image with its face box and ellipse geometry
    """
    rng = make_rng(seed)
    field = resize_bilinear(rng.uniform(0.2, 0.8, size=(4, 4, 3)), size, size)
    texture = gaussian_blur(rng.normal(0.0, 0.04, size=(size, size, 3)), 0.7)
    background = field + texture

    cx = int(rng.integers(int(0.4 * size), int(0.6 * size) + 1))
    cy = int(rng.integers(int(0.4 * size), int(0.6 * size) + 1))
    ax = int(rng.integers(int(0.18 * size), int(0.26 * size) + 1))
    ay = int(rng.integers(int(0.22 * size), int(0.30 * size) + 1))

    tone = np.array([0.86, 0.66, 0.52]) * rng.uniform(0.8, 1.1)
    ramp = np.linspace(-0.05, 0.05, size)[None, :, None] * rng.uniform(-1.0, 1.0)
    skin = tone + ramp + rng.normal(0.0, 0.02, size=(size, size, 3))

    region = gaussian_blur(ellipse_mask(size, (cx, cy), (ax, ay)).astype(np.float64), 1.5)
    image = np.clip(background * (1.0 - region[..., None]) + skin * region[..., None], 0.0, 1.0)
    box = FaceBox(
        float(max(cx - ax, 0)),
        float(max(cy - ay, 0)),
        float(min(cx + ax + 1, size)),
        float(min(cy + ay + 1, size)),
    )
    return SyntheticImage(image=image, box=box, center=(cx, cy), axes=(ax, ay))


def synth_fake(source_seed, donor_seed, offset_seed, size=DEFAULT_SIZE):
    """
    Splice a donor's pixels into the inner ellipse of a pristine source.

    Pixels farther than FEATHER_WIDTH from the inner ellipse equal the source.

    Returns:
        SyntheticImage: Fake with the source's face box
    """
    source = synth_base(source_seed, size)
    donor = synth_base(donor_seed, size)
    rng = make_rng(offset_seed)

    inner_axes = tuple(max(int(a * INNER_SCALE), 1) for a in source.axes)
    alpha = gaussian_blur(
        ellipse_mask(size, source.center, inner_axes).astype(np.float64), FEATHER_SIGMA
    )[..., None]

    offset = rng.uniform(-0.04, 0.04, size=3)
    offset -= offset @ np.array([0.299, 0.587, 0.114])
    patch = np.clip(gaussian_blur(donor.image, DONOR_BLUR_SIGMA) + offset, 0.0, 1.0)

    image = source.image * (1.0 - alpha) + patch * alpha
    return SyntheticImage(image=image, box=source.box, center=source.center, axes=inner_axes)


def split_for(index, count, val_fraction, test_fraction):
    n_test = int(round(count * test_fraction))
    n_val = int(round(count * val_fraction))
    n_train = count - n_val - n_test
    if index < n_train:
        return "train"
    if index < n_train + n_val:
        return "val"
    return "test"


def pair_seeds(seed, index):
    """Seeds of (real, fake source, fake donor, chroma offset) for pair index."""
    return (
        seed_for(seed, "real", index),
        seed_for(seed, "source", index),
        seed_for(seed, "donor", index),
        seed_for(seed, "offset", index),
    )


def gen_synth(count, seed, out_dir, size=DEFAULT_SIZE, val_fraction=0.0, test_fraction=0.2):
    """
    Generate a balanced synthetic corpus and its manifest.

    Pair i yields ``real-i`` and ``fake-i``, both assigned the same split so every
    split stays balanced.

    Args:
        count: Total number of images (even, >= 2)
        seed: Corpus seed
        out_dir: Output directory
        size: Image side length
        val_fraction: Fraction of pairs in the val split
        test_fraction: Fraction of pairs in the test split

    Returns:
        list: ManifestEntry objects (also written to out_dir/manifest.jsonl)
    """
    if count < 2 or count % 2:
        raise PreconditionError(f"count must be even and >= 2, got {count}")
    os.makedirs(os.path.join(out_dir, IMAGE_DIR), exist_ok=True)

    pairs = count // 2
    entries = []
    for i in range(pairs):
        real_seed, source_seed, donor_seed, offset_seed = pair_seeds(seed, i)
        split = split_for(i, pairs, val_fraction, test_fraction)
        for label, item in (
            (0, synth_base(real_seed, size)),
            (1, synth_fake(source_seed, donor_seed, offset_seed, size)),
        ):
            image_id = f"{'fake' if label else 'real'}-{i:04d}"
            rel_path = os.path.join(IMAGE_DIR, f"{image_id}.png")
            save_image(item.image, os.path.join(out_dir, rel_path))
            entries.append(
                ManifestEntry(id=image_id, path=rel_path, label=label, split=split, box=item.box)
            )

    write_manifest(entries, os.path.join(out_dir, MANIFEST_FILE))
    logger.info(f"Wrote {len(entries)} synthetic images to {out_dir}")
    return entries
