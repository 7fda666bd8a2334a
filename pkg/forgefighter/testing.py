"""
Test data factories for the ForgeFighter system.

These helpers build small deterministic images, priors, training samples and
scored prediction records for unit tests.
"""

import numpy as np

from forgefighter.core.trainer import TrainingSample
from forgefighter.utils.filters import gaussian_blur
from forgefighter.utils.metrics import PredictionRecord
from forgefighter.utils.priors import FaceBox, build_prior
from forgefighter.utils.seeding import make_rng


def random_image(seed=0, height=32, width=32):
    """Uniform random image in [0, 1]."""
    return make_rng(seed).uniform(0.0, 1.0, size=(height, width, 3))


def textured_image(seed=0, size=32):
    """Smooth gradient plus fine texture, kept inside [0, 1]."""
    rng = make_rng(seed)
    ramp = np.linspace(0.25, 0.75, size)
    base = np.stack([np.add.outer(ramp, ramp) / 2.0] * 3, axis=-1)
    texture = rng.normal(0.0, 0.08, size=(size, size, 3))
    return np.clip(base + texture, 0.0, 1.0)


def constant_image(value=0.5, height=16, width=16):
    return np.full((height, width, 3), float(value))


def step_image(size=16, column=8):
    """Vertical step from 0 to 1 at the given column."""
    img = np.zeros((size, size, 3))
    img[:, column:, :] = 1.0
    return img


def centered_box(size, fraction=0.5):
    """Square face box covering the given fraction of the side, centered."""
    half = size * fraction / 2.0
    center = size / 2.0
    return FaceBox(center - half, center - half, center + half, center + half)


def centered_prior(size, fraction=0.5):
    return build_prior(centered_box(size, fraction), size, size, size).grid


def training_sample(seed=0, label=1, size=32, sample_id=None):
    """
    Small TrainingSample; fakes get a blurred patch inside a centered prior.

    Args:
        seed: Image seed
        label: 0 for real, 1 for fake
        size: Working resolution
        sample_id: Id (default derived from seed and label)

    Returns:
        TrainingSample: Sample with a prior
    """
    img = textured_image(seed, size)
    prior = centered_prior(size)
    if label == 1:
        inside = prior >= 0.5
        img = np.where(inside[..., None], gaussian_blur(img, 1.5), img)
    return TrainingSample(
        id=sample_id or f"{'fake' if label else 'real'}-{seed}",
        image=img,
        label=label,
        prior=prior,
    )


def scored_records(seed=0, n=20, split="clean", separation=1.0):
    """
    Balanced records whose probabilities are noisy functions of the labels.

    Args:
        seed: Generator seed
        n: Number of records
        split: Split tag
        separation: Logit shift between the classes

    Returns:
        list: PredictionRecord objects
    """
    rng = make_rng(seed)
    labels = np.arange(n) % 2
    logits = separation * (2 * labels - 1) + rng.normal(0.0, 1.0, size=n)
    probs = 1.0 / (1.0 + np.exp(-logits))
    return [
        PredictionRecord(id=f"r{i:04d}", split=split, probability=float(p), label=int(y))
        for i, (p, y) in enumerate(zip(probs, labels))
    ]


def records_from(probs, labels, split="clean"):
    return [
        PredictionRecord(id=f"r{i:04d}", split=split, probability=float(p), label=int(y))
        for i, (p, y) in enumerate(zip(probs, labels))
    ]
