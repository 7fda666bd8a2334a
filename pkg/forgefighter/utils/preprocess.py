"""
Deterministic preprocessing operator.

Resizes to the working resolution and standardizes each channel per image.
"""

from dataclasses import dataclass

import numpy as np

from forgefighter.core.errors import PreconditionError
from forgefighter.utils.filters import resize_bilinear
from forgefighter.utils.image_io import validate_image

DEFAULT_WORKING_SIZE = 384
DEGENERATE_STD = 1e-6


@dataclass
class StandardizedImage:
    """A working-resolution raster with per-channel zero mean and unit std."""

    data: np.ndarray
    channel_mean: np.ndarray
    channel_std: np.ndarray

    @property
    def size(self):
        return self.data.shape[0]

    def reconstruct(self):
        """Undo the standardization (the resize is not inverted)."""
        return self.data * self.channel_std + self.channel_mean


def pi_preprocess(img, working_size=DEFAULT_WORKING_SIZE):
    """
    Resize to working_size x working_size and standardize per channel.

    A channel whose raw std is below 1e-6 is only shifted by its mean and its
    recorded std is 1.

    Args:
        img: (H, W, 3) image
        working_size: Output side length (>= 16)

    Returns:
        StandardizedImage: Standardized raster with recorded statistics
    """
    if working_size < 16:
        raise PreconditionError(f"Working size must be >= 16, got {working_size}")
    resized = resize_bilinear(validate_image(img), working_size, working_size)

    mean = resized.mean(axis=(0, 1))
    std = resized.std(axis=(0, 1))
    std = np.where(std < DEGENERATE_STD, 1.0, std)
    data = (resized - mean) / std
    return StandardizedImage(data=data, channel_mean=mean, channel_std=std)
