"""
Social-app style transcode attack.

Downscales, recompresses and upscales back to the original size.
"""

import math

from forgefighter.constants import AttackFamily
from forgefighter.core.base_attack import BaseAttack
from forgefighter.utils.filters import resize_bilinear
from forgefighter.utils.jpeg_sim import JpegSimParams, jpeg_sim


def scaled_size(factor, height, width):
    """Round-half-up of factor x size, at least one pixel."""
    return (
        max(1, int(math.floor(factor * height + 0.5))),
        max(1, int(math.floor(factor * width + 0.5))),
    )


class TranscodeAttack(BaseAttack):
    """Downscale by f, JPEG at quality q, upscale back."""

    family = AttackFamily.TRANSCODE

    def sample_params(self, rng):
        """Scale factor f and the codec quality."""
        return {
            "factor": self.uniform(rng, "factor"),
            "quality": self.integer(rng, "quality"),
        }

    def apply(self, img, inst, prior=None):
        """
        Round-trip the image through a smaller JPEG.

        Args:
            img: (H, W, 3) image
            inst: TRANSCODE AttackInstance
            prior: Unused here; see transform_prior

        Returns:
            numpy.ndarray: Image at the original size
        """
        self.check_instance(inst)
        h, w = img.shape[:2]
        small_h, small_w = scaled_size(float(inst["factor"]), h, w)
        small = resize_bilinear(img, small_h, small_w)
        coded = jpeg_sim(small, JpegSimParams(quality=int(inst["quality"])))
        return resize_bilinear(coded, h, w)

    def transform_prior(self, grid, inst):
        """Resample the prior down and up like the image, without the codec."""
        self.check_instance(inst)
        h, w = grid.shape[:2]
        small = resize_bilinear(grid, *scaled_size(float(inst["factor"]), h, w))
        return resize_bilinear(small, h, w)


def apply_transcode(img, inst):
    return TranscodeAttack().apply(img, inst)
