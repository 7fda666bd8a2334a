"""
Sub-pixel resampling warp attack.

A low-frequency displacement field is built from an 8x8 control grid of random
2-vectors and the image is resampled along it.
"""

import numpy as np

from forgefighter.constants import WARP_CONTROL_GRID, AttackFamily
from forgefighter.core.base_attack import BaseAttack
from forgefighter.utils.filters import bilinear_sample, resize_bilinear


class WarpAttack(BaseAttack):
    """Smooth sub-pixel warp with amplitude a in pixels."""

    family = AttackFamily.WARP

    def sample_params(self, rng):
        """
        Draw an amplitude, then a control grid of displacements bounded by it.

        The grid is stored flattened as a tuple so the instance stays hashable.
        """
        amplitude = self.uniform(rng, "amplitude")
        grid = rng.uniform(
            -amplitude, amplitude, size=(WARP_CONTROL_GRID, WARP_CONTROL_GRID, 2)
        )
        return {"amplitude": amplitude, "grid": tuple(grid.ravel().tolist())}

    @staticmethod
    def displacement_field(inst, height, width):
        """
        Full-resolution displacement field D.

        Args:
            inst: WARP AttackInstance
            height: Field height
            width: Field width

        Returns:
            numpy.ndarray: (height, width, 2) field of (dx, dy) per pixel
        """
        control = np.asarray(inst["grid"], dtype=np.float64).reshape(
            WARP_CONTROL_GRID, WARP_CONTROL_GRID, 2
        )
        return resize_bilinear(control, height, width)

    def _resample(self, data, inst):
        h, w = data.shape[:2]
        field = self.displacement_field(inst, h, w)
        # pull each output pixel from its displaced source position
        ys, xs = np.meshgrid(np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64), indexing="ij")
        return bilinear_sample(data, ys + field[..., 1], xs + field[..., 0])

    def apply(self, img, inst, prior=None):
        """
        Resample the image along the displacement field.

        Args:
            img: (H, W, 3) image
            inst: WARP AttackInstance
            prior: Unused here; see transform_prior

        Returns:
            numpy.ndarray: Warped image, borders clamped
        """
        self.check_instance(inst)
        return self._resample(img, inst)

    def transform_prior(self, grid, inst):
        """Move the prior with the same field as the image."""
        self.check_instance(inst)
        return self._resample(grid, inst)


def apply_warp(img, inst):
    return WarpAttack().apply(img, inst)
