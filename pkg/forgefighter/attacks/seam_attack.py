"""
Seam smoothing attack.

Blurs a band around the prior's 0.5 level set, the proxy for a compositing
boundary. Pixels outside the band are untouched.
"""

import numpy as np

from forgefighter.constants import AttackFamily
from forgefighter.core.base_attack import BaseAttack
from forgefighter.core.errors import PreconditionError
from forgefighter.utils.filters import dilate_binary, gaussian_blur


def seam_band(prior_grid, band_radius):
    """
    Pixels within band_radius of the prior's 0.5 level set.

    Args:
        prior_grid: Prior values in [0, 1]
        band_radius: Chebyshev radius in pixels

    Returns:
        numpy.ndarray: Boolean band mask (empty when the prior has no boundary)
    """
    inside = np.asarray(prior_grid) >= 0.5
    if inside.all() or not inside.any():
        return np.zeros(inside.shape, dtype=bool)
    return dilate_binary(inside, band_radius) & dilate_binary(~inside, band_radius)


def seam_weights(band):
    """Blend weights: 1 inside the band, 1/2 on its outermost pixels, 0 elsewhere."""
    weights = band.astype(np.float64)
    edge = band & dilate_binary(~band, 1)
    weights[edge] = 0.5
    return weights


class SeamAttack(BaseAttack):
    """Boundary-band Gaussian smoothing guided by the weak prior."""

    family = AttackFamily.SEAM

    def sample_params(self, rng):
        """
        Draw the band half-width and the smoothing strength.

        Args:
            rng: numpy Generator seeded for this instance

        Returns:
            dict: Integer band_radius in pixels and blur_sigma
        """
        return {
            "band_radius": self.integer(rng, "band_radius"),
            "blur_sigma": self.uniform(rng, "blur_sigma"),
        }

    def apply(self, img, inst, prior=None):
        """
        Smooth the compositing boundary implied by the prior.

        Args:
            img: (H, W, 3) image
            inst: SEAM AttackInstance
            prior: WeakPrior or (H, W) grid; required

        Returns:
            numpy.ndarray: Image blurred inside the band, unchanged outside

        Raises:
            PreconditionError: If the prior is missing or has the wrong shape
        """
        self.check_instance(inst)
        if prior is None:
            raise PreconditionError("Seam attack requires a weak prior")
        grid = np.asarray(getattr(prior, "grid", prior), dtype=np.float64)
        if grid.shape != img.shape[:2]:
            raise PreconditionError(
                f"Prior shape {grid.shape} does not match image shape {img.shape[:2]}"
            )

        # Find the boundary band
        weights = seam_weights(seam_band(grid, int(inst["band_radius"])))
        if not weights.any():
            return np.array(img, dtype=np.float64, copy=True)

        # Blend: blurred in the band, half-and-half on its rim
        blurred = gaussian_blur(img, float(inst["blur_sigma"]))
        w = weights[..., None]
        return np.where(w == 1.0, blurred, np.where(w == 0.0, img, 0.5 * (img + blurred)))


def apply_seam(img, inst, prior):
    return SeamAttack().apply(img, inst, prior)
