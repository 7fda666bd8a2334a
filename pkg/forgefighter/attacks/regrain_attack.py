"""
Denoise then regrain attack.

Suppresses sensor-noise residuals with a Gaussian denoise and spoofs them with
fresh synthetic grain.
"""

import numpy as np

from forgefighter.constants import AttackFamily
from forgefighter.core.base_attack import BaseAttack
from forgefighter.utils.filters import gaussian_blur
from forgefighter.utils.seeding import make_rng

GRAIN_SEED_BOUND = 2 ** 63


class RegrainAttack(BaseAttack):
    """Gaussian denoise followed by i.i.d. Gaussian grain."""

    family = AttackFamily.REGRAIN

    def sample_params(self, rng):
        """Denoise and grain strengths plus the seed of the grain field."""
        return {
            "denoise_sigma": self.uniform(rng, "denoise_sigma"),
            "grain_sigma": self.uniform(rng, "grain_sigma"),
            "grain_seed": int(rng.integers(0, GRAIN_SEED_BOUND)),
        }

    def apply(self, img, inst, prior=None):
        """
        Replace the sensor-noise residual with synthetic grain.

        Args:
            img: (H, W, 3) image in [0, 1]
            inst: REGRAIN AttackInstance
            prior: Unused

        Returns:
            numpy.ndarray: Denoised image plus grain, clipped to [0, 1]
        """
        self.check_instance(inst)
        # Step 1: wipe the high-pass residual
        denoised = gaussian_blur(img, float(inst["denoise_sigma"]))
        # Step 2: i.i.d. grain drawn from the instance's own seed
        grain = make_rng(inst["grain_seed"]).normal(
            0.0, float(inst["grain_sigma"]), size=denoised.shape
        )
        return np.clip(denoised + grain, 0.0, 1.0)


def apply_regrain(img, inst):
    return RegrainAttack().apply(img, inst)
