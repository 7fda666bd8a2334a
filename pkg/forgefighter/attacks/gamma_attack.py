"""
Gamma / color-gain attack (mild tone mapping).
"""

import numpy as np

from forgefighter.constants import AttackFamily
from forgefighter.core.base_attack import BaseAttack


class GammaAttack(BaseAttack):
    """Per-channel gain applied after a global power law."""

    family = AttackFamily.GAMMA

    def sample_params(self, rng):
        """Draw the exponent and three independent channel gains."""
        return {
            "gamma": self.uniform(rng, "gamma"),
            "gain_r": self.uniform(rng, "gain"),
            "gain_g": self.uniform(rng, "gain"),
            "gain_b": self.uniform(rng, "gain"),
        }

    def apply(self, img, inst, prior=None):
        """
        Tone-map the image.

        Args:
            img: (H, W, 3) image in [0, 1]
            inst: GAMMA AttackInstance
            prior: Unused; gamma does not move pixels

        Returns:
            numpy.ndarray: clip(gain * img ** gamma) per channel
        """
        self.check_instance(inst)
        gains = np.array([inst["gain_r"], inst["gain_g"], inst["gain_b"]], dtype=np.float64)
        # negative inputs have no real power, clamp before the exponent
        toned = np.power(np.maximum(img, 0.0), float(inst["gamma"]))
        return np.clip(toned * gains, 0.0, 1.0)


def apply_gamma(img, inst):
    return GammaAttack().apply(img, inst)
