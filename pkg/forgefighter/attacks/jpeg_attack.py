"""
JPEG realign + recompress attack.

Shifts the content off the 8x8 block grid, recompresses and shifts back so the
output stays pixel-aligned with the clean view.
"""

from forgefighter.constants import AttackFamily
from forgefighter.core.base_attack import BaseAttack
from forgefighter.utils.filters import translate_replicate
from forgefighter.utils.jpeg_sim import JpegSimParams, jpeg_sim


class JpegAttack(BaseAttack):
    """Block-phase realignment followed by JPEG recompression."""

    family = AttackFamily.JPEG

    def sample_params(self, rng):
        """
        Draw a block-grid offset and a quality.

        Args:
            rng: numpy Generator seeded for this instance

        Returns:
            dict: Block offsets dx, dy and the JPEG quality
        """
        return {
            "dx": self.integer(rng, "shift"),
            "dy": self.integer(rng, "shift"),
            "quality": self.integer(rng, "quality"),
        }

    def apply(self, img, inst, prior=None):
        """Recompress off-grid; the output stays aligned with img, so the prior is kept."""
        self.check_instance(inst)
        return realign_recompress(img, inst["dx"], inst["dy"], inst["quality"])


def realign_recompress(img, dx, dy, quality):
    """Translate by (dx, dy), recompress at quality and translate back."""
    dx, dy = int(dx), int(dy)
    # move the content off the 8x8 grid
    shifted = translate_replicate(img, dx, dy)
    coded = jpeg_sim(shifted, JpegSimParams(quality=int(quality)))
    # and back, so paired clean/attacked views stay pixel-aligned
    return translate_replicate(coded, -dx, -dy)


def apply_jpeg(img, inst):
    return JpegAttack().apply(img, inst)
