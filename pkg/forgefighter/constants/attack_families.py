"""
Counter-forensic attack families and their documented parameter ranges.
"""

from enum import Enum


class AttackFamily(str, Enum):
    """The six counter-forensic transform families."""

    JPEG = "jpeg"
    WARP = "warp"
    REGRAIN = "regrain"
    SEAM = "seam"
    GAMMA = "gamma"
    TRANSCODE = "transcode"

    @classmethod
    def parse(cls, name):
        """Look up a family by its serialized name (case-insensitive)."""
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).lower())
        except ValueError:
            valid = ", ".join(f.value for f in cls)
            raise ValueError(f"Unknown attack family '{name}' (expected one of {valid})")


FAMILY_ORDER = tuple(AttackFamily)

# Ranges are (low, high); integer parameters include both ends.
DEFAULT_ATTACK_RANGES = {
    AttackFamily.JPEG: {
        "quality": (50, 90),
        "shift": (0, 7),
    },
    AttackFamily.WARP: {
        "amplitude": (0.25, 1.0),
    },
    AttackFamily.REGRAIN: {
        "denoise_sigma": (0.6, 1.5),
        "grain_sigma": (1.0 / 255.0, 4.0 / 255.0),
    },
    AttackFamily.SEAM: {
        "blur_sigma": (1.0, 2.0),
        "band_radius": (2, 6),
    },
    AttackFamily.GAMMA: {
        "gamma": (0.8, 1.25),
        "gain": (0.95, 1.05),
    },
    AttackFamily.TRANSCODE: {
        "factor": (0.5, 0.75),
        "quality": (40, 70),
    },
}

WARP_CONTROL_GRID = 8
