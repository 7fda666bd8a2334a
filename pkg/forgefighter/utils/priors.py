"""
Weak face-region priors.

A prior is built from a face box by expanding it, rasterizing it at the working
resolution, blurring with a Gaussian and renormalizing to a peak of 1. Attacks
that move geometry transport the prior with the same geometric mapping.
"""

import logging
from dataclasses import dataclass

import numpy as np

from forgefighter.core.attack_manager import get_attack
from forgefighter.core.errors import PreconditionError
from forgefighter.utils.filters import gaussian_blur

logger = logging.getLogger(__name__)

DEFAULT_MARGIN = 0.15
DEFAULT_SIGMA_FRAC = 0.05


@dataclass(frozen=True)
class FaceBox:
    """Face box in source-image pixel coordinates."""

    x0: float
    y0: float
    x1: float
    y1: float

    def validate(self, width, height):
        if not (0 <= self.x0 < self.x1 <= width and 0 <= self.y0 < self.y1 <= height):
            raise PreconditionError(
                f"Face box {self.as_list()} is invalid for a {width}x{height} image"
            )
        return self

    def as_list(self):
        return [self.x0, self.y0, self.x1, self.y1]

    @classmethod
    def from_list(cls, values):
        x0, y0, x1, y1 = (float(v) for v in values)
        return cls(x0, y0, x1, y1)

    def expanded(self, margin, width, height):
        """Expand by margin x own width/height on each side, clipped to the image."""
        dx = margin * (self.x1 - self.x0)
        dy = margin * (self.y1 - self.y0)
        return FaceBox(
            max(self.x0 - dx, 0.0),
            max(self.y0 - dy, 0.0),
            min(self.x1 + dx, float(width)),
            min(self.y1 + dy, float(height)),
        )


@dataclass
class WeakPrior:
    """Soft prior g in [0, 1] at working resolution."""

    grid: np.ndarray
    source_box: FaceBox = None

    def with_grid(self, grid):
        return WeakPrior(grid=grid, source_box=self.source_box)


def prior_mask(box, src_h, src_w, working_size, margin=DEFAULT_MARGIN):
    """
    Binary mask of the expanded box at working resolution.

    A working pixel is inside when its center lies in the mapped box.

    Returns:
        numpy.ndarray: Boolean (working_size, working_size) mask
    """
    if margin < 0:
        raise PreconditionError(f"Prior margin must be >= 0, got {margin}")
    box.validate(src_w, src_h)
    ex = box.expanded(margin, src_w, src_h)

    centers = np.arange(working_size, dtype=np.float64) + 0.5
    x_in = (centers >= ex.x0 * working_size / src_w) & (centers <= ex.x1 * working_size / src_w)
    y_in = (centers >= ex.y0 * working_size / src_h) & (centers <= ex.y1 * working_size / src_h)
    return y_in[:, None] & x_in[None, :]


def build_prior(
    box,
    src_h,
    src_w,
    working_size,
    margin=DEFAULT_MARGIN,
    sigma_frac=DEFAULT_SIGMA_FRAC,
):
    """
    Build the weak prior for a face box.

    Args:
        box: FaceBox in source coordinates
        src_h: Source image height
        src_w: Source image width
        working_size: Working resolution side length
        margin: Expansion as a fraction of the box size per side
        sigma_frac: Gaussian sigma as a fraction of working_size

    Returns:
        WeakPrior: Prior with peak value 1

    Raises:
        PreconditionError: If the box is invalid or degenerate after clipping
    """
    if sigma_frac <= 0:
        raise PreconditionError(f"Prior sigma fraction must be > 0, got {sigma_frac}")
    mask = prior_mask(box, src_h, src_w, working_size, margin)
    if not mask.any():
        raise PreconditionError(f"Face box {box.as_list()} is degenerate after clipping")

    blurred = gaussian_blur(mask.astype(np.float64), sigma_frac * working_size)
    return WeakPrior(grid=blurred / blurred.max(), source_box=box)


def zero_prior(working_size):
    """All-zero localization target used for bona fide samples."""
    return WeakPrior(grid=np.zeros((working_size, working_size)))


def transform_prior(prior, inst):
    """
    Transport a prior through an attack instance.

    Photometric families leave the grid unchanged; WARP and TRANSCODE resample it
    with the instance's own geometry.

    Args:
        prior: WeakPrior
        inst: AttackInstance

    Returns:
        WeakPrior: Transported prior clamped to [0, 1]
    """
    grid = get_attack(inst.family).transform_prior(np.asarray(prior.grid), inst)
    return prior.with_grid(np.clip(grid, 0.0, 1.0))
