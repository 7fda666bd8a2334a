"""
Randomized test-time defense.

Runs the detector on N mildly jittered views of an image, averages the logits
and max-pools the evidence maps once they are mapped back to input coordinates.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from forgefighter.attacks.jpeg_attack import realign_recompress
from forgefighter.core.detector import TwoStreamDetector, sigmoid
from forgefighter.core.errors import PreconditionError
from forgefighter.utils.filters import bilinear_sample, resize_bilinear
from forgefighter.utils.preprocess import DEFAULT_WORKING_SIZE, pi_preprocess
from forgefighter.utils.seeding import make_rng, seed_for

logger = logging.getLogger(__name__)


@dataclass
class DefenseConfig:
    """Jitter ranges and view count of the test-time defense."""

    n_views: int = 3
    phase_max: int = 3
    gamma_range: tuple = (0.95, 1.05)
    quality_range: tuple = (85, 95)
    shift_max: int = 7
    seed: int = 0
    enabled: bool = True

    def __post_init__(self):
        if self.n_views < 1:
            raise PreconditionError(f"N must be >= 1, got {self.n_views}")
        self.gamma_range = tuple(float(v) for v in self.gamma_range)
        self.quality_range = tuple(int(v) for v in self.quality_range)


@dataclass(frozen=True)
class Jitter:
    """One defense view: crop/resize phase, mild gamma and a JPEG phase."""

    phase_x: int = 0
    phase_y: int = 0
    gamma: float = 1.0
    quality: Optional[int] = None
    shift_x: int = 0
    shift_y: int = 0

    def apply(self, img):
        """
        Produce the jittered view at the input's size.

        Args:
            img: (H, W, 3) image

        Returns:
            numpy.ndarray: Jittered image
        """
        h, w = img.shape[:2]
        out = np.asarray(img, dtype=np.float64)
        if self.phase_x or self.phase_y:
            out = resize_bilinear(out[self.phase_y :, self.phase_x :], h, w)
        if self.gamma != 1.0:
            out = np.clip(np.maximum(out, 0.0) ** self.gamma, 0.0, 1.0)
        if self.quality is not None:
            out = realign_recompress(out, self.shift_x, self.shift_y, self.quality)
        return out

    def realign(self, evidence, height, width):
        """
        Resample a view's evidence map back onto the input image's frame.

        The phase crop drops the first phase_y rows and phase_x columns and stretches
        the rest, so input position b (a fraction of the side) sits at view position
        (b * n - phase) / (n - phase). The dropped strip clamps to the view border.
        The JPEG shift needs no undoing here; realign_recompress already shifts back.

        Args:
            evidence: (S, T) evidence of the jittered view
            height: Input image height
            width: Input image width

        Returns:
            numpy.ndarray: (S, T) evidence aligned with the input
        """
        if not (self.phase_x or self.phase_y):
            return evidence
        rows = _view_coords(evidence.shape[0], height, self.phase_y)
        cols = _view_coords(evidence.shape[1], width, self.phase_x)
        ys, xs = np.meshgrid(rows, cols, indexing="ij")
        return bilinear_sample(evidence, ys, xs)


def _view_coords(n_out, n_in, phase):
    """Evidence-grid coordinates in the view for each input-frame sample."""
    b = (np.arange(n_out) + 0.5) / n_out
    a = (b * n_in - phase) / (n_in - phase)
    return a * n_out - 0.5


@dataclass
class DefendedPrediction:
    probability: float
    mean_logit: float
    evidence: np.ndarray
    per_view_logits: List[float] = field(default_factory=list)
    per_view_evidence: List[np.ndarray] = field(default_factory=list)


def sample_jitters(cfg, image_id=""):
    """
    Seeded jitters for one image; view i draws from seed_for(cfg.seed, image_id, 0, i).

    A disabled defense yields a single identity view.
    """
    if not cfg.enabled:
        return [Jitter()]
    jitters = []
    for i in range(cfg.n_views):
        rng = make_rng(seed_for(cfg.seed, image_id, 0, i))
        jitters.append(
            Jitter(
                phase_x=int(rng.integers(0, cfg.phase_max + 1)),
                phase_y=int(rng.integers(0, cfg.phase_max + 1)),
                gamma=float(rng.uniform(*cfg.gamma_range)),
                quality=int(rng.integers(cfg.quality_range[0], cfg.quality_range[1] + 1)),
                shift_x=int(rng.integers(0, cfg.shift_max + 1)),
                shift_y=int(rng.integers(0, cfg.shift_max + 1)),
            )
        )
    return jitters


def ttd_predict(
    x,
    p,
    cfg=None,
    detector=None,
    jitters=None,
    image_id="",
    working_size=DEFAULT_WORKING_SIZE,
):
    """
    Defended prediction over jittered views.

    Args:
        x: (H, W, 3) image
        p: DetectorParams
        cfg: DefenseConfig
        detector: TwoStreamDetector
        jitters: Explicit views (default: sampled from cfg and image_id)
        image_id: Id used to seed the jitters
        working_size: Working resolution

    Returns:
        DefendedPrediction: Mean-logit probability and max-pooled evidence
    """
    cfg = cfg or DefenseConfig()
    detector = detector or TwoStreamDetector()
    if jitters is None:
        jitters = sample_jitters(cfg, image_id)
    if not jitters:
        raise PreconditionError("Defense needs at least one view")

    logits = []
    maps = []
    for jitter in jitters:
        out = detector.forward(pi_preprocess(jitter.apply(x), working_size), p)
        logits.append(out.logit)
        maps.append(jitter.realign(out.evidence, *x.shape[:2]))

    # exact sum, independent of view order
    mean_logit = math.fsum(logits) / len(logits)
    return DefendedPrediction(
        probability=float(sigmoid(mean_logit)),
        mean_logit=mean_logit,
        evidence=np.maximum.reduce(maps),
        per_view_logits=logits,
        per_view_evidence=maps,
    )
