"""
Visualization utilities.

This module provides evidence overlays and report plots.
"""

import logging

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from forgefighter.utils.filters import resize_bilinear  # noqa: E402
from forgefighter.utils.image_io import save_image, validate_image  # noqa: E402

logger = logging.getLogger(__name__)

OVERLAY_COLOR = np.array([1.0, 0.55, 0.0])
OVERLAY_ALPHA = 0.75


def blend_overlay(img, evidence):
    """
    Blend an orange tint over the image with per-pixel alpha 0.75 * evidence.

    Args:
        img: (H, W, 3) image
        evidence: Evidence grid in [0, 1], resized to the image if needed

    Returns:
        numpy.ndarray: Blended image
    """
    img = validate_image(img)
    h, w = img.shape[:2]
    evidence = np.asarray(evidence, dtype=np.float64)
    if evidence.shape != (h, w):
        evidence = resize_bilinear(evidence, h, w)
    alpha = OVERLAY_ALPHA * np.clip(evidence, 0.0, 1.0)[..., None]
    return img * (1.0 - alpha) + OVERLAY_COLOR * alpha


def render_overlay(img, evidence, out_path):
    """Write the evidence overlay as a PNG."""
    save_image(blend_overlay(img, evidence), out_path)
    logger.debug(f"Wrote overlay {out_path}")


def plot_risk_coverage(curves, out_path):
    """
    Risk-coverage curves of several splits in one figure.

    Args:
        curves: {split: (coverage, risk)}
        out_path: Image path
    """
    fig, ax = plt.subplots(figsize=(6, 4))
    for split, (coverage, risk) in curves.items():
        ax.plot(coverage, risk, label=split)
    ax.set_xlabel("coverage")
    ax.set_ylabel("risk")
    ax.set_xlim(0.0, 1.0)
    ax.legend(loc="upper left", fontsize="small")
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)


def plot_reliability(bins_by_split, out_path):
    """
    Reliability diagram: per-bin accuracy against mean confidence.

    Args:
        bins_by_split: {split: [{"confidence", "accuracy", "count"}]}
        out_path: Image path
    """
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.plot([0.5, 1.0], [0.5, 1.0], color="gray", linestyle="--", linewidth=1)
    for split, bins in bins_by_split.items():
        ax.plot(
            [b["confidence"] for b in bins],
            [b["accuracy"] for b in bins],
            marker="o",
            label=split,
        )
    ax.set_xlabel("confidence")
    ax.set_ylabel("accuracy")
    ax.legend(loc="lower right", fontsize="small")
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)
