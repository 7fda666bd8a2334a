"""
Bit-exact JPEG simulation codec.

Color transform, 8x8 orthonormal DCT-II, IJG-scaled Annex K quantization with
round-half-up and the inverse path. No entropy coding is performed.
"""

from dataclasses import dataclass

import cv2
import numpy as np
from scipy import fft

from forgefighter.constants import (
    BLOCK_SIZE,
    CHROMA_BASE_TABLE,
    LUMA_BASE_TABLE,
    scaled_table,
)
from forgefighter.core.errors import PreconditionError
from forgefighter.utils.filters import resize_bilinear


@dataclass(frozen=True)
class JpegSimParams:
    """Codec settings. chroma_subsample=False means 4:4:4."""

    quality: int
    chroma_subsample: bool = False

    def __post_init__(self):
        if not 1 <= int(self.quality) <= 100:
            raise PreconditionError(f"JPEG quality must be in [1, 100], got {self.quality}")


# BT.601 full range, RGB in [0, 255]
_RGB_TO_YCBCR = np.array(
    [
        [0.299, 0.587, 0.114],
        [-0.168736, -0.331264, 0.5],
        [0.5, -0.418688, -0.081312],
    ]
)
_YCBCR_TO_RGB = np.array(
    [
        [1.0, 0.0, 1.402],
        [1.0, -0.344136, -0.714136],
        [1.0, 1.772, 0.0],
    ]
)
_CHROMA_OFFSET = np.array([0.0, 128.0, 128.0])


def rgb_to_ycbcr(img):
    """Convert a [0, 1] RGB raster to full-range YCbCr in [0, 255] units."""
    return (np.asarray(img) * 255.0) @ _RGB_TO_YCBCR.T + _CHROMA_OFFSET


def ycbcr_to_rgb(ycc):
    """Inverse of rgb_to_ycbcr, returning [0, 1]-scaled RGB (unclamped)."""
    return ((ycc - _CHROMA_OFFSET) @ _YCBCR_TO_RGB.T) / 255.0


def round_half_up(values):
    return np.floor(values + 0.5)


def _pad_to_multiple(plane, multiple):
    h, w = plane.shape
    pad_h = (-h) % multiple
    pad_w = (-w) % multiple
    if pad_h == 0 and pad_w == 0:
        return plane
    return cv2.copyMakeBorder(plane, 0, pad_h, 0, pad_w, cv2.BORDER_REPLICATE)


def quantize_plane(plane, table):
    """
    Run one plane through DCT, quantization and inverse DCT.

    Args:
        plane: 2-D array in [0, 255] units
        table: 8x8 quantization table

    Returns:
        numpy.ndarray: Reconstructed plane of the same shape
    """
    h, w = plane.shape
    padded = _pad_to_multiple(np.ascontiguousarray(plane), BLOCK_SIZE)
    ph, pw = padded.shape
    blocks = (
        (padded - 128.0)
        .reshape(ph // BLOCK_SIZE, BLOCK_SIZE, pw // BLOCK_SIZE, BLOCK_SIZE)
        .transpose(0, 2, 1, 3)
    )
    coeffs = fft.dctn(blocks, type=2, norm="ortho", axes=(2, 3))
    coeffs = round_half_up(coeffs / table) * table
    restored = fft.idctn(coeffs, type=2, norm="ortho", axes=(2, 3)) + 128.0
    restored = restored.transpose(0, 2, 1, 3).reshape(ph, pw)
    return restored[:h, :w]


def _subsample_chroma(plane):
    h, w = plane.shape
    padded = _pad_to_multiple(np.ascontiguousarray(plane), 2)
    ph, pw = padded.shape
    return padded.reshape(ph // 2, 2, pw // 2, 2).mean(axis=(1, 3)), (h, w)


def jpeg_sim(img, params):
    """
    Simulate a JPEG encode/decode round trip.

    Args:
        img: (H, W, 3) image in [0, 1]
        params: JpegSimParams

    Returns:
        numpy.ndarray: Decoded image clamped to [0, 1]
    """
    luma_table = scaled_table(LUMA_BASE_TABLE, params.quality)
    chroma_table = scaled_table(CHROMA_BASE_TABLE, params.quality)

    ycc = rgb_to_ycbcr(img)
    out = np.empty_like(ycc)
    out[..., 0] = quantize_plane(ycc[..., 0], luma_table)
    for channel in (1, 2):
        if params.chroma_subsample:
            small, (h, w) = _subsample_chroma(ycc[..., channel])
            coded = quantize_plane(small, chroma_table)
            up = resize_bilinear(coded, small.shape[0] * 2, small.shape[1] * 2)
            out[..., channel] = up[:h, :w]
        else:
            out[..., channel] = quantize_plane(ycc[..., channel], chroma_table)

    return np.clip(ycbcr_to_rgb(out), 0.0, 1.0)
