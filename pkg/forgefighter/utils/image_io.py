"""
Image input/output utilities.

Images are float64 arrays of shape (H, W, 3) in RGB order with nominal range
[0, 1]. Only 8-bit PNG and binary PPM (P6) files are read and written.
"""

import logging
import os

import numpy as np
from PIL import Image as PILImage

from forgefighter.core.errors import ImageFormatError

logger = logging.getLogger(__name__)

MIN_IMAGE_SIDE = 8
PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"
PPM_SIGNATURE = b"P6"

_EXTENSION_FORMATS = {".png": "PNG", ".ppm": "PPM"}
_EIGHT_BIT_MODES = ("RGB", "RGBA", "L", "LA", "P")


def validate_image(img, min_side=MIN_IMAGE_SIDE):
    """
    Check the Image invariants.

    Args:
        img: Candidate image array
        min_side: Smallest allowed height and width

    Returns:
        numpy.ndarray: The same image as a float64 array

    Raises:
        ImageFormatError: If shape, size or values are invalid
    """
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ImageFormatError(f"Expected an (H, W, 3) raster, got shape {arr.shape}")
    if arr.shape[0] < min_side or arr.shape[1] < min_side:
        raise ImageFormatError(
            f"Image must be at least {min_side}x{min_side}, got {arr.shape[:2]}"
        )
    if not np.all(np.isfinite(arr)):
        raise ImageFormatError("Image contains NaN or Inf values")
    return arr


def to_bytes(img):
    """
    Quantize an image to 8-bit values.

    Values are clamped to [0, 1] and rounded half-up to the nearest byte.

    Args:
        img: Float image

    Returns:
        numpy.ndarray: uint8 array of the same shape
    """
    clamped = np.clip(np.asarray(img, dtype=np.float64), 0.0, 1.0)
    return np.floor(clamped * 255.0 + 0.5).astype(np.uint8)


def _sniff_format(path):
    with open(path, "rb") as fh:
        head = fh.read(len(PNG_SIGNATURE))
    if head.startswith(PNG_SIGNATURE):
        return "PNG"
    if head.startswith(PPM_SIGNATURE):
        return "PPM"
    raise ImageFormatError(f"{path}: not an 8-bit PNG or binary PPM (P6) file")


def load_image(path):
    """
    Load an 8-bit PNG or PPM (P6) file.

    Args:
        path: File path

    Returns:
        numpy.ndarray: (H, W, 3) float64 image with values v/255

    Raises:
        OSError: If the file cannot be read
        ImageFormatError: If the format is unsupported
    """
    fmt = _sniff_format(path)
    with PILImage.open(path) as pil_img:
        if pil_img.mode not in _EIGHT_BIT_MODES:
            raise ImageFormatError(
                f"{path}: unsupported {fmt} pixel mode '{pil_img.mode}' (8-bit only)"
            )
        rgb = np.asarray(pil_img.convert("RGB"), dtype=np.uint8)

    img = rgb.astype(np.float64) / 255.0
    logger.debug(f"Loaded {fmt} image {path} with shape {img.shape}")
    # any decodable size loads; operations enforce the working minimum
    return validate_image(img, min_side=1)


def save_image(img, path):
    """
    Write an image as 8-bit PNG or PPM, chosen by file extension.

    Args:
        img: (H, W, 3) float image
        path: Destination path ending in .png or .ppm

    Raises:
        OSError: If the file cannot be written
        ImageFormatError: If the extension is unsupported or the image is invalid
    """
    ext = os.path.splitext(str(path))[1].lower()
    if ext not in _EXTENSION_FORMATS:
        raise ImageFormatError(f"{path}: unsupported output extension '{ext}'")

    data = to_bytes(validate_image(img, min_side=1))
    PILImage.fromarray(data).save(path, format=_EXTENSION_FORMATS[ext])
