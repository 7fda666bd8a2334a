"""
Utility functions for the ForgeFighter system.

This module provides image I/O, spatial filters and resampling, the JPEG
simulation codec, preprocessing and seed derivation.
"""

from .image_io import load_image, save_image, validate_image
from .filters import (
    dilate_binary,
    gaussian_blur,
    resize_bilinear,
    sobel_edges,
)
from .jpeg_sim import JpegSimParams, jpeg_sim
from .preprocess import StandardizedImage, pi_preprocess
from .seeding import SeedDerivation, derive_seed, seed_for
