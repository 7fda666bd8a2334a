"""
Constants for the ForgeFighter system.

This module provides codec tables, residual kernels and attack ranges.
"""

from .attack_families import (
    AttackFamily,
    DEFAULT_ATTACK_RANGES,
    FAMILY_ORDER,
    WARP_CONTROL_GRID,
)
from .quant_tables import (
    BLOCK_SIZE,
    CHROMA_BASE_TABLE,
    LUMA_BASE_TABLE,
    quality_scale,
    scaled_table,
)
from .residual_kernels import LUMA_WEIGHTS, RESIDUAL_KERNELS

__all__ = [
    "AttackFamily",
    "DEFAULT_ATTACK_RANGES",
    "FAMILY_ORDER",
    "WARP_CONTROL_GRID",
    "BLOCK_SIZE",
    "CHROMA_BASE_TABLE",
    "LUMA_BASE_TABLE",
    "quality_scale",
    "scaled_table",
    "LUMA_WEIGHTS",
    "RESIDUAL_KERNELS",
]
