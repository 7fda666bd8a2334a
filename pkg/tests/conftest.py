"""
Common test fixtures for the ForgeFighter test suite.

This module provides fixtures that can be reused across different test files.
"""

import numpy as np
import pytest

from forgefighter.core.attack_manager import AttackManager
from forgefighter.core.detector import DetectorParams, TwoStreamDetector
from forgefighter.testing import (
    centered_prior,
    random_image,
    textured_image,
    training_sample,
)
from forgefighter.utils.preprocess import pi_preprocess
from forgefighter.utils.seeding import make_rng

SMALL_SIZE = 32
SMALL_GRID = 8


@pytest.fixture
def rng():
    """Fresh seeded generator per test."""
    return make_rng(1234)


@pytest.fixture
def small_image():
    """32x32 uniform random image."""
    return random_image(seed=7, height=SMALL_SIZE, width=SMALL_SIZE)


@pytest.fixture
def textured():
    return textured_image(seed=3, size=SMALL_SIZE)


@pytest.fixture
def small_prior():
    """Centered prior at 32x32."""
    return centered_prior(SMALL_SIZE)


@pytest.fixture
def manager():
    return AttackManager()


@pytest.fixture
def detector():
    """Detector with an 8x8 mask grid for 32x32 working images."""
    return TwoStreamDetector(mask_grid=SMALL_GRID)


@pytest.fixture
def standardized(small_image):
    return pi_preprocess(small_image, SMALL_SIZE)


@pytest.fixture
def random_params():
    """Seeded parameters with nonzero heads and gates."""
    params = DetectorParams.initialize(5)
    noise = make_rng(99).normal(0.0, 0.3, size=params.count())
    return params.unflatten(params.flatten() + noise)


@pytest.fixture
def tiny_dataset():
    """Two reals and two fakes at 32x32 with priors."""
    return [
        training_sample(seed=i, label=i % 2, size=SMALL_SIZE, sample_id=f"s{i}")
        for i in range(4)
    ]


@pytest.fixture
def psnr():
    """PSNR in dB for images in [0, 1]."""

    def _psnr(a, b):
        mse = float(np.mean((np.asarray(a) - np.asarray(b)) ** 2))
        if mse == 0.0:
            return float("inf")
        return 10.0 * np.log10(1.0 / mse)

    return _psnr
