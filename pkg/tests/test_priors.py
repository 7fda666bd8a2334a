"""
Tests for weak face-region priors and their transport through attacks.
"""

import numpy as np
import pytest

from forgefighter.constants import WARP_CONTROL_GRID, AttackFamily
from forgefighter.core.attack_manager import sample_attack
from forgefighter.core.base_attack import AttackInstance
from forgefighter.core.errors import PreconditionError
from forgefighter.utils.priors import (
    FaceBox,
    WeakPrior,
    build_prior,
    prior_mask,
    transform_prior,
    zero_prior,
)


def test_full_image_box_gives_all_ones():
    prior = build_prior(FaceBox(0, 0, 32, 32), 32, 32, 32)
    assert np.allclose(prior.grid, 1.0, atol=1e-12)


def test_centered_box_peaks_at_center():
    prior = build_prior(FaceBox(8, 8, 24, 24), 32, 32, 32, margin=0.0)
    assert prior.grid.max() == pytest.approx(1.0)
    assert prior.grid[15, 15] == pytest.approx(prior.grid.max(), abs=1e-12)
    assert np.allclose(prior.grid, prior.grid[::-1, ::-1], atol=1e-12)
    assert prior.grid[0, 0] < 0.01


def test_margin_expansion_arithmetic():
    box = FaceBox(96, 96, 288, 288)
    ex = box.expanded(0.15, 384, 384)
    assert ex.as_list() == pytest.approx([67.2, 67.2, 316.8, 316.8])


def test_working_resolution_prior_is_one_inside():
    prior = build_prior(FaceBox(96, 96, 288, 288), 384, 384, 384)
    assert prior.grid[192, 192] == pytest.approx(1.0, abs=1e-9)
    assert prior.grid.min() >= 0.0
    assert prior.source_box == FaceBox(96, 96, 288, 288)


def test_prior_maps_source_box_to_working_grid():
    # 64x128 source, box over the left half; 32 working pixels
    mask = prior_mask(FaceBox(0, 0, 64, 64), 64, 128, 32, margin=0.0)
    assert mask[:, :16].all()
    assert not mask[:, 16:].any()


def test_expansion_is_clipped_to_image():
    ex = FaceBox(0, 0, 10, 10).expanded(0.5, 12, 12)
    assert ex.as_list() == [0.0, 0.0, 12.0, 12.0]


def test_prior_mask_grows_with_margin():
    box = FaceBox(20, 24, 40, 44)
    masks = [prior_mask(box, 64, 64, 64, margin=m) for m in (0.0, 0.05, 0.1, 0.2, 0.4)]
    for smaller, larger in zip(masks, masks[1:]):
        assert np.all(larger >= smaller)
    assert masks[-1].sum() > masks[0].sum()


def test_invalid_box_is_rejected():
    with pytest.raises(PreconditionError):
        build_prior(FaceBox(20, 5, 10, 30), 32, 32, 32)
    with pytest.raises(PreconditionError):
        build_prior(FaceBox(0, 0, 40, 10), 32, 32, 32)


def test_degenerate_box_after_rasterizing_is_rejected():
    with pytest.raises(PreconditionError):
        build_prior(FaceBox(10.1, 10.1, 10.2, 10.2), 32, 32, 32, margin=0.0)


def test_zero_prior():
    assert np.all(zero_prior(16).grid == 0.0)


def test_gamma_transport_is_bit_identical(small_prior):
    prior = WeakPrior(grid=small_prior)
    out = transform_prior(prior, sample_attack("gamma", 4))
    assert np.array_equal(out.grid, small_prior)


def test_zero_warp_transport_is_identical(small_prior):
    inst = AttackInstance(
        family=AttackFamily.WARP,
        params={"amplitude": 0.0, "grid": tuple([0.0] * (WARP_CONTROL_GRID**2 * 2))},
    )
    out = transform_prior(WeakPrior(grid=small_prior), inst)
    assert np.array_equal(out.grid, small_prior)


def test_transport_keeps_unit_range(small_prior):
    for family in ("warp", "transcode"):
        out = transform_prior(WeakPrior(grid=small_prior), sample_attack(family, 8))
        assert out.grid.min() >= 0.0 and out.grid.max() <= 1.0
        assert out.grid.shape == small_prior.shape
