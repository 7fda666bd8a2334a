"""
Tests for the two-stream detector: residual and feature extraction, fusion,
forward heads, analytic backward and checkpoints.
"""

import numpy as np
import pytest

from forgefighter.constants.residual_kernels import LAPLACIAN_3X3
from forgefighter.core.detector import (
    CHECKPOINT_HEADER,
    CONTENT_DIM,
    FEATURE_DIM,
    DetectorParams,
    FeatureGrid,
    ModelOutput,
    TwoStreamDetector,
    cell_edges,
    cell_mean,
    cell_sum,
    dct_projection,
    extract_features,
    extract_residuals,
    fuse,
    load_params,
    save_params,
    sigmoid,
)
from forgefighter.core.errors import MissingCacheError, PreconditionError
from forgefighter.utils.filters import luminance
from forgefighter.utils.preprocess import StandardizedImage
from forgefighter.utils.seeding import make_rng


def raw_image(data):
    """StandardizedImage wrapping data as-is, so local edits stay local."""
    return StandardizedImage(data=np.asarray(data, dtype=np.float64), channel_mean=np.zeros(3), channel_std=np.ones(3))


def oracle_forward(detector, x, params):
    """Independent recomputation of (s, z) with explicit per-cell loops."""
    g = detector.mask_grid
    v = detector.features(x)
    gate = 1.0 / (1.0 + np.exp(-params.gate_logits))
    z = np.zeros((g, g))
    total = np.zeros(params.fused_dim)
    for i in range(g):
        for j in range(g):
            u = np.zeros(params.fused_dim)
            for a in range(v.shape[-1]):
                u += gate[a] * v[i, j, a] * params.mix_weights[a]
            u += params.mix_bias
            total += u
            z[i, j] = u @ params.mask_weights + params.mask_bias
    s = (total / (g * g)) @ params.cls_weights + params.cls_bias
    return float(s), z


# Residual stream


def test_residuals_of_constant_image_are_zero():
    res = extract_residuals(raw_image(np.full((16, 16, 3), 0.4)))
    assert res.shape == (16, 16, 4)
    assert np.allclose(res, 0.0, atol=1e-12)


def test_residuals_of_linear_ramp():
    ramp = np.tile(np.arange(16, dtype=np.float64)[None, :, None], (16, 1, 3)) * 0.1
    res = extract_residuals(raw_image(ramp))
    assert np.allclose(res[1:-1, 1:-1, 0], 0.0, atol=1e-12)
    horizontal = res[:, 1:, 1]
    assert np.allclose(horizontal, horizontal[0, 0], atol=1e-12)
    assert horizontal[0, 0] == pytest.approx(0.1)
    assert np.allclose(res[..., 2], 0.0, atol=1e-12)


def test_laplacian_impulse_response_is_the_kernel():
    data = np.zeros((11, 11, 3))
    data[5, 5, :] = 1.0
    res = extract_residuals(raw_image(data))
    assert np.allclose(res[4:7, 4:7, 0], LAPLACIAN_3X3, atol=1e-12)


# Feature grids


def test_features_of_constant_image():
    x = raw_image(np.full((32, 32, 3), 0.6))
    content, residual = extract_features(x, extract_residuals(x), 8)
    assert content.cells.shape == (8, 8, CONTENT_DIM)
    assert np.allclose(content.cells[..., :3], 0.6, atol=1e-12)
    assert np.allclose(content.cells[..., 3:6], 0.0, atol=1e-6)
    assert np.allclose(residual.cells, 0.0, atol=1e-6)


def test_cell_mean_matches_brute_force(small_image):
    x = raw_image(small_image)
    content, _ = extract_features(x, extract_residuals(x), 4)
    for i in range(4):
        for j in range(4):
            cell = small_image[8 * i : 8 * i + 8, 8 * j : 8 * j + 8]
            assert np.allclose(content.cells[i, j, :3], cell.mean(axis=(0, 1)), atol=1e-12)
            assert np.allclose(content.cells[i, j, 3:6], cell.std(axis=(0, 1)), atol=1e-9)


def dense_pooling(size, grid):
    edges = cell_edges(size, grid)
    matrix = np.zeros((grid, size))
    for i in range(grid):
        matrix[i, edges[i] : edges[i + 1]] = 1.0 / (edges[i + 1] - edges[i])
    return matrix


def dense_features(x, residuals, grid):
    """Features recomputed with dense (G, H) pooling and DCT projection products."""
    size = x.data.shape[0]
    pool = dense_pooling(size, grid)

    def mean(plane):
        return pool @ plane @ pool.T

    def std(plane):
        return np.sqrt(np.maximum(mean(plane * plane) - mean(plane) ** 2, 0.0))

    planes = [mean(x.data[..., c]) for c in range(3)]
    planes += [std(x.data[..., c]) for c in range(3)]
    luma = luminance(x.data)
    basis = [dct_projection(size, grid, order) for order in (0, 1)]
    planes += [(basis[u] @ luma @ basis[v].T) ** 2 for u, v in ((0, 1), (1, 0), (1, 1))]
    planes += [mean(np.abs(residuals[..., k])) for k in range(4)]
    planes += [std(residuals[..., k]) for k in range(4)]
    return np.stack(planes, axis=-1)


@pytest.mark.parametrize("size, grid", [(32, 8), (30, 4), (37, 5), (40, 20)])
def test_features_match_dense_pooling(size, grid):
    x = raw_image(make_rng(size + grid).normal(size=(size, size, 3)))
    residuals = extract_residuals(x)
    content, residual = extract_features(x, residuals, grid)
    fast = np.concatenate([content.cells, residual.cells], axis=-1)
    assert np.allclose(fast, dense_features(x, residuals, grid), rtol=0.0, atol=1e-12)


def test_cell_sum_over_uneven_cells(rng):
    plane = rng.normal(size=(11, 7))
    sums = cell_sum(plane, 3)
    rows, cols = cell_edges(11, 3), cell_edges(7, 3)
    for i in range(3):
        for j in range(3):
            block = plane[rows[i] : rows[i + 1], cols[j] : cols[j + 1]]
            assert sums[i, j] == pytest.approx(block.sum(), abs=1e-12)
            assert cell_mean(plane, 3)[i, j] == pytest.approx(block.mean(), abs=1e-12)


def test_features_handle_uneven_cells(rng):
    x = raw_image(rng.uniform(size=(30, 30, 3)))
    content, residual = extract_features(x, extract_residuals(x), 4)
    assert content.cells.shape == (4, 4, CONTENT_DIM)
    assert np.all(np.isfinite(residual.cells))


def test_features_are_local_to_a_cell(small_image):
    edited = small_image.copy()
    # cell (1, 2) of a 4x4 grid spans rows 8..15, cols 16..23; stay 2 px inside
    edited[11:13, 19:21, :] += 0.3
    a, b = raw_image(small_image), raw_image(edited)
    va = np.concatenate([f.cells for f in extract_features(a, extract_residuals(a), 4)], axis=-1)
    vb = np.concatenate([f.cells for f in extract_features(b, extract_residuals(b), 4)], axis=-1)
    changed = np.any(va != vb, axis=-1)
    assert changed[1, 2]
    changed[1, 2] = False
    assert not changed.any()


def test_mask_grid_bounds():
    x = raw_image(np.zeros((16, 16, 3)))
    with pytest.raises(PreconditionError):
        extract_features(x, extract_residuals(x), 17)
    with pytest.raises(PreconditionError):
        TwoStreamDetector(mask_grid=0)


# Fusion


def feature_grids(seed, g=3):
    rng = make_rng(seed)
    return (
        FeatureGrid(cells=rng.normal(size=(g, g, CONTENT_DIM)), stream="content"),
        FeatureGrid(cells=rng.normal(size=(g, g, FEATURE_DIM - CONTENT_DIM)), stream="residual"),
    )


def test_closed_gates_give_mix_bias():
    content, residual = feature_grids(1)
    params = DetectorParams.initialize(2)
    params.gate_logits = np.full(FEATURE_DIM, -50.0)
    params.mix_bias = make_rng(3).normal(size=params.fused_dim)
    u = fuse(content, residual, params)
    assert np.allclose(u, params.mix_bias, atol=1e-15)


def test_open_gates_with_identity_mixing_pass_features():
    content, residual = feature_grids(4)
    params = DetectorParams.zeros(fused_dim=FEATURE_DIM)
    params.gate_logits = np.full(FEATURE_DIM, 50.0)
    params.mix_weights = np.eye(FEATURE_DIM)
    u = fuse(content, residual, params)
    v = np.concatenate([content.cells, residual.cells], axis=-1)
    assert np.allclose(u, v, atol=1e-12)


def test_fuse_matches_hand_multiply(random_params):
    content, residual = feature_grids(5)
    u = fuse(content, residual, random_params)
    v = np.concatenate([content.cells, residual.cells], axis=-1)
    gate = 1.0 / (1.0 + np.exp(-random_params.gate_logits))
    expected = np.einsum("ija,a,ab->ijb", v, gate, random_params.mix_weights) + random_params.mix_bias
    assert np.allclose(u, expected, atol=1e-12)


def test_fuse_rejects_dimension_mismatch(random_params):
    content, _ = feature_grids(6)
    short = FeatureGrid(cells=np.zeros((3, 3, 2)), stream="residual")
    with pytest.raises(PreconditionError):
        fuse(content, short, random_params)


# Forward


def test_zero_params_forward(detector, standardized):
    out = detector.forward(standardized, DetectorParams.zeros())
    assert out.logit == 0.0
    assert sigmoid(out.logit) == 0.5
    assert np.all(out.mask_logits == 0.0)
    assert out.mask_logits.shape == (8, 8)
    assert out.evidence.shape == (32, 32)
    assert np.allclose(out.evidence, 0.5)


def test_classifier_head_is_linear(detector, standardized, random_params):
    doubled = random_params.copy()
    doubled.cls_weights = 2.0 * doubled.cls_weights
    doubled.cls_bias = 2.0 * doubled.cls_bias
    s = detector.forward(standardized, random_params).logit
    assert detector.forward(standardized, doubled).logit == pytest.approx(2.0 * s, abs=1e-12)


def test_forward_matches_oracle(detector, standardized, random_params):
    out = detector.forward(standardized, random_params)
    s, z = oracle_forward(detector, standardized, random_params)
    assert out.logit == pytest.approx(s, abs=1e-10)
    assert np.allclose(out.mask_logits, z, atol=1e-10)


def test_outputs_are_strictly_inside_unit_interval(detector, standardized, random_params):
    out = detector.forward(standardized, random_params)
    assert 0.0 < sigmoid(out.logit) < 1.0
    assert out.evidence.min() > 0.0 and out.evidence.max() < 1.0


def test_mask_head_is_local(random_params, small_image):
    detector = TwoStreamDetector(mask_grid=4)
    edited = small_image.copy()
    edited[11:13, 19:21, :] = 1.0 - edited[11:13, 19:21, :]
    za = detector.forward(raw_image(small_image), random_params).mask_logits
    zb = detector.forward(raw_image(edited), random_params).mask_logits
    changed = za != zb
    assert changed[1, 2]
    changed[1, 2] = False
    assert not changed.any()


def test_mask_head_is_permutation_equivariant(detector, standardized, random_params):
    v = detector.features(standardized)
    perm = make_rng(8).permutation(64)
    permuted = v.reshape(64, -1)[perm].reshape(v.shape)
    z = detector.forward(standardized, random_params, features=v).mask_logits.ravel()
    zp = detector.forward(standardized, random_params, features=permuted).mask_logits.ravel()
    assert np.allclose(zp, z[perm], atol=1e-12)


# Backward


def test_zero_upstream_gives_zero_gradient(detector, standardized, random_params):
    out = detector.forward(standardized, random_params)
    grad = detector.backward(out, random_params, 0.0, np.zeros((8, 8)))
    assert np.all(grad.flatten() == 0.0)


def test_logit_gradient_wrt_cls_bias_is_one(detector, standardized, random_params):
    out = detector.forward(standardized, random_params)
    grad = detector.backward(out, random_params, 1.0, np.zeros((8, 8)))
    assert float(grad.cls_bias) == 1.0
    assert float(grad.mask_bias) == 0.0


def test_backward_matches_finite_differences(detector, standardized, random_params):
    rng = make_rng(21)
    upstream_s = 0.7
    upstream_z = rng.normal(size=(8, 8))
    features = detector.features(standardized)

    def objective(params):
        out = detector.forward(standardized, params, features=features)
        return upstream_s * out.logit + float(np.sum(upstream_z * out.mask_logits))

    out = detector.forward(standardized, random_params, features=features)
    analytic = detector.backward(out, random_params, upstream_s, upstream_z).flatten()
    base = random_params.flatten()
    step = 1e-5
    for _ in range(5):
        direction = rng.standard_normal(base.size)
        plus = objective(random_params.unflatten(base + step * direction))
        minus = objective(random_params.unflatten(base - step * direction))
        numeric = (plus - minus) / (2.0 * step)
        exact = float(analytic @ direction)
        assert abs(exact - numeric) <= 1e-6 * max(abs(exact), abs(numeric))


def test_backward_without_cache_fails(detector, random_params):
    out = ModelOutput(logit=0.0, mask_logits=np.zeros((8, 8)), evidence=np.zeros((32, 32)), cache={})
    with pytest.raises(MissingCacheError):
        detector.backward(out, random_params, 1.0, np.zeros((8, 8)))


# Parameters and checkpoints


def test_initialize_is_seeded():
    a = DetectorParams.initialize(3)
    b = DetectorParams.initialize(3)
    assert np.array_equal(a.flatten(), b.flatten())
    assert np.all(a.gate_logits == 0.0)
    assert np.all(a.cls_weights == 0.0) and float(a.cls_bias) == 0.0
    limit = np.sqrt(6.0 / (FEATURE_DIM + a.fused_dim))
    assert np.max(np.abs(a.mix_weights)) <= limit
    assert not np.array_equal(a.flatten(), DetectorParams.initialize(4).flatten())


def test_checkpoint_round_trip(tmp_path, random_params):
    path = tmp_path / "detector.bin"
    save_params(random_params, 8, path)
    assert path.stat().st_size == CHECKPOINT_HEADER.size + 8 * random_params.count()
    params, mask_grid = load_params(path)
    assert mask_grid == 8
    assert np.array_equal(params.flatten(), random_params.flatten())
    assert params.cls_bias.shape == ()


def test_checkpoint_rejects_bad_magic(random_params):
    payload = bytearray(random_params.to_bytes(8))
    payload[:8] = b"NOTMODEL"
    with pytest.raises(PreconditionError):
        DetectorParams.from_bytes(bytes(payload))


def test_checkpoint_rejects_truncated_payload(random_params):
    payload = random_params.to_bytes(8)[:-8]
    with pytest.raises(PreconditionError):
        DetectorParams.from_bytes(payload)
