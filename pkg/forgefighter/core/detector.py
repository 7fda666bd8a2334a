"""
Two-stream forgery detector.

A fixed-filter content stream and residual stream are pooled into a G x G grid of
cell features, fused by channel gating and 1x1 mixing, and read out by a scalar
logit head (global average pooling) and a per-cell mask-logit head. Gradients
with respect to every learnable parameter are computed analytically.
"""

import logging
import struct
from dataclasses import dataclass, fields

import numpy as np
from scipy import ndimage

from forgefighter.constants import RESIDUAL_KERNELS
from forgefighter.core.errors import MissingCacheError, PreconditionError
from forgefighter.utils.filters import luminance, resize_bilinear
from forgefighter.utils.seeding import make_rng

logger = logging.getLogger(__name__)

CONTENT_DIM = 9
RESIDUAL_DIM = 8
FEATURE_DIM = CONTENT_DIM + RESIDUAL_DIM
DEFAULT_MASK_GRID = 32
DEFAULT_FUSED_DIM = 16
MAX_MASK_GRID = 256

CHECKPOINT_MAGIC = b"AADF0001"
CHECKPOINT_HEADER = struct.Struct("<8sii")


def sigmoid(x):
    """Numerically stable logistic function."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out if out.ndim else float(out)


def cell_edges(size, grid):
    """Integer partition of size pixels into grid cells."""
    return (np.arange(grid + 1) * size) // grid


def dct_projection(size, grid, order):
    """
    Per-cell orthonormal DCT-II basis vector of the given order.

    Returns:
        numpy.ndarray: (grid, size) matrix; row i projects onto cell i's basis
    """
    edges = cell_edges(size, grid)
    matrix = np.zeros((grid, size))
    for i in range(grid):
        n = edges[i + 1] - edges[i]
        k = np.arange(n)
        if order == 0:
            basis = np.full(n, 1.0 / np.sqrt(n))
        else:
            basis = np.sqrt(2.0 / n) * np.cos(np.pi * (2 * k + 1) * order / (2 * n))
        matrix[i, edges[i] : edges[i + 1]] = basis
    return matrix


def cell_sum(plane, grid):
    """
    Sum a plane over every cell of the grid x grid partition.

    Args:
        plane: (H, W) array with H, W >= grid
        grid: Grid size G

    Returns:
        numpy.ndarray: (grid, grid) cell sums
    """
    rows = np.add.reduceat(plane, cell_edges(plane.shape[0], grid)[:-1], axis=0)
    return np.add.reduceat(rows, cell_edges(plane.shape[1], grid)[:-1], axis=1)


def cell_mean(plane, grid):
    """Average a plane over every cell of the grid x grid partition."""
    heights = np.diff(cell_edges(plane.shape[0], grid))
    widths = np.diff(cell_edges(plane.shape[1], grid))
    return cell_sum(plane, grid) / np.outer(heights, widths)


def area_downsample(grid_values, grid):
    """Average a square working-resolution grid down to grid x grid cells."""
    return cell_mean(grid_values, grid)


@dataclass
class FeatureGrid:
    """G x G grid of per-cell feature vectors, shape (G, G, d)."""

    cells: np.ndarray
    stream: str


@dataclass
class DetectorParams:
    """All learnable parameters of the two-stream model."""

    gate_logits: np.ndarray
    mix_weights: np.ndarray
    mix_bias: np.ndarray
    cls_weights: np.ndarray
    cls_bias: np.ndarray
    mask_weights: np.ndarray
    mask_bias: np.ndarray

    @classmethod
    def zeros(cls, fused_dim=DEFAULT_FUSED_DIM, feature_dim=FEATURE_DIM):
        return cls(
            gate_logits=np.zeros(feature_dim),
            mix_weights=np.zeros((feature_dim, fused_dim)),
            mix_bias=np.zeros(fused_dim),
            cls_weights=np.zeros(fused_dim),
            cls_bias=np.zeros(()),
            mask_weights=np.zeros(fused_dim),
            mask_bias=np.zeros(()),
        )

    @classmethod
    def initialize(cls, seed, fused_dim=DEFAULT_FUSED_DIM, feature_dim=FEATURE_DIM):
        """
        Seeded initialization: gates 0 (half open), Glorot-uniform mixing, zero heads.

        Args:
            seed: Initialization seed
            fused_dim: Fused feature dimension d_u
            feature_dim: Concatenated feature dimension

        Returns:
            DetectorParams: Fresh parameters
        """
        params = cls.zeros(fused_dim, feature_dim)
        limit = np.sqrt(6.0 / (feature_dim + fused_dim))
        params.mix_weights = make_rng(seed).uniform(-limit, limit, size=(feature_dim, fused_dim))
        return params

    @property
    def fused_dim(self):
        return self.mix_bias.shape[0]

    @property
    def feature_dim(self):
        return self.gate_logits.shape[0]

    def groups(self):
        """Parameter arrays in serialization order."""
        return [getattr(self, f.name) for f in fields(self)]

    def count(self):
        return sum(g.size for g in self.groups())

    def flatten(self):
        return np.concatenate([np.ravel(g) for g in self.groups()])

    def unflatten(self, vector):
        """Parameters of this shape filled from a flat vector."""
        values = {}
        offset = 0
        for f, group in zip(fields(self), self.groups()):
            n = group.size
            values[f.name] = np.asarray(vector[offset : offset + n], dtype=np.float64).reshape(group.shape)
            offset += n
        return DetectorParams(**values)

    def copy(self):
        return self.unflatten(self.flatten())

    def to_bytes(self, mask_grid):
        """
        Serialize as the 16-byte header followed by little-endian doubles.

        Args:
            mask_grid: Mask grid size G recorded in the header

        Returns:
            bytes: Checkpoint payload
        """
        header = CHECKPOINT_HEADER.pack(CHECKPOINT_MAGIC, int(mask_grid), int(self.fused_dim))
        return header + self.flatten().astype("<f8").tobytes()

    @classmethod
    def from_bytes(cls, payload):
        """
        Parse a checkpoint.

        Returns:
            tuple: (DetectorParams, mask grid G)
        """
        magic, mask_grid, fused_dim = CHECKPOINT_HEADER.unpack_from(payload)
        if magic != CHECKPOINT_MAGIC:
            raise PreconditionError(f"Not a detector checkpoint (magic {magic!r})")
        vector = np.frombuffer(payload, dtype="<f8", offset=CHECKPOINT_HEADER.size)
        template = cls.zeros(fused_dim)
        if vector.size != template.count():
            raise PreconditionError(
                f"Checkpoint holds {vector.size} values, expected {template.count()}"
            )
        return template.unflatten(vector.astype(np.float64)), mask_grid


@dataclass
class ModelOutput:
    """Forward results plus the intermediates needed by backward."""

    logit: float
    mask_logits: np.ndarray
    evidence: np.ndarray
    cache: dict


def extract_residuals(x):
    """
    Fixed high-pass residuals of the standardized luminance.

    Args:
        x: StandardizedImage

    Returns:
        numpy.ndarray: (H, W, 4) residual channels
    """
    luma = luminance(x.data)
    channels = [
        ndimage.correlate(luma, kernel, mode="nearest") for _, kernel in RESIDUAL_KERNELS
    ]
    return np.stack(channels, axis=-1)


def extract_features(x, residuals, mask_grid=DEFAULT_MASK_GRID):
    """
    Per-cell content and residual statistics.

    Content (9): per-channel mean and std, then the squared (0,1), (1,0), (1,1)
    orthonormal DCT coefficients of the cell luminance. Residual (8): mean absolute
    value of each residual channel, then each channel's std.

    Args:
        x: StandardizedImage
        residuals: (H, W, 4) output of extract_residuals
        mask_grid: Grid size G

    Returns:
        tuple: (content FeatureGrid, residual FeatureGrid)
    """
    if residuals.shape[:2] != x.data.shape[:2]:
        raise PreconditionError("Residual and image sizes differ")
    if not 1 <= mask_grid <= min(MAX_MASK_GRID, x.data.shape[0]):
        raise PreconditionError(f"Mask grid must be in [1, {MAX_MASK_GRID}], got {mask_grid}")

    size = x.data.shape[0]

    def pooled(plane):
        return cell_mean(plane, mask_grid)

    def cell_std(plane, mean):
        return np.sqrt(np.maximum(pooled(plane * plane) - mean * mean, 0.0))

    content = []
    means = [pooled(x.data[..., c]) for c in range(3)]
    content.extend(means)
    content.extend(cell_std(x.data[..., c], means[c]) for c in range(3))

    luma = luminance(x.data)
    # each pixel lies in one cell, so the per-cell bases collapse to one row vector
    basis = [dct_projection(size, mask_grid, order).sum(axis=0) for order in (0, 1)]
    for u, v in ((0, 1), (1, 0), (1, 1)):
        coeff = cell_sum(luma * np.outer(basis[u], basis[v]), mask_grid)
        content.append(coeff * coeff)

    residual = []
    residual.extend(pooled(np.abs(residuals[..., k])) for k in range(4))
    for k in range(4):
        plane = residuals[..., k]
        residual.append(cell_std(plane, pooled(plane)))

    return (
        FeatureGrid(cells=np.stack(content, axis=-1), stream="content"),
        FeatureGrid(cells=np.stack(residual, axis=-1), stream="residual"),
    )


def fuse(content, residual, params):
    """
    Channel gating and 1x1 mixing.

    Args:
        content: Content FeatureGrid
        residual: Residual FeatureGrid
        params: DetectorParams

    Returns:
        numpy.ndarray: (G, G, d_u) fused grid
    """
    v = np.concatenate([content.cells, residual.cells], axis=-1)
    if v.shape[-1] != params.feature_dim or params.mix_weights.shape != (
        params.feature_dim,
        params.fused_dim,
    ):
        raise PreconditionError(
            f"Feature dim {v.shape[-1]} does not match parameters "
            f"({params.feature_dim} -> {params.fused_dim})"
        )
    gated = sigmoid(params.gate_logits) * v
    return gated @ params.mix_weights + params.mix_bias


class TwoStreamDetector:
    """Fixed filter banks plus learnable fusion and heads."""

    def __init__(self, mask_grid=DEFAULT_MASK_GRID):
        """
        Initialize the detector.

        Args:
            mask_grid: Mask-logit grid size G
        """
        if not 1 <= mask_grid <= MAX_MASK_GRID:
            raise PreconditionError(f"Mask grid must be in [1, {MAX_MASK_GRID}], got {mask_grid}")
        self.mask_grid = mask_grid

    def features(self, x):
        """Concatenated (G*G, d) cell features; constants w.r.t. the parameters."""
        content, residual = extract_features(x, extract_residuals(x), self.mask_grid)
        return np.concatenate([content.cells, residual.cells], axis=-1)

    def forward(self, x, params, features=None):
        """
        Run both heads.

        Args:
            x: StandardizedImage
            params: DetectorParams
            features: Optional precomputed features from ``features(x)``

        Returns:
            ModelOutput: Logit, mask logits, upsampled evidence and cache
        """
        v = self.features(x) if features is None else features
        g = self.mask_grid
        flat = v.reshape(g * g, -1)

        gate = sigmoid(params.gate_logits)
        gated = flat * gate
        fused = gated @ params.mix_weights + params.mix_bias
        pooled = fused.mean(axis=0)

        logit = float(params.cls_weights @ pooled + params.cls_bias)
        mask_logits = (fused @ params.mask_weights + params.mask_bias).reshape(g, g)

        size = x.data.shape[0]
        evidence = resize_bilinear(sigmoid(mask_logits), size, size)
        cache = {
            "features": flat,
            "gate": gate,
            "gated": gated,
            "fused": fused,
            "pooled": pooled,
        }
        return ModelOutput(logit=logit, mask_logits=mask_logits, evidence=evidence, cache=cache)

    def backward(self, output, params, grad_logit, grad_mask):
        """
        Exact parameter gradients of a scalar loss.

        Args:
            output: ModelOutput from forward with these params
            params: DetectorParams
            grad_logit: dL/ds
            grad_mask: dL/dz, (G, G)

        Returns:
            DetectorParams: Gradient record shaped like params
        """
        if output is None or not output.cache:
            raise MissingCacheError("backward called without a forward cache")
        cache = output.cache
        n_cells = cache["fused"].shape[0]
        dz = np.asarray(grad_mask, dtype=np.float64).reshape(n_cells)

        grad = DetectorParams.zeros(params.fused_dim, params.feature_dim)
        grad.cls_weights = grad_logit * cache["pooled"]
        grad.cls_bias = np.asarray(float(grad_logit))
        grad.mask_weights = dz @ cache["fused"]
        grad.mask_bias = np.asarray(dz.sum())

        d_fused = (grad_logit / n_cells) * params.cls_weights + np.outer(dz, params.mask_weights)
        grad.mix_weights = cache["gated"].T @ d_fused
        grad.mix_bias = d_fused.sum(axis=0)

        d_gated = d_fused @ params.mix_weights.T
        d_gate = (cache["features"] * d_gated).sum(axis=0)
        gate = cache["gate"]
        grad.gate_logits = d_gate * gate * (1.0 - gate)
        return grad


def save_params(params, mask_grid, path):
    with open(path, "wb") as f:
        f.write(params.to_bytes(mask_grid))
    logger.info(f"Saved detector checkpoint to {path}")


def load_params(path):
    """
    Read a checkpoint written by save_params.

    Returns:
        tuple: (DetectorParams, mask grid G)
    """
    with open(path, "rb") as f:
        return DetectorParams.from_bytes(f.read())
