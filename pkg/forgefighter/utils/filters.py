"""
Spatial filters and resampling.

All filters use replicate padding at the borders and preserve the grid shape.
Grids are 2-D arrays; images are (H, W, 3) arrays filtered per channel.
"""

import math

import cv2
import numpy as np
from scipy import ndimage

from forgefighter.constants import LUMA_WEIGHTS
from forgefighter.core.errors import PreconditionError


def _source_coordinates(n_in, n_out):
    """
    Half-pixel-center sampling positions along one axis.

    Returns:
        tuple: (lower index, upper index, fractional weight of the upper index)
    """
    scale = n_in / n_out
    src = (np.arange(n_out, dtype=np.float64) + 0.5) * scale - 0.5
    src = np.clip(src, 0.0, n_in - 1)
    lower = np.floor(src).astype(np.int64)
    upper = np.minimum(lower + 1, n_in - 1)
    return lower, upper, src - lower


def _lerp_axis(data, n_out, axis):
    n_in = data.shape[axis]
    if n_in == n_out:
        return data
    lower, upper, frac = _source_coordinates(n_in, n_out)
    shape = [1] * data.ndim
    shape[axis] = n_out
    frac = frac.reshape(shape)
    lo = np.take(data, lower, axis=axis)
    hi = np.take(data, upper, axis=axis)
    # lo + f * (hi - lo) keeps constant inputs exact
    return lo + frac * (hi - lo)


def resize_bilinear(data, out_h, out_w):
    """
    Bilinear resize with the align-corners-false convention.

    Source coordinate s = (d + 0.5) * scale - 0.5, clamped to the borders.

    Args:
        data: 2-D grid or (H, W, C) image
        out_h: Output height
        out_w: Output width

    Returns:
        numpy.ndarray: Resized float64 array
    """
    if out_h < 1 or out_w < 1:
        raise PreconditionError(f"Output size must be positive, got {out_h}x{out_w}")
    arr = np.asarray(data, dtype=np.float64)
    if arr.shape[0] == out_h and arr.shape[1] == out_w:
        return arr.copy()
    return _lerp_axis(_lerp_axis(arr, out_h, 0), out_w, 1)


def interpolation_matrix(n_in, n_out):
    """
    Dense matrix form of the 1-D bilinear resize.

    ``interpolation_matrix(n, m) @ v`` equals resizing v from n to m samples, so the
    transpose is the adjoint used for backpropagating through an upsample.

    Args:
        n_in: Input length
        n_out: Output length

    Returns:
        numpy.ndarray: (n_out, n_in) matrix
    """
    if n_in == n_out:
        return np.eye(n_in)
    lower, upper, frac = _source_coordinates(n_in, n_out)
    rows = np.arange(n_out)
    matrix = np.zeros((n_out, n_in))
    np.add.at(matrix, (rows, lower), 1.0 - frac)
    np.add.at(matrix, (rows, upper), frac)
    return matrix


def gaussian_kernel1d(sigma):
    """
    Normalized 1-D Gaussian kernel with radius ceil(3 sigma).

    Args:
        sigma: Standard deviation in pixels (> 0)

    Returns:
        numpy.ndarray: Kernel summing to 1
    """
    if sigma <= 0:
        raise PreconditionError(f"Gaussian sigma must be positive, got {sigma}")
    radius = int(math.ceil(3.0 * sigma))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-(x ** 2) / (2.0 * sigma ** 2))
    return kernel / kernel.sum()


def gaussian_blur(data, sigma):
    """
    Separable Gaussian blur over the two spatial axes.

    Args:
        data: 2-D grid or (H, W, C) image
        sigma: Standard deviation in pixels (> 0)

    Returns:
        numpy.ndarray: Blurred array of the same shape
    """
    kernel = gaussian_kernel1d(sigma)
    arr = np.asarray(data, dtype=np.float64)
    out = ndimage.correlate1d(arr, kernel, axis=0, mode="nearest")
    return ndimage.correlate1d(out, kernel, axis=1, mode="nearest")


def sobel_gradients(grid):
    """
    Horizontal and vertical Sobel responses of a grid.

    Args:
        grid: 2-D array, at least 3x3

    Returns:
        tuple: (gx, gy) arrays of the grid's shape
    """
    arr = np.asarray(grid, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 3 or arr.shape[1] < 3:
        raise PreconditionError(f"Sobel needs a 2-D grid of at least 3x3, got {arr.shape}")
    gx = ndimage.sobel(arr, axis=1, mode="nearest")
    gy = ndimage.sobel(arr, axis=0, mode="nearest")
    return gx, gy


def sobel_edges(grid):
    """
    Sobel gradient magnitude sqrt(gx^2 + gy^2).

    Args:
        grid: 2-D array, at least 3x3

    Returns:
        numpy.ndarray: Edge magnitude of the same shape
    """
    gx, gy = sobel_gradients(grid)
    return np.sqrt(gx * gx + gy * gy)


def dilate_binary(mask, radius):
    """
    Binary dilation with a square (Chebyshev) structuring element.

    Args:
        mask: Boolean grid
        radius: Chebyshev radius in pixels (>= 0)

    Returns:
        numpy.ndarray: Boolean grid, clipped at the borders
    """
    if radius < 0:
        raise PreconditionError(f"Dilation radius must be >= 0, got {radius}")
    arr = np.asarray(mask, dtype=bool)
    if radius == 0 or not arr.any():
        return arr.copy()
    return ndimage.binary_dilation(
        arr, structure=np.ones((3, 3), dtype=bool), iterations=int(radius)
    )


def translate_replicate(data, dx, dy):
    """
    Translate content by (dx, dy) pixels, filling uncovered pixels by edge replication.

    ``out[y, x] = data[clamp(y - dy), clamp(x - dx)]``

    Args:
        data: 2-D grid or (H, W, C) image
        dx: Horizontal shift (positive moves content right)
        dy: Vertical shift (positive moves content down)

    Returns:
        numpy.ndarray: Translated array of the same shape
    """
    arr = np.ascontiguousarray(data, dtype=np.float64)
    dx, dy = int(dx), int(dy)
    if dx == 0 and dy == 0:
        return arr.copy()
    h, w = arr.shape[:2]
    padded = cv2.copyMakeBorder(
        arr,
        max(dy, 0),
        max(-dy, 0),
        max(dx, 0),
        max(-dx, 0),
        cv2.BORDER_REPLICATE,
    )
    top = max(-dy, 0)
    left = max(-dx, 0)
    return padded[top : top + h, left : left + w].copy()


def luminance(img):
    """BT.601 luma of an (H, W, 3) raster."""
    return np.asarray(img, dtype=np.float64) @ LUMA_WEIGHTS


def bilinear_sample(data, ys, xs):
    """
    Sample a grid or image at real-valued positions, clamped to the borders.

    Args:
        data: 2-D grid or (H, W, C) image
        ys: Row coordinates, shape (h, w)
        xs: Column coordinates, shape (h, w)

    Returns:
        numpy.ndarray: Samples with leading shape (h, w)
    """
    arr = np.asarray(data, dtype=np.float64)
    h, w = arr.shape[:2]
    ys = np.clip(ys, 0.0, h - 1)
    xs = np.clip(xs, 0.0, w - 1)
    y0 = np.floor(ys).astype(np.int64)
    x0 = np.floor(xs).astype(np.int64)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = ys - y0
    fx = xs - x0
    if arr.ndim == 3:
        fy = fy[..., None]
        fx = fx[..., None]

    top = arr[y0, x0] + fx * (arr[y0, x1] - arr[y0, x0])
    bottom = arr[y1, x0] + fx * (arr[y1, x1] - arr[y1, x0])
    return top + fy * (bottom - top)
