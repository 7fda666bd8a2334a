"""
Training objective.

Classification, imbalance-weighted mask, edge, size and cross-view consistency
losses, each returning its value and the exact gradient with respect to the
logits, plus the composite per-sample objective and a finite-difference checker.
"""

import logging
from dataclasses import dataclass, fields

import numpy as np

from forgefighter.core.detector import TwoStreamDetector, area_downsample, sigmoid
from forgefighter.core.errors import PreconditionError
from forgefighter.utils.filters import interpolation_matrix, sobel_gradients
from forgefighter.utils.seeding import make_rng

logger = logging.getLogger(__name__)

EDGE_DENOM_FLOOR = 1e-12
GRAD_CHECK_STEP = 1e-5
GRAD_CHECK_GUARD = 1e-12

SOBEL_DIFF = np.array([-1.0, 0.0, 1.0])
SOBEL_SMOOTH = np.array([1.0, 2.0, 1.0])


@dataclass
class LossWeights:
    """Scalar weights of the composite objective."""

    alpha: float = 1.0
    beta: float = 1.0
    lambda_mask: float = 0.5
    gamma_clean: float = 0.5
    lambda_edge: float = 0.1
    lambda_size: float = 0.1
    lambda_cons: float = 0.1
    eps: float = 1e-6
    eps_dice: float = 1e-6
    w_max: float = 100.0

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if value < 0:
                raise PreconditionError(f"Loss weight {f.name} must be >= 0, got {value}")
        if self.eps <= 0 or self.eps_dice <= 0:
            raise PreconditionError("eps and eps_dice must be > 0")

    def linear_only(self):
        """Copy with every regularizer weight set to zero (classification only)."""
        return LossWeights(
            alpha=self.alpha,
            beta=self.beta,
            lambda_mask=0.0,
            gamma_clean=self.gamma_clean,
            lambda_edge=0.0,
            lambda_size=0.0,
            lambda_cons=0.0,
            eps=self.eps,
            eps_dice=self.eps_dice,
            w_max=self.w_max,
        )


@dataclass
class LossBreakdown:
    """Per-sample loss terms and merged logit gradients."""

    cls: float
    mask_att: float
    mask_clean: float
    edge: float
    size: float
    cons: float
    total: float
    grad_logit: float
    grad_mask: np.ndarray
    grad_mask_clean: np.ndarray

    def to_record(self):
        return {
            "cls": self.cls,
            "maskAtt": self.mask_att,
            "maskClean": self.mask_clean,
            "edge": self.edge,
            "size": self.size,
            "cons": self.cons,
            "total": self.total,
        }


def softplus(x):
    """log(1 + exp(x)) without overflow."""
    return np.logaddexp(0.0, x)


def loss_cls(s, y):
    """
    Binary cross-entropy on a logit.

    Args:
        s: Logit
        y: Label in {0, 1}

    Returns:
        tuple: (value, d/ds)
    """
    sign = 2.0 * float(y) - 1.0
    value = float(softplus(-sign * s))
    grad = -sign * sigmoid(-sign * s)
    return value, float(grad)


def loss_mask(z, g, w):
    """
    Imbalance-weighted BCE plus soft Dice.

    Args:
        z: Mask logits
        g: Target grid of the same shape
        w: LossWeights

    Returns:
        tuple: (value, d/dz)
    """
    z = np.asarray(z, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    if z.shape != g.shape:
        raise PreconditionError(f"Mask loss shapes differ: {z.shape} vs {g.shape}")
    n = z.size
    p = sigmoid(z)
    pos_weight = float(np.clip((1.0 - g.mean()) / (g.mean() + w.eps), 1.0, w.w_max))

    bce = float(np.mean(pos_weight * g * softplus(-z) + (1.0 - g) * softplus(z)))
    d_bce = (-pos_weight * g * (1.0 - p) + (1.0 - g) * p) / n

    inter = float(np.sum(p * g))
    mass = float(np.sum(p) + np.sum(g))
    num = 2.0 * inter + w.eps_dice
    den = mass + w.eps_dice
    dice = 1.0 - num / den
    d_dice_dp = -(2.0 * g * den - num) / (den * den)
    d_dice = d_dice_dp * p * (1.0 - p)

    return w.alpha * bce + w.beta * dice, w.alpha * d_bce + w.beta * d_dice


def _correlate1d_adjoint(grad, weights, axis):
    """Adjoint of a length-3 correlation with edge replication along one axis."""
    moved = np.moveaxis(grad, axis, 0)
    n = moved.shape[0]
    radius = len(weights) // 2
    padded = np.zeros((n + 2 * radius,) + moved.shape[1:])
    for k, weight in enumerate(weights):
        padded[k : k + n] += weight * moved
    out = padded[radius : radius + n].copy()
    out[0] += padded[:radius].sum(axis=0)
    out[-1] += padded[radius + n :].sum(axis=0)
    return np.moveaxis(out, 0, axis)


def sobel_adjoint(grad_x, grad_y):
    """Pull gradients of (gx, gy) back to the Sobel input."""
    from_x = _correlate1d_adjoint(_correlate1d_adjoint(grad_x, SOBEL_SMOOTH, 0), SOBEL_DIFF, 1)
    from_y = _correlate1d_adjoint(_correlate1d_adjoint(grad_y, SOBEL_SMOOTH, 1), SOBEL_DIFF, 0)
    return from_x + from_y


def loss_edge(z, g):
    """
    Mean absolute difference of Sobel edge maps of sigma(z) and g.

    Returns:
        tuple: (value, d/dz)
    """
    z = np.asarray(z, dtype=np.float64)
    p = sigmoid(z)
    px, py = sobel_gradients(p)
    gx, gy = sobel_gradients(g)
    edges_p = np.sqrt(px * px + py * py)
    diff = edges_p - np.sqrt(gx * gx + gy * gy)
    value = float(np.mean(np.abs(diff)))

    d_edges = np.sign(diff) / z.size
    denom = np.maximum(edges_p, EDGE_DENOM_FLOOR)
    d_p = sobel_adjoint(d_edges * px / denom, d_edges * py / denom)
    return value, d_p * p * (1.0 - p)


def loss_size(z, g):
    """|mean(sigma(z)) - mean(g)| with its sign subgradient."""
    z = np.asarray(z, dtype=np.float64)
    if z.shape != np.shape(g):
        raise PreconditionError(f"Size loss shapes differ: {z.shape} vs {np.shape(g)}")
    p = sigmoid(z)
    diff = float(p.mean() - np.mean(g))
    return abs(diff), np.sign(diff) * p * (1.0 - p) / z.size


def loss_cons(z_att, z_clean):
    """
    Cross-view consistency mean |sigma(z_att) - sigma(z_clean)|.

    Returns:
        tuple: (value, d/dz_att, d/dz_clean)
    """
    z_att = np.asarray(z_att, dtype=np.float64)
    z_clean = np.asarray(z_clean, dtype=np.float64)
    if z_att.shape != z_clean.shape:
        raise PreconditionError(f"Consistency shapes differ: {z_att.shape} vs {z_clean.shape}")
    p_att = sigmoid(z_att)
    p_clean = sigmoid(z_clean)
    sign = np.sign(p_att - p_clean) / z_att.size
    value = float(np.mean(np.abs(p_att - p_clean)))
    return value, sign * p_att * (1.0 - p_att), -sign * p_clean * (1.0 - p_clean)


class LossSpace:
    """
    Grid on which the mask losses are evaluated.

    By default targets are area-averaged down to the G x G mask grid. With
    ``at_working_res`` the logits are bilinearly upsampled to the working
    resolution instead and gradients are pulled back through the transpose.
    """

    def __init__(self, mask_grid, working_size, at_working_res=False):
        self.mask_grid = mask_grid
        self.working_size = working_size
        self.at_working_res = at_working_res
        self._upsample = (
            interpolation_matrix(mask_grid, working_size) if at_working_res else None
        )

    def logits(self, z):
        if self._upsample is None:
            return z
        return self._upsample @ z @ self._upsample.T

    def target(self, grid):
        grid = np.asarray(grid, dtype=np.float64)
        if self._upsample is None:
            if grid.shape == (self.mask_grid, self.mask_grid):
                return grid
            return area_downsample(grid, self.mask_grid)
        if grid.shape != (self.working_size, self.working_size):
            raise PreconditionError(
                f"Target must be {self.working_size}x{self.working_size}, got {grid.shape}"
            )
        return grid

    def pull_back(self, grad):
        if self._upsample is None:
            return grad
        return self._upsample.T @ grad @ self._upsample


def total_objective(s, z, z_clean, y, g, g_attacked, w, space=None):
    """
    Composite per-sample objective on the attacked and clean views.

    Args:
        s: Attacked-view logit
        z: Attacked-view mask logits (G x G)
        z_clean: Clean-view mask logits (G x G)
        y: Label
        g: Clean-view target grid
        g_attacked: Attacked-view (transported) target grid
        w: LossWeights
        space: LossSpace (default: targets downsampled to the mask grid)

    Returns:
        LossBreakdown: Terms, total and merged gradients w.r.t. s, z, z_clean
    """
    z = np.asarray(z, dtype=np.float64)
    z_clean = np.asarray(z_clean, dtype=np.float64)
    if space is None:
        space = LossSpace(z.shape[0], np.shape(g)[0])
    zl = space.logits(z)
    zl_clean = space.logits(z_clean)
    target = space.target(g)
    target_att = space.target(g_attacked)

    cls, d_logit = loss_cls(s, y)
    mask_att, d_mask_att = loss_mask(zl, target_att, w)
    mask_clean, d_mask_clean = loss_mask(zl_clean, target, w)
    edge, d_edge = loss_edge(zl, target_att)
    size, d_size = loss_size(zl, target_att)
    cons, d_cons_att, d_cons_clean = loss_cons(zl, zl_clean)

    total = cls
    total += w.lambda_mask * mask_att
    total += w.lambda_mask * w.gamma_clean * mask_clean
    total += w.lambda_edge * edge
    total += w.lambda_size * size
    total += w.lambda_cons * cons

    grad_mask = (
        w.lambda_mask * d_mask_att
        + w.lambda_edge * d_edge
        + w.lambda_size * d_size
        + w.lambda_cons * d_cons_att
    )
    grad_mask_clean = w.lambda_mask * w.gamma_clean * d_mask_clean + w.lambda_cons * d_cons_clean

    return LossBreakdown(
        cls=cls,
        mask_att=mask_att,
        mask_clean=mask_clean,
        edge=edge,
        size=size,
        cons=cons,
        total=float(total),
        grad_logit=d_logit,
        grad_mask=space.pull_back(grad_mask),
        grad_mask_clean=space.pull_back(grad_mask_clean),
    )


def sample_gradients(detector, params, out_att, out_clean, breakdown):
    """Parameter gradient of one sample's objective (attacked plus clean pass)."""
    grad = detector.backward(out_att, params, breakdown.grad_logit, breakdown.grad_mask)
    grad_clean = detector.backward(out_clean, params, 0.0, breakdown.grad_mask_clean)
    return grad.unflatten(grad.flatten() + grad_clean.flatten())


def grad_check(
    x,
    g,
    y,
    p,
    w,
    trials,
    x_attacked=None,
    g_attacked=None,
    detector=None,
    space=None,
    seed=0,
):
    """
    Compare analytic directional derivatives with central differences.

    Each trial perturbs every parameter group along a random direction. Checks
    where both derivatives are below the magnitude guard are skipped.

    Args:
        x: Clean StandardizedImage
        g: Clean target grid
        y: Label
        p: DetectorParams
        w: LossWeights
        trials: Number of trials (>= 1)
        x_attacked: Attacked view (default: x)
        g_attacked: Attacked target (default: g)
        detector: TwoStreamDetector (default: G = 32)
        space: LossSpace
        seed: Direction seed

    Returns:
        float: Worst relative error (0.0 if every check was skipped)
    """
    if trials < 1:
        raise PreconditionError(f"trials must be >= 1, got {trials}")
    detector = detector or TwoStreamDetector()
    x_attacked = x if x_attacked is None else x_attacked
    g_attacked = g if g_attacked is None else g_attacked
    feats = detector.features(x)
    feats_att = feats if x_attacked is x else detector.features(x_attacked)

    def evaluate(params):
        out_att = detector.forward(x_attacked, params, features=feats_att)
        out_clean = detector.forward(x, params, features=feats)
        breakdown = total_objective(
            out_att.logit, out_att.mask_logits, out_clean.mask_logits, y, g, g_attacked, w, space
        )
        return breakdown, out_att, out_clean

    breakdown, out_att, out_clean = evaluate(p)
    analytic = sample_gradients(detector, p, out_att, out_clean, breakdown).groups()

    rng = make_rng(seed)
    base = p.flatten()
    worst = 0.0
    skipped = 0
    for _ in range(trials):
        offset = 0
        for group, grad_group in zip(p.groups(), analytic):
            direction = np.zeros_like(base)
            d = rng.standard_normal(group.size)
            direction[offset : offset + group.size] = d
            offset += group.size

            plus = evaluate(p.unflatten(base + GRAD_CHECK_STEP * direction))[0].total
            minus = evaluate(p.unflatten(base - GRAD_CHECK_STEP * direction))[0].total
            numeric = (plus - minus) / (2.0 * GRAD_CHECK_STEP)
            exact = float(np.dot(np.ravel(grad_group), d))

            scale = max(abs(exact), abs(numeric))
            if scale < GRAD_CHECK_GUARD:
                skipped += 1
                continue
            worst = max(worst, abs(exact - numeric) / scale)

    if skipped:
        logger.warning(f"Gradient check skipped {skipped} components below {GRAD_CHECK_GUARD}")
    return worst
