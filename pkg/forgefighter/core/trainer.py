"""
Worst-of-K red-team training.

For every sample the trainer draws K candidate attacks over distinct families,
keeps the one with the highest classification loss, and optimizes the composite
objective on that attacked view plus the clean view with AdamW and global-norm
gradient clipping.
"""

import json
import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from forgefighter.constants import FAMILY_ORDER
from forgefighter.core.attack_manager import AttackManager
from forgefighter.core.detector import DetectorParams, TwoStreamDetector, sigmoid
from forgefighter.core.errors import ManifestError, PreconditionError
from forgefighter.core.objective import (
    LossSpace,
    LossWeights,
    loss_cls,
    sample_gradients,
    total_objective,
)
from forgefighter.utils.metrics import (
    PredictionRecord,
    confusion_counts,
    group_by_split,
    tune_tau,
)
from forgefighter.utils.preprocess import DEFAULT_WORKING_SIZE, pi_preprocess
from forgefighter.utils.seeding import make_rng, seed_for

logger = logging.getLogger(__name__)

SHUFFLE_ID = "__shuffle__"
CLEAN_FAMILY = "none"


@dataclass
class TrainConfig:
    """Optimization settings for red-team training."""

    k: int = 3
    epochs: int = 2
    batch_size: int = 32
    lr: float = 1e-4
    weight_decay: float = 1e-4
    clip_norm: float = 1.0
    beta1: float = 0.9
    beta2: float = 0.999
    eps_opt: float = 1e-8
    global_seed: int = 0
    attack_aware: bool = True
    loss_at_working_res: bool = True

    def __post_init__(self):
        if not 1 <= self.k <= len(FAMILY_ORDER):
            raise PreconditionError(f"K must be in [1, {len(FAMILY_ORDER)}], got {self.k}")
        if self.epochs < 1 or self.batch_size < 1:
            raise PreconditionError("epochs and batch_size must be >= 1")
        if self.lr < 0 or self.clip_norm <= 0:
            raise PreconditionError("lr must be >= 0 and clip_norm > 0")


@dataclass
class TrainingSample:
    """A working-resolution image with its label and face-box prior."""

    id: str
    image: np.ndarray
    label: int
    prior: Optional[np.ndarray] = None

    def target(self):
        """Localization target: the prior for fakes, all zeros for reals."""
        if self.label == 1:
            return self.prior
        return np.zeros(self.image.shape[:2])

    def attack_prior(self):
        """Region used by region-aware attacks (zero when no box is known)."""
        return self.prior if self.prior is not None else np.zeros(self.image.shape[:2])


@dataclass
class WorstOfK:
    chosen: object
    losses: List[float]
    slot: int
    view: object
    output: object


@dataclass
class TrainingResult:
    params: DetectorParams
    log: List[dict] = field(default_factory=list)
    best_epoch: Optional[int] = None
    val_scores: List[float] = field(default_factory=list)


class AdamW:
    """Adam with decoupled weight decay applied before the adaptive step."""

    def __init__(self, size, cfg):
        self.cfg = cfg
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.t = 0

    def step(self, theta, grad):
        """
        One update.

        Args:
            theta: Flat parameter vector
            grad: Flat (clipped) gradient

        Returns:
            numpy.ndarray: Updated parameters
        """
        cfg = self.cfg
        self.t += 1
        theta = theta - cfg.lr * cfg.weight_decay * theta
        self.m = cfg.beta1 * self.m + (1.0 - cfg.beta1) * grad
        self.v = cfg.beta2 * self.v + (1.0 - cfg.beta2) * grad * grad
        m_hat = self.m / (1.0 - cfg.beta1 ** self.t)
        v_hat = self.v / (1.0 - cfg.beta2 ** self.t)
        return theta - cfg.lr * m_hat / (np.sqrt(v_hat) + cfg.eps_opt)


def clip_global_norm(grad, max_norm):
    """
    Scale grad so its L2 norm is at most max_norm; smaller gradients pass unscaled.

    Returns:
        tuple: (clipped gradient, norm before clipping)
    """
    norm = float(np.sqrt(np.sum(grad * grad)))
    if norm > max_norm:
        grad = grad * (max_norm / norm)
    return grad, norm


def select_worst_of_k(
    x,
    y,
    p,
    candidates,
    detector=None,
    manager=None,
    prior=None,
    working_size=DEFAULT_WORKING_SIZE,
):
    """
    Pick the candidate attack with the highest classification loss.

    Ties go to the lowest candidate slot.

    Args:
        x: (H, W, 3) clean image
        y: Label
        p: DetectorParams
        candidates: AttackInstances, one per slot
        detector: TwoStreamDetector
        manager: AttackManager
        prior: Region grid for region-aware attacks
        working_size: Working resolution

    Returns:
        WorstOfK: Chosen instance, per-candidate losses and the chosen view's forward
    """
    if not candidates:
        raise PreconditionError("select_worst_of_k needs at least one candidate")
    detector = detector or TwoStreamDetector()
    manager = manager or AttackManager()

    losses = []
    views = []
    outputs = []
    for inst in candidates:
        view = pi_preprocess(manager.apply(x, inst, prior), working_size)
        out = detector.forward(view, p)
        losses.append(loss_cls(out.logit, y)[0])
        views.append(view)
        outputs.append(out)

    slot = int(np.argmax(losses))
    return WorstOfK(
        chosen=candidates[slot], losses=losses, slot=slot, view=views[slot], output=outputs[slot]
    )


class RedTeamTrainer:
    """Runs worst-of-K training over a list of TrainingSamples."""

    def __init__(
        self,
        cfg=None,
        weights=None,
        detector=None,
        manager=None,
        working_size=DEFAULT_WORKING_SIZE,
    ):
        """
        Initialize the trainer.

        Args:
            cfg: TrainConfig
            weights: LossWeights
            detector: TwoStreamDetector
            manager: AttackManager
            working_size: Working resolution
        """
        self.cfg = cfg or TrainConfig()
        self.weights = weights or LossWeights()
        self.detector = detector or TwoStreamDetector()
        self.manager = manager or AttackManager()
        self.working_size = working_size
        self.space = LossSpace(
            self.detector.mask_grid, working_size, at_working_res=self.cfg.loss_at_working_res
        )

    def _check_dataset(self, samples):
        if not samples:
            raise ManifestError("Training set is empty")
        missing = [s.id for s in samples if s.label == 1 and s.prior is None]
        if missing:
            raise ManifestError(f"Fake samples without a prior: {', '.join(missing)}")

    def sample_step(self, sample, params, epoch):
        """
        Objective and gradient of one sample.

        Returns:
            tuple: (LossBreakdown, flat gradient, chosen family name, candidate losses)
        """
        clean = pi_preprocess(sample.image, self.working_size)
        out_clean = self.detector.forward(clean, params)
        target = sample.target()

        if self.cfg.attack_aware:
            candidates = self.manager.sample_candidates(
                self.cfg.global_seed, sample.id, epoch, self.cfg.k
            )
            pick = select_worst_of_k(
                sample.image,
                sample.label,
                params,
                candidates,
                self.detector,
                self.manager,
                sample.attack_prior(),
                self.working_size,
            )
            if max(pick.losses) != pick.losses[pick.slot]:
                raise AssertionError("worst-of-K selection is not the loss maximizer")
            out_att = pick.output
            target_att = self.manager.transform_prior(target, pick.chosen)
            target_att = np.clip(target_att, 0.0, 1.0)
            family = pick.chosen.family.value
            losses = pick.losses
        else:
            out_att = out_clean
            target_att = target
            family = CLEAN_FAMILY
            losses = []

        breakdown = total_objective(
            out_att.logit,
            out_att.mask_logits,
            out_clean.mask_logits,
            sample.label,
            target,
            target_att,
            self.weights,
            self.space,
        )
        grad = sample_gradients(self.detector, params, out_att, out_clean, breakdown)
        return breakdown, grad.flatten(), family, losses

    def epoch_order(self, n, epoch):
        rng = make_rng(seed_for(self.cfg.global_seed, SHUFFLE_ID, epoch, 0))
        return rng.permutation(n)

    def train(self, samples, val_samples=None, log_path=None, initial_params=None):
        """
        Run all epochs.

        With validation samples the parameters of the epoch with the best
        worst-case validation accuracy are returned; every epoch still runs.

        Args:
            samples: TrainingSamples
            val_samples: Optional validation TrainingSamples
            log_path: Optional JSONL path for per-step records
            initial_params: Starting parameters (default: seeded init)

        Returns:
            TrainingResult: Parameters, step log and validation history
        """
        self._check_dataset(samples)
        cfg = self.cfg
        params = initial_params or DetectorParams.initialize(cfg.global_seed)
        theta = params.flatten()
        optimizer = AdamW(theta.size, cfg)
        result = TrainingResult(params=params)
        best_score = None

        log_file = open(log_path, "w", encoding="utf-8") if log_path else None
        try:
            step = 0
            for epoch in range(cfg.epochs):
                order = self.epoch_order(len(samples), epoch)
                for start in range(0, len(order), cfg.batch_size):
                    batch = [samples[i] for i in order[start : start + cfg.batch_size]]
                    params = params.unflatten(theta)

                    grad_sum = np.zeros_like(theta)
                    records = []
                    families = []
                    for sample in batch:
                        breakdown, grad, family, _ = self.sample_step(sample, params, epoch)
                        grad_sum += grad
                        records.append(breakdown.to_record())
                        families.append(family)

                    grad, norm = clip_global_norm(grad_sum / len(batch), cfg.clip_norm)
                    theta = optimizer.step(theta, grad)

                    losses = {
                        key: float(np.mean([r[key] for r in records])) for key in records[0]
                    }
                    entry = {
                        "epoch": epoch,
                        "step": step,
                        "sampleIds": [s.id for s in batch],
                        "chosenFamilies": families,
                        "losses": losses,
                        "gradNorm": norm,
                    }
                    result.log.append(entry)
                    if log_file:
                        log_file.write(json.dumps(entry, sort_keys=True) + "\n")
                    logger.info(
                        f"epoch {epoch} step {step} loss {losses['total']:.6f} grad norm {norm:.6f}"
                    )
                    step += 1

                params = params.unflatten(theta)
                if val_samples:
                    score = self.validate(params, val_samples)
                    result.val_scores.append(score)
                    logger.info(f"epoch {epoch} validation worst-case ACC {score:.4f}")
                    if best_score is None or score > best_score:
                        best_score = score
                        result.best_epoch = epoch
                        result.params = params.copy()
                else:
                    result.params = params
        finally:
            if log_file:
                log_file.close()
        return result

    def validate(self, params, val_samples):
        """Worst-case ACC over the clean and six attacked validation views at their tau*."""
        records = []
        for sample in val_samples:
            views = [("clean", sample.image)]
            for family in self.manager.get_available_families():
                inst = self.manager.evaluation_instance(family, self.cfg.global_seed, sample.id)
                views.append(
                    (family.value, self.manager.apply(sample.image, inst, sample.attack_prior()))
                )
            for split, img in views:
                out = self.detector.forward(pi_preprocess(img, self.working_size), params)
                records.append(
                    PredictionRecord(
                        id=sample.id,
                        split=split,
                        probability=float(sigmoid(out.logit)),
                        label=sample.label,
                    )
                )
        by_split = group_by_split(records)
        tau = tune_tau(by_split)
        return min(confusion_counts(r, tau).accuracy for r in by_split.values())


def train(samples, cfg=None, weights=None, **kwargs):
    """
    Functional entry point for RedTeamTrainer.train.

    Keyword arguments go to the trainer (detector, manager, working_size) or to
    train (val_samples, log_path, initial_params).
    """
    trainer_keys = {"detector", "manager", "working_size"}
    trainer_kwargs = {k: v for k, v in kwargs.items() if k in trainer_keys}
    run_kwargs = {k: v for k, v in kwargs.items() if k not in trainer_keys}
    return RedTeamTrainer(cfg, weights, **trainer_kwargs).train(samples, **run_kwargs)
