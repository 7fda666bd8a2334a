"""
Evaluation metrics.

Ranking (AUC, AP), operating point (confusion counts, ACC, EER, TPR at fixed FPR),
equal-mass calibration (ECE, Brier, NLL), selective prediction (risk-coverage,
AURC), the max-min global threshold, and weak-localization scores.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np
from sklearn.metrics import average_precision_score, roc_auc_score, roc_curve

from forgefighter.constants import FAMILY_ORDER
from forgefighter.core.errors import PreconditionError, UndefinedMetricError
from forgefighter.utils.filters import dilate_binary

logger = logging.getLogger(__name__)

SPLITS = ("clean",) + tuple(f.value for f in FAMILY_ORDER)
DEFAULT_BINS = 10
PROB_FLOOR = 1e-12
EVIDENCE_FLOOR = 1e-12
FPR_TARGETS = (1e-2, 1e-3)


@dataclass
class PredictionRecord:
    """Per-image output feeding every metric."""

    id: str
    split: str
    probability: float
    label: int
    evidence: Optional[np.ndarray] = None
    prior: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.split not in SPLITS:
            raise PreconditionError(f"Unknown split tag: {self.split}")
        if not 0.0 <= self.probability <= 1.0:
            raise PreconditionError(f"Probability out of range for {self.id}: {self.probability}")
        if self.label not in (0, 1):
            raise PreconditionError(f"Label must be 0 or 1 for {self.id}, got {self.label}")

    def to_record(self):
        return {
            "id": self.id,
            "split": self.split,
            "probability": self.probability,
            "label": self.label,
        }


@dataclass
class ConfusionCounts:
    tn: int = 0
    fp: int = 0
    fn: int = 0
    tp: int = 0

    def __post_init__(self):
        if min(self.tn, self.fp, self.fn, self.tp) < 0:
            raise PreconditionError("Confusion counts must be nonnegative")

    @property
    def total(self):
        return self.tn + self.fp + self.fn + self.tp

    @property
    def accuracy(self):
        return (self.tn + self.tp) / self.total if self.total else 0.0

    def as_dict(self):
        return {"tn": self.tn, "fp": self.fp, "fn": self.fn, "tp": self.tp}


@dataclass
class OperatingPoint:
    counts: ConfusionCounts
    accuracy: float
    eer: Optional[float] = None
    tpr_at_fpr: Dict[float, float] = field(default_factory=dict)


@dataclass
class ReliabilityBin:
    confidence: float
    accuracy: float
    count: int


@dataclass
class CalibrationReport:
    ece: float
    brier: float
    nll: float
    reliability: List[ReliabilityBin] = field(default_factory=list)


@dataclass
class SelectiveReport:
    coverage: np.ndarray
    risk: np.ndarray
    aurc: float


@dataclass
class LocalizationScores:
    ewr: float
    precision_in_roi: float
    dilated_iou: float
    soft_iou: float
    hard_iou: float
    empty_prediction: bool = False

    def as_dict(self):
        return {
            "ewr": self.ewr,
            "precisionInRoi": self.precision_in_roi,
            "dilatedIou": self.dilated_iou,
            "softIou": self.soft_iou,
            "hardIou": self.hard_iou,
            "emptyPrediction": self.empty_prediction,
        }


def _arrays(records):
    ids = np.array([r.id for r in records])
    probs = np.array([r.probability for r in records], dtype=np.float64)
    labels = np.array([r.label for r in records], dtype=np.int64)
    return ids, probs, labels


def _require_both_classes(labels, what):
    if labels.size == 0 or labels.min() == labels.max():
        raise UndefinedMetricError(f"{what} needs at least one positive and one negative")


def _correct(probs, labels):
    return (probs >= 0.5).astype(np.int64) == labels


def rank_metrics(records):
    """
    Threshold-free ranking quality.

    Returns:
        tuple: (AUC, AP)

    Raises:
        UndefinedMetricError: If only one class is present
    """
    _, probs, labels = _arrays(records)
    _require_both_classes(labels, "AUC/AP")
    return float(roc_auc_score(labels, probs)), float(average_precision_score(labels, probs))


def confusion_counts(records, tau):
    _, probs, labels = _arrays(records)
    pred = probs >= tau
    return ConfusionCounts(
        tn=int(np.sum(~pred & (labels == 0))),
        fp=int(np.sum(pred & (labels == 0))),
        fn=int(np.sum(~pred & (labels == 1))),
        tp=int(np.sum(pred & (labels == 1))),
    )


def equal_error_rate(records):
    """
    EER by linear interpolation of the ROC where FPR crosses FNR.

    Raises:
        UndefinedMetricError: If only one class is present
    """
    _, probs, labels = _arrays(records)
    _require_both_classes(labels, "EER")
    fpr, tpr, _ = roc_curve(labels, probs, drop_intermediate=False)
    gap = fpr - (1.0 - tpr)
    i = int(np.argmax(gap >= 0.0))
    if gap[i] == 0.0 or i == 0:
        return float(fpr[i])
    t = -gap[i - 1] / (gap[i] - gap[i - 1])
    return float(fpr[i - 1] + t * (fpr[i] - fpr[i - 1]))


def tpr_at_fpr(records, target):
    """Best TPR over thresholds whose FPR stays at or below target (0 if none)."""
    _, probs, labels = _arrays(records)
    _require_both_classes(labels, "TPR@FPR")
    fpr, tpr, _ = roc_curve(labels, probs, drop_intermediate=False)
    ok = fpr <= target
    return float(tpr[ok].max()) if ok.any() else 0.0


def operating_metrics(records, tau):
    """
    Metrics at threshold tau (predict 1 when p >= tau).

    Single-class inputs still get counts and ACC; EER and TPR@FPR are left unset.

    Args:
        records: PredictionRecords of one split
        tau: Threshold

    Returns:
        OperatingPoint: Counts, ACC, EER and TPR at FPR 1e-2 / 1e-3
    """
    if not records:
        raise PreconditionError("operating_metrics needs at least one record")
    counts = confusion_counts(records, tau)
    point = OperatingPoint(counts=counts, accuracy=counts.accuracy)
    try:
        point.eer = equal_error_rate(records)
        point.tpr_at_fpr = {target: tpr_at_fpr(records, target) for target in FPR_TARGETS}
    except UndefinedMetricError as e:
        logger.warning(f"Operating metrics incomplete: {e}")
    return point


def worst_case_accuracy(counts_by_split):
    """Minimum ACC over splits given their confusion counts."""
    return min(c.accuracy for c in counts_by_split.values())


def calib_metrics(records, bins=DEFAULT_BINS):
    """
    Equal-mass ECE, Brier score and NLL.

    Records are sorted by confidence max(p, 1 - p) with the id as tiebreak and split
    into ``bins`` groups whose sizes differ by at most one.

    Returns:
        CalibrationReport: Scores plus per-bin reliability data
    """
    if not records:
        raise PreconditionError("calib_metrics needs at least one record")
    ids, probs, labels = _arrays(records)
    confidence = np.maximum(probs, 1.0 - probs)
    correct = _correct(probs, labels).astype(np.float64)

    order = np.lexsort((ids, confidence))
    n = len(records)
    ece = 0.0
    reliability = []
    for chunk in np.array_split(order, bins):
        if chunk.size == 0:
            continue
        conf_b = float(confidence[chunk].mean())
        acc_b = float(correct[chunk].mean())
        ece += chunk.size / n * abs(acc_b - conf_b)
        reliability.append(ReliabilityBin(confidence=conf_b, accuracy=acc_b, count=int(chunk.size)))

    brier = float(np.mean((probs - labels) ** 2))
    clipped = np.clip(probs, PROB_FLOOR, 1.0 - PROB_FLOOR)
    nll = float(-np.mean(labels * np.log(clipped) + (1 - labels) * np.log(1.0 - clipped)))
    return CalibrationReport(ece=float(ece), brier=brier, nll=nll, reliability=reliability)


def selective_metrics(records):
    """
    Risk-coverage curve and its area.

    Records are ranked by confidence (descending, id tiebreak); risk at coverage k/N
    is the error rate of the top k.

    Returns:
        SelectiveReport: Coverage, risk and AURC
    """
    if not records:
        raise PreconditionError("selective_metrics needs at least one record")
    ids, probs, labels = _arrays(records)
    confidence = np.maximum(probs, 1.0 - probs)
    order = np.lexsort((ids, -confidence))
    errors = (~_correct(probs, labels))[order].astype(np.float64)

    k = np.arange(1, len(records) + 1)
    risk = np.cumsum(errors) / k
    return SelectiveReport(coverage=k / len(records), risk=risk, aurc=float(risk.mean()))


def _accuracy_curve(records, candidates):
    """ACC of one split at every candidate threshold."""
    _, probs, labels = _arrays(records)
    pos = np.sort(probs[labels == 1])
    neg = np.sort(probs[labels == 0])
    tp = pos.size - np.searchsorted(pos, candidates, side="left")
    tn = np.searchsorted(neg, candidates, side="left")
    return (tp + tn) / len(records)


def threshold_candidates(records_by_split):
    values = np.unique(np.concatenate([_arrays(r)[1] for r in records_by_split.values()]))
    midpoints = (values[:-1] + values[1:]) / 2.0
    return np.unique(np.concatenate([values, midpoints, [0.0, 1.0]]))


def tune_tau(records_by_split):
    """
    Global threshold maximizing the worst per-split accuracy.

    Candidates are every observed probability, the midpoints between adjacent
    values, and 0 and 1. Ties go to the largest threshold.

    Args:
        records_by_split: {split: [PredictionRecord]}

    Returns:
        float: tau*
    """
    if not records_by_split or any(not r for r in records_by_split.values()):
        raise PreconditionError("tune_tau needs every split nonempty")
    candidates = threshold_candidates(records_by_split)
    worst = np.min(
        np.stack([_accuracy_curve(r, candidates) for r in records_by_split.values()]), axis=0
    )
    best = np.flatnonzero(worst == worst.max())
    return float(candidates[best[-1]])


def _iou(a, b):
    union = np.sum(a | b)
    if union == 0:
        return 1.0
    return float(np.sum(a & b) / union)


def weak_localization(evidence, prior, theta=0.5, dilate_radius=8):
    """
    Weak-localization scores of an evidence map against a soft prior.

    Args:
        evidence: Evidence grid in [0, 1]
        prior: Prior grid of the same shape
        theta: Evidence threshold
        dilate_radius: Prior dilation radius for Dilated-IoU

    Returns:
        LocalizationScores: EWR, Precision-in-ROI, Dilated-, Soft- and Hard-IoU
    """
    p = np.asarray(evidence, dtype=np.float64)
    g = np.asarray(prior, dtype=np.float64)
    if p.shape != g.shape:
        raise PreconditionError(f"Evidence {p.shape} and prior {g.shape} differ in shape")

    ewr = float(np.sum(p * g) / max(np.sum(p), EVIDENCE_FLOOR))
    pred = p >= theta
    roi = g >= 0.5

    empty = not pred.any()
    if empty:
        logger.warning("Precision-in-ROI: no evidence above threshold, reporting 1.0")
        pir = 1.0
    else:
        pir = float(np.sum(pred & roi) / np.sum(pred))

    upper = np.sum(np.maximum(p, g))
    soft = float(np.sum(np.minimum(p, g)) / upper) if upper > 0 else 1.0

    return LocalizationScores(
        ewr=ewr,
        precision_in_roi=pir,
        dilated_iou=_iou(pred, dilate_binary(roi, dilate_radius)),
        soft_iou=soft,
        hard_iou=_iou(pred, roi),
        empty_prediction=empty,
    )


def group_by_split(records):
    """{split: records} in canonical split order, skipping absent splits."""
    groups = {split: [] for split in SPLITS}
    for r in records:
        groups[r.split].append(r)
    return {k: v for k, v in groups.items() if v}
