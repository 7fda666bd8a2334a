"""
Evaluation runner.

Scores every test image clean and under one deterministic instance of each attack
family through the randomized defense, tunes the global max-min threshold, and
writes the metrics report, confusion table, risk-coverage curves, localization
summary, prediction dump and optional evidence overlays.
"""

import logging
import os
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import pandas as pd

from forgefighter.core.attack_manager import AttackManager
from forgefighter.core.defense import ttd_predict
from forgefighter.core.detector import TwoStreamDetector
from forgefighter.core.errors import ManifestError, UndefinedMetricError
from forgefighter.harness.config import RUN_CONFIG_FILE
from forgefighter.harness.manifest import load_samples, select_split
from forgefighter.utils.filters import luminance
from forgefighter.utils.metrics import (
    SPLITS,
    PredictionRecord,
    calib_metrics,
    confusion_counts,
    group_by_split,
    operating_metrics,
    rank_metrics,
    selective_metrics,
    tune_tau,
    weak_localization,
)
from forgefighter.utils.report_writer import ReportWriter
from forgefighter.utils.visualization import render_overlay

logger = logging.getLogger(__name__)

LOCALIZATION_KEYS = ("ewr", "precisionInRoi", "dilatedIou", "softIou", "hardIou")


@dataclass
class ViewResult:
    """One defended prediction plus its localization scores."""

    record: PredictionRecord
    localization: Optional[dict] = None
    mean_evidence: float = 0.0


@dataclass
class EvalResult:
    report: dict
    records: List[PredictionRecord] = field(default_factory=list)
    files: List[str] = field(default_factory=list)


def record_id(sample_id, split):
    return sample_id if split == "clean" else f"{sample_id}:{split}"


class Evaluator:
    """Produces paired clean/attacked defended predictions for a sample set."""

    def __init__(self, params, config, detector=None, manager=None):
        self.params = params
        self.config = config
        self.detector = detector or TwoStreamDetector(config.run.mask_grid)
        self.manager = manager or AttackManager(range_overrides=config.range_overrides())

    def views(self, sample):
        """(split, image, prior) for the clean view and each family's instance."""
        seed = self.config.train.global_seed
        yield "clean", sample.image, sample.prior
        for family in self.manager.get_available_families():
            inst = self.manager.evaluation_instance(family, seed, sample.id)
            view = self.manager.apply(sample.image, inst, sample.attack_prior())
            prior = None
            if sample.prior is not None:
                prior = np.clip(self.manager.transform_prior(sample.prior, inst), 0.0, 1.0)
            yield family.value, view, prior

    def evaluate(self, samples, localize=True, overlay_dir=None, overlays=0):
        """
        Defended predictions for every sample and split.

        Args:
            samples: TrainingSamples
            localize: Whether to score weak localization on fakes
            overlay_dir: Directory for evidence overlays
            overlays: Number of leading samples per split to render

        Returns:
            list: ViewResult objects in sample-then-split order
        """
        run = self.config.run
        results = []
        for index, sample in enumerate(samples):
            for split, view, prior in self.views(sample):
                pred = ttd_predict(
                    view,
                    self.params,
                    self.config.defense,
                    self.detector,
                    image_id=sample.id,
                    working_size=run.working_size,
                )
                rid = record_id(sample.id, split)
                result = ViewResult(
                    record=PredictionRecord(
                        id=rid,
                        split=split,
                        probability=pred.probability,
                        label=sample.label,
                    ),
                    mean_evidence=float(pred.evidence.mean()),
                )
                if localize and sample.label == 1 and prior is not None:
                    result.localization = weak_localization(
                        pred.evidence, prior, run.theta, run.dilate_radius
                    ).as_dict()
                if overlay_dir and index < overlays:
                    render_overlay(
                        view, pred.evidence, os.path.join(overlay_dir, f"{rid.replace(':', '_')}.png")
                    )
                results.append(result)
            logger.debug(f"Evaluated {sample.id}")
        return results


def split_metrics(records, tau, bins):
    """Per-split metrics row of the report."""
    point = operating_metrics(records, tau)
    calib = calib_metrics(records, bins)
    selective = selective_metrics(records)
    try:
        auc, ap = rank_metrics(records)
    except UndefinedMetricError:
        auc, ap = None, None
    return {
        "n": len(records),
        "auc": auc,
        "ap": ap,
        "acc": point.accuracy,
        "eer": point.eer,
        "tprAtFpr1e-2": point.tpr_at_fpr.get(1e-2),
        "tprAtFpr1e-3": point.tpr_at_fpr.get(1e-3),
        "ece": calib.ece,
        "brier": calib.brier,
        "nll": calib.nll,
        "aurc": selective.aurc,
        "counts": point.counts.as_dict(),
        "reliability": [
            {"confidence": b.confidence, "accuracy": b.accuracy, "count": b.count}
            for b in calib.reliability
        ],
    }


def surveillance_ids(samples, manager, global_seed, threshold=0.35):
    """
    Ids of samples that look like low-exposure surveillance footage.

    A sample qualifies when the mean luminance of its transcoded view is below
    the threshold.
    """
    ids = []
    for sample in samples:
        inst = manager.evaluation_instance("transcode", global_seed, sample.id)
        view = manager.apply(sample.image, inst, sample.attack_prior())
        if float(luminance(view).mean()) < threshold:
            ids.append(sample.id)
    return ids


def localization_summary(results):
    """Mean localization scores over fakes and mean evidence over reals, per split."""
    rows = []
    for split in SPLITS:
        scored = [
            r.localization
            for r in results
            if r.record.split == split and r.localization is not None
        ]
        reals = [r.mean_evidence for r in results if r.record.split == split and r.record.label == 0]
        row = {"split": split, "nFakes": len(scored)}
        for key in LOCALIZATION_KEYS:
            row[key] = float(np.mean([s[key] for s in scored])) if scored else None
        row["emptyPredictions"] = sum(1 for s in scored if s["emptyPrediction"])
        row["realMeanEvidence"] = float(np.mean(reals)) if reals else None
        rows.append(row)
    return rows


def run_eval(entries, root, params, config, out_dir=None, overlays=0, detector=None):
    """
    Evaluate a trained detector on the manifest's test split.

    Args:
        entries: ManifestEntry list
        root: Directory the manifest paths are relative to
        params: DetectorParams
        config: RunConfig
        out_dir: Report directory (default: config.run.out_dir)
        overlays: Number of test images per split to render as overlays
        detector: TwoStreamDetector

    Returns:
        EvalResult: Report dict, records and written file names
    """
    run = config.run
    test_entries = select_split(entries, "test")
    if not test_entries:
        raise ManifestError("Manifest has no test entries")
    evaluator = Evaluator(params, config, detector)
    writer = ReportWriter(out_dir or run.out_dir)
    writer.write_text(RUN_CONFIG_FILE, config.to_text())

    samples = load_samples(
        test_entries, root, run.working_size, run.prior_margin, run.prior_sigma_frac
    )
    overlay_dir = writer.subdir("overlays") if overlays else None
    results = evaluator.evaluate(samples, overlay_dir=overlay_dir, overlays=overlays)
    records = [r.record for r in results]
    by_split = group_by_split(records)

    val_entries = select_split(entries, "val")
    if val_entries:
        val_samples = load_samples(
            val_entries, root, run.working_size, run.prior_margin, run.prior_sigma_frac
        )
        val_records = [r.record for r in evaluator.evaluate(val_samples, localize=False)]
        tau = tune_tau(group_by_split(val_records))
        tau_source = "val"
    else:
        tau = tune_tau(by_split)
        tau_source = "test"
    logger.info(f"Global operating point tau*={tau:.6f} (tuned on {tau_source})")

    splits = {split: split_metrics(recs, tau, run.bins) for split, recs in by_split.items()}
    localization = localization_summary(results)
    report = {
        "tau": tau,
        "tauSource": tau_source,
        "worstCaseAcc": min(row["acc"] for row in splits.values()),
        "splits": splits,
        "localization": {row["split"]: row for row in localization},
    }

    weak = surveillance_ids(
        samples, evaluator.manager, config.train.global_seed, run.surveillance_threshold
    )
    if weak:
        acc = {}
        for split, recs in by_split.items():
            wanted = {record_id(i, split) for i in weak}
            acc[split] = confusion_counts([r for r in recs if r.id in wanted], tau).accuracy
        report["surveillance"] = {"ids": weak, "acc": acc}

    writer.write_json("metrics.json", report)
    writer.write_csv(
        "confusion.csv",
        pd.DataFrame(
            [{"split": split, **row["counts"]} for split, row in splits.items()],
            columns=["split", "tn", "fp", "fn", "tp"],
        ),
    )
    for split, recs in by_split.items():
        curve = selective_metrics(recs)
        writer.write_csv(
            f"risk_coverage_{split}.csv",
            pd.DataFrame({"coverage": curve.coverage, "risk": curve.risk}),
        )
    writer.write_csv("localization.csv", pd.DataFrame(localization))
    writer.write_jsonl("predictions.jsonl", [r.to_record() for r in records])

    logger.info(f"Worst-case ACC {report['worstCaseAcc']:.4f} over {len(splits)} splits")
    return EvalResult(report=report, records=records, files=list(writer.written))
