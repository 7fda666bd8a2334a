"""
ForgeFighter command-line interface.

Subcommands cover corpus generation, single-image attacks, training, inference,
evaluation, threshold re-tuning, gradient checking and report rendering.
"""

import argparse
import json
import logging
import os
import sys
from dataclasses import replace

import pandas as pd

from forgefighter.core.attack_manager import AttackManager
from forgefighter.core.defense import ttd_predict
from forgefighter.core.detector import DetectorParams, TwoStreamDetector, load_params, save_params
from forgefighter.core.errors import ForgeFighterError
from forgefighter.core.objective import LossSpace, grad_check
from forgefighter.core.trainer import RedTeamTrainer
from forgefighter.harness.config import RUN_CONFIG_FILE, RunConfig, load_run_config
from forgefighter.harness.evaluation import run_eval
from forgefighter.harness.manifest import load_samples, read_manifest, select_split
from forgefighter.harness.synth import gen_synth
from forgefighter.utils.filters import resize_bilinear
from forgefighter.utils.image_io import load_image, save_image
from forgefighter.utils.metrics import PredictionRecord, confusion_counts, group_by_split, tune_tau
from forgefighter.utils.preprocess import pi_preprocess
from forgefighter.utils.priors import FaceBox, build_prior
from forgefighter.utils.seeding import make_rng, seed_for
from forgefighter.utils.visualization import plot_reliability, plot_risk_coverage, render_overlay

logger = logging.getLogger("forgefighter")

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"
CHECKPOINT_FILE = "detector.bin"
TRAIN_LOG_FILE = "train_log.jsonl"


def resolve_config(args):
    """RunConfig from --config with explicit global flags applied on top."""
    config = load_run_config(args.config) if args.config else RunConfig()
    if args.seed is not None:
        config.train = replace(config.train, global_seed=args.seed)
        config.defense = replace(config.defense, seed=args.seed)
    if args.out:
        config.run.out_dir = args.out
    if getattr(args, "working_size", None):
        config.run.working_size = args.working_size
    if getattr(args, "no_defense", False):
        config.defense = replace(config.defense, enabled=False)
    return config


def _manifest_root(path):
    return os.path.dirname(os.path.abspath(path))


def cmd_synth(args, config):
    entries = gen_synth(
        args.count,
        config.train.global_seed,
        config.run.out_dir,
        size=args.size,
        val_fraction=args.val_fraction,
        test_fraction=args.test_fraction,
    )
    print(f"Wrote {len(entries)} images and manifest to {config.run.out_dir}")


def cmd_attack(args, config):
    manager = AttackManager(range_overrides=config.range_overrides())
    img = load_image(args.input)
    seed = seed_for(config.train.global_seed, os.path.basename(args.input))
    inst = manager.sample_attack(args.family, seed)

    prior = None
    if args.box:
        box = FaceBox.from_list(args.box.split(","))
        h, w = img.shape[:2]
        prior = resize_bilinear(build_prior(box, h, w, max(h, w)).grid, h, w)
    save_image(manager.apply(img, inst, prior), args.output)
    print(inst.to_record())


def cmd_train(args, config):
    train_cfg = config.train
    overrides = {
        "k": args.k,
        "epochs": args.epochs,
        "batch_size": args.batch_size,
        "lr": args.lr,
    }
    changes = {k: v for k, v in overrides.items() if v is not None}
    if args.clean_only:
        changes["attack_aware"] = False
    if args.loss_at_mask_grid:
        changes["loss_at_working_res"] = False
    config.train = replace(train_cfg, **changes)

    run = config.run
    entries = read_manifest(args.manifest)
    root = _manifest_root(args.manifest)
    samples = load_samples(
        select_split(entries, "train"), root, run.working_size, run.prior_margin, run.prior_sigma_frac
    )
    val_entries = select_split(entries, "val")
    val_samples = (
        load_samples(val_entries, root, run.working_size, run.prior_margin, run.prior_sigma_frac)
        if val_entries
        else None
    )

    os.makedirs(run.out_dir, exist_ok=True)
    with open(os.path.join(run.out_dir, RUN_CONFIG_FILE), "w", encoding="utf-8") as f:
        f.write(config.to_text())
    trainer = RedTeamTrainer(
        config.train,
        config.loss,
        TwoStreamDetector(run.mask_grid),
        AttackManager(range_overrides=config.range_overrides()),
        run.working_size,
    )
    result = trainer.train(
        samples, val_samples=val_samples, log_path=os.path.join(run.out_dir, TRAIN_LOG_FILE)
    )
    save_params(result.params, run.mask_grid, os.path.join(run.out_dir, CHECKPOINT_FILE))
    if result.best_epoch is not None:
        print(f"Selected epoch {result.best_epoch} by validation worst-case ACC")
    print(f"Trained {len(result.log)} steps; checkpoint in {run.out_dir}")


def _load_checkpoint(path, config):
    params, mask_grid = load_params(path)
    config.run.mask_grid = mask_grid
    return params, TwoStreamDetector(mask_grid)


def cmd_infer(args, config):
    params, detector = _load_checkpoint(args.checkpoint, config)
    size = config.run.working_size
    img = resize_bilinear(load_image(args.input), size, size)
    pred = ttd_predict(
        img,
        params,
        config.defense,
        detector,
        image_id=os.path.basename(args.input),
        working_size=size,
    )
    if args.overlay:
        render_overlay(img, pred.evidence, args.overlay)
    print(
        json.dumps(
            {
                "probability": pred.probability,
                "meanLogit": pred.mean_logit,
                "perViewLogits": pred.per_view_logits,
            },
            sort_keys=True,
        )
    )


def cmd_eval(args, config):
    params, detector = _load_checkpoint(args.checkpoint, config)
    entries = read_manifest(args.manifest)
    result = run_eval(
        entries,
        _manifest_root(args.manifest),
        params,
        config,
        overlays=args.overlays,
        detector=detector,
    )
    print(f"tau*={result.report['tau']:.6f} worst-case ACC={result.report['worstCaseAcc']:.4f}")


def cmd_tune_threshold(args, config):
    records = []
    with open(args.predictions, encoding="utf-8") as f:
        for line in f:
            if line.strip():
                row = json.loads(line)
                records.append(
                    PredictionRecord(
                        id=row["id"],
                        split=row["split"],
                        probability=float(row["probability"]),
                        label=int(row["label"]),
                    )
                )
    by_split = group_by_split(records)
    tau = tune_tau(by_split)
    acc = {split: confusion_counts(recs, tau).accuracy for split, recs in by_split.items()}
    print(json.dumps({"tau": tau, "acc": acc, "worstCaseAcc": min(acc.values())}, sort_keys=True))


def cmd_gradcheck(args, config):
    run = config.run
    rng = make_rng(config.train.global_seed)
    size = run.working_size
    img = rng.uniform(0.0, 1.0, size=(size, size, 3))
    x = pi_preprocess(img, size)
    g = build_prior(FaceBox(size / 4, size / 4, 3 * size / 4, 3 * size / 4), size, size, size).grid
    weights = config.loss.linear_only() if args.linear_only else config.loss
    detector = TwoStreamDetector(run.mask_grid)
    space = LossSpace(run.mask_grid, size, at_working_res=config.train.loss_at_working_res)

    worst = 0.0
    for trial_seed in range(args.seeds):
        params = DetectorParams.initialize(config.train.global_seed + trial_seed)
        params = params.unflatten(params.flatten() + 0.1 * rng.standard_normal(params.count()))
        error = grad_check(
            x, g, 1, params, weights, args.trials, detector=detector, space=space, seed=trial_seed
        )
        logger.info(f"gradient check seed {trial_seed}: max relative error {error:.3e}")
        worst = max(worst, error)
    print(f"max relative error {worst:.3e}")


def cmd_report(args, config):
    with open(os.path.join(args.eval_dir, "metrics.json"), encoding="utf-8") as f:
        report = json.load(f)
    splits = report["splits"]

    curves = {}
    for split in splits:
        frame = pd.read_csv(os.path.join(args.eval_dir, f"risk_coverage_{split}.csv"))
        curves[split] = (frame["coverage"].to_numpy(), frame["risk"].to_numpy())
    out_dir = config.run.out_dir if args.out else args.eval_dir
    os.makedirs(out_dir, exist_ok=True)
    plot_risk_coverage(curves, os.path.join(out_dir, "risk_coverage.png"))
    plot_reliability(
        {split: row["reliability"] for split, row in splits.items()},
        os.path.join(out_dir, "reliability.png"),
    )

    columns = ["auc", "ap", "acc", "eer", "ece", "brier", "nll", "aurc"]
    table = pd.DataFrame([{"split": s, **{c: row[c] for c in columns}} for s, row in splits.items()])
    table.to_csv(os.path.join(out_dir, "metrics_table.csv"), index=False, float_format="%.4f")
    print(table.to_string(index=False, float_format=lambda v: f"{v:.4f}"))
    print(f"tau*={report['tau']:.6f} ({report['tauSource']}) worst-case ACC={report['worstCaseAcc']:.4f}")


def build_parser():
    parser = argparse.ArgumentParser(description="ForgeFighter attack-aware forgery detection")
    parser.add_argument("--seed", type=int, default=None, help="Global seed")
    parser.add_argument("--config", type=str, default=None, help="run_config.txt to load")
    parser.add_argument("--out", type=str, default=None, help="Output directory")
    parser.add_argument(
        "--log-level",
        type=str,
        default="INFO",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help="Logging level",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="Generate the synthetic paired corpus")
    p.add_argument("--count", type=int, default=500, help="Number of images (even)")
    p.add_argument("--size", type=int, default=256, help="Image side length")
    p.add_argument("--val-fraction", type=float, default=0.0, help="Fraction of pairs for val")
    p.add_argument("--test-fraction", type=float, default=0.2, help="Fraction of pairs for test")
    p.set_defaults(handler=cmd_synth)

    p = sub.add_parser("attack", help="Apply one sampled attack to an image")
    p.add_argument("--input", required=True, help="Input PNG/PPM")
    p.add_argument("--output", required=True, help="Output PNG/PPM")
    p.add_argument("--family", required=True, help="Attack family")
    p.add_argument("--box", default=None, help="Face box x0,y0,x1,y1 (needed for seam)")
    p.set_defaults(handler=cmd_attack)

    p = sub.add_parser("train", help="Worst-of-K red-team training")
    p.add_argument("--manifest", required=True, help="Manifest JSONL")
    p.add_argument("--k", type=int, default=None, help="Candidates per sample")
    p.add_argument("--epochs", type=int, default=None, help="Number of epochs")
    p.add_argument("--batch-size", type=int, default=None, help="Batch size")
    p.add_argument("--lr", type=float, default=None, help="Learning rate")
    p.add_argument("--working-size", type=int, default=None, help="Working resolution")
    p.add_argument("--clean-only", action="store_true", help="Train without attacks")
    p.add_argument(
        "--loss-at-mask-grid",
        action="store_true",
        help="Compute mask losses on the G x G grid against area-averaged targets",
    )
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("infer", help="Defended prediction for one image")
    p.add_argument("--checkpoint", required=True, help="Detector checkpoint")
    p.add_argument("--input", required=True, help="Input PNG/PPM")
    p.add_argument("--overlay", default=None, help="Write an evidence overlay PNG")
    p.add_argument("--working-size", type=int, default=None, help="Working resolution")
    p.add_argument("--no-defense", action="store_true", help="Single un-jittered view")
    p.set_defaults(handler=cmd_infer)

    p = sub.add_parser("eval", help="Evaluate on the test split")
    p.add_argument("--manifest", required=True, help="Manifest JSONL")
    p.add_argument("--checkpoint", required=True, help="Detector checkpoint")
    p.add_argument("--overlays", type=int, default=0, help="Overlays per split")
    p.add_argument("--working-size", type=int, default=None, help="Working resolution")
    p.add_argument("--no-defense", action="store_true", help="Single un-jittered view")
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser("tune-threshold", help="Re-tune tau* from predictions.jsonl")
    p.add_argument("--predictions", required=True, help="predictions.jsonl")
    p.set_defaults(handler=cmd_tune_threshold)

    p = sub.add_parser("gradcheck", help="Finite-difference gradient check")
    p.add_argument("--trials", type=int, default=3, help="Trials per seed")
    p.add_argument("--seeds", type=int, default=5, help="Number of parameter seeds")
    p.add_argument("--linear-only", action="store_true", help="Classification loss only")
    p.add_argument("--working-size", type=int, default=64, help="Working resolution")
    p.set_defaults(handler=cmd_gradcheck)

    p = sub.add_parser("report", help="Render plots and a table from an eval directory")
    p.add_argument("--eval-dir", required=True, help="Directory written by eval")
    p.set_defaults(handler=cmd_report)
    return parser


def main(argv=None):
    """Main entry point for the command-line interface."""
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level), format=LOG_FORMAT)
    try:
        config = resolve_config(args)
        args.handler(args, config)
    except ForgeFighterError as e:
        logger.error(str(e))
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
