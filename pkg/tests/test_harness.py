"""
Tests for run configuration, manifests, the synthetic corpus and evaluation helpers.
"""

import json
import os

import numpy as np
import pandas as pd
import pytest
from scipy import ndimage

from forgefighter.core.attack_manager import AttackManager
from forgefighter.core.defense import DefenseConfig
from forgefighter.core.detector import DetectorParams
from forgefighter.core.errors import ManifestError, PreconditionError
from forgefighter.core.trainer import TrainConfig
from forgefighter.harness.config import RunConfig, load_run_config, save_run_config
from forgefighter.harness.evaluation import (
    Evaluator,
    ViewResult,
    localization_summary,
    record_id,
    split_metrics,
    surveillance_ids,
)
from forgefighter.harness.manifest import (
    MANIFEST_FILE,
    ManifestEntry,
    load_samples,
    read_manifest,
    select_split,
    validate_entries,
    write_manifest,
)
from forgefighter.harness.synth import (
    FEATHER_WIDTH,
    ellipse_mask,
    gen_synth,
    pair_seeds,
    split_for,
    synth_base,
    synth_fake,
)
from forgefighter.testing import constant_image, scored_records, textured_image, training_sample
from forgefighter.utils.image_io import load_image, save_image
from forgefighter.utils.metrics import SPLITS, PredictionRecord
from forgefighter.utils.priors import FaceBox
from forgefighter.utils.report_writer import ReportWriter
from forgefighter.utils.visualization import (
    OVERLAY_ALPHA,
    OVERLAY_COLOR,
    blend_overlay,
    plot_risk_coverage,
    render_overlay,
)

SIZE = 32


def small_config():
    config = RunConfig()
    config.run.working_size = SIZE
    config.run.mask_grid = 8
    config.defense = DefenseConfig(enabled=False)
    return config


# Run configuration


def test_config_text_round_trip():
    config = RunConfig()
    config.run.mask_grid = 8
    config.train = TrainConfig(k=2, lr=0.002, global_seed=11)
    config.defense = DefenseConfig(n_views=5, gamma_range=(0.9, 1.1))
    config.set_range("jpeg", "quality", 60, 80)

    text = config.to_text()
    assert "attack.jpeg.quality=60,80" in text
    assert "train.lr=0.002" in text
    parsed = RunConfig.from_text(text)
    assert parsed == config
    assert parsed.to_text() == text


def test_config_text_is_sorted():
    lines = RunConfig().to_text().splitlines()
    assert lines == sorted(lines)
    assert all("=" in line for line in lines)


def test_missing_keys_keep_defaults():
    config = RunConfig.from_text("# comment\n\ntrain.k=4\ndefense.enabled=false\n")
    assert config.train.k == 4
    assert config.defense.enabled is False
    assert config.train.lr == TrainConfig().lr
    assert config.attack_ranges == {}


def test_unknown_keys_are_rejected():
    for text in ("run.bogus=1\n", "nosection=3\n", "attack.jpeg.bogus=1,2\n", "just text\n"):
        with pytest.raises(PreconditionError):
            RunConfig.from_text(text)


def test_bad_values_are_rejected():
    with pytest.raises(PreconditionError):
        RunConfig.from_text("defense.enabled=yes\n")
    with pytest.raises(PreconditionError):
        RunConfig.from_text("defense.gamma_range=0.9\n")
    with pytest.raises(PreconditionError):
        RunConfig.from_text("train.k=9\n")


def test_range_overrides_reach_the_attack_manager():
    config = RunConfig.from_text("attack.transcode.quality=45,46\n")
    manager = AttackManager(range_overrides=config.range_overrides())
    for seed in range(50):
        assert manager.sample_attack("transcode", seed).params["quality"] in (45, 46)


def test_default_ranges_are_not_stored_as_overrides():
    config = RunConfig.from_text("attack.jpeg.quality=50,90\n")
    assert config.attack_ranges == {}


def test_config_file_round_trip(tmp_path):
    config = RunConfig()
    config.run.theta = 0.4
    path = tmp_path / "run_config.txt"
    save_run_config(config, path)
    assert load_run_config(path) == config


# Manifests


def entry(image_id, label=0, split="train", box=None, path=None):
    return ManifestEntry(
        id=image_id, path=path or f"images/{image_id}.png", label=label, split=split, box=box
    )


def test_manifest_round_trip(tmp_path):
    entries = [
        entry("real-0"),
        entry("fake-0", label=1, split="test", box=FaceBox(1.5, 2.0, 20.0, 30.0)),
    ]
    path = tmp_path / MANIFEST_FILE
    write_manifest(entries, path)
    assert read_manifest(path) == entries
    first = json.loads(path.read_text().splitlines()[0])
    assert first["box"] is None


def test_duplicate_ids_are_rejected():
    with pytest.raises(ManifestError, match="Duplicate ids: a"):
        validate_entries([entry("a"), entry("b"), entry("a")])


def test_bad_labels_and_splits_are_rejected():
    with pytest.raises(ManifestError):
        validate_entries([entry("a", label=2)])
    with pytest.raises(ManifestError):
        validate_entries([entry("a", split="holdout")])


def test_boxes_required_for_mask_supervision():
    validate_entries([entry("f", label=1)])
    with pytest.raises(ManifestError):
        validate_entries([entry("f", label=1)], require_boxes=True)
    validate_entries([entry("r", label=0)], require_boxes=True)


def test_malformed_manifest_lines(tmp_path):
    path = tmp_path / MANIFEST_FILE
    path.write_text('{"id": "a", "path": "a.png", "label": 0, "split": "train"}\n{oops\n')
    with pytest.raises(ManifestError):
        read_manifest(path)
    path.write_text('{"id": "a", "label": 0, "split": "train"}\n')
    with pytest.raises(ManifestError):
        read_manifest(path)


def test_select_split_keeps_order():
    entries = [entry("a", split="test"), entry("b"), entry("c", split="test")]
    assert [e.id for e in select_split(entries, "test")] == ["a", "c"]


def test_load_samples_lists_missing_files(tmp_path):
    save_image(textured_image(1, 40), str(tmp_path / "there.png"))
    entries = [
        entry("there", path="there.png"),
        entry("gone-1", path="gone-1.png"),
        entry("gone-2", path="gone-2.png"),
    ]
    with pytest.raises(ManifestError, match="gone-1, gone-2"):
        load_samples(entries, str(tmp_path), SIZE)


def test_load_samples_resizes_and_builds_priors(tmp_path):
    save_image(textured_image(1, 40), str(tmp_path / "a.png"))
    save_image(textured_image(2, 40), str(tmp_path / "b.png"))
    entries = [
        entry("a", path="a.png"),
        entry("b", label=1, path="b.png", box=FaceBox(10.0, 10.0, 30.0, 30.0)),
    ]
    real, fake = load_samples(entries, str(tmp_path), SIZE)
    assert real.image.shape == (SIZE, SIZE, 3)
    assert real.prior is None
    assert fake.prior.shape == (SIZE, SIZE)
    assert fake.prior[SIZE // 2, SIZE // 2] == pytest.approx(1.0, abs=1e-6)
    assert fake.label == 1


# Synthetic corpus


def test_split_assignment():
    splits = [split_for(i, 10, 0.1, 0.2) for i in range(10)]
    assert splits.count("train") == 7
    assert splits.count("val") == 1
    assert splits.count("test") == 2
    assert splits == sorted(splits, key=["train", "val", "test"].index)


def test_pair_seeds_are_distinct():
    seeds = pair_seeds(5, 0)
    assert len(set(seeds)) == 4
    assert pair_seeds(5, 0) == seeds
    assert pair_seeds(5, 1) != seeds


def test_synthetic_base_image():
    item = synth_base(3, 64)
    assert item.image.shape == (64, 64, 3)
    assert item.image.min() >= 0.0 and item.image.max() <= 1.0
    assert 0 <= item.box.x0 < item.box.x1 <= 64
    assert 0 <= item.box.y0 < item.box.y1 <= 64
    assert np.array_equal(synth_base(3, 64).image, item.image)


def test_fake_differs_only_near_the_spliced_region():
    source = synth_base(1, 64)
    fake = synth_fake(1, 2, 3, 64)
    assert fake.box == source.box
    inner = ellipse_mask(64, fake.center, fake.axes)
    near = ndimage.binary_dilation(inner, structure=np.ones((2 * FEATHER_WIDTH + 1,) * 2))
    assert np.array_equal(fake.image[~near], source.image[~near])
    assert np.abs(fake.image[inner] - source.image[inner]).max() > 1e-3


def test_gen_synth_is_balanced_and_deterministic(tmp_path):
    a = gen_synth(8, 4, str(tmp_path / "a"), size=SIZE, val_fraction=0.25, test_fraction=0.25)
    b = gen_synth(8, 4, str(tmp_path / "b"), size=SIZE, val_fraction=0.25, test_fraction=0.25)
    assert a == b
    assert sum(e.label for e in a) == 4
    for split in ("train", "val", "test"):
        labels = [e.label for e in select_split(a, split)]
        assert labels.count(0) == labels.count(1) > 0
    for e in a:
        assert (tmp_path / "a" / e.path).read_bytes() == (tmp_path / "b" / e.path).read_bytes()
    assert read_manifest(tmp_path / "a" / MANIFEST_FILE) == a


def test_gen_synth_needs_an_even_count(tmp_path):
    for count in (0, 3):
        with pytest.raises(PreconditionError):
            gen_synth(count, 0, str(tmp_path))


def test_generated_corpus_loads(tmp_path):
    entries = gen_synth(4, 9, str(tmp_path), size=SIZE, test_fraction=0.5)
    samples = load_samples(entries, str(tmp_path), SIZE)
    assert all(s.prior is not None for s in samples)
    assert [s.id for s in samples] == [e.id for e in entries]


# Evaluation helpers


def test_record_ids():
    assert record_id("img", "clean") == "img"
    assert record_id("img", "jpeg") == "img:jpeg"


def test_evaluator_views_cover_every_split():
    evaluator = Evaluator(DetectorParams.initialize(1), small_config())
    fake = training_sample(seed=3, label=1, size=SIZE)
    views = list(evaluator.views(fake))
    assert [split for split, _, _ in views] == list(SPLITS)
    assert views[0][1] is fake.image
    for _, image, prior in views:
        assert image.shape == (SIZE, SIZE, 3)
        assert prior.min() >= 0.0 and prior.max() <= 1.0


def test_evaluator_is_deterministic():
    config = small_config()
    params = DetectorParams.initialize(2)
    samples = [training_sample(1, 1, SIZE), training_sample(2, 0, SIZE)]
    first = Evaluator(params, config).evaluate(samples)
    second = Evaluator(params, config).evaluate(samples)
    assert len(first) == 2 * len(SPLITS)
    assert [r.record for r in first] == [r.record for r in second]
    fakes = [r for r in first if r.record.label == 1]
    reals = [r for r in first if r.record.label == 0]
    assert all(r.localization is not None for r in fakes)
    assert all(r.localization is None for r in reals)


def test_split_metrics_row():
    row = split_metrics(scored_records(seed=1, n=40), 0.5, 10)
    assert row["n"] == 40
    assert 0.0 <= row["auc"] <= 1.0
    assert set(row["counts"]) == {"tn", "fp", "fn", "tp"}
    assert sum(row["counts"].values()) == 40
    assert sum(b["count"] for b in row["reliability"]) == 40


def test_split_metrics_single_class():
    records = [PredictionRecord(id=f"r{i}", split="clean", probability=0.2, label=0) for i in range(3)]
    row = split_metrics(records, 0.5, 10)
    assert row["auc"] is None and row["eer"] is None
    assert row["acc"] == 1.0


def test_localization_summary():
    def result(split, label, loc=None, evidence=0.0):
        rec = PredictionRecord(id=f"{split}{label}", split=split, probability=0.5, label=label)
        return ViewResult(record=rec, localization=loc, mean_evidence=evidence)

    loc = {
        "ewr": 0.8,
        "precisionInRoi": 0.6,
        "dilatedIou": 0.5,
        "softIou": 0.4,
        "hardIou": 0.3,
        "emptyPrediction": False,
    }
    rows = localization_summary([result("clean", 1, loc), result("clean", 0, evidence=0.2)])
    assert [r["split"] for r in rows] == list(SPLITS)
    clean = rows[0]
    assert clean["nFakes"] == 1 and clean["ewr"] == 0.8
    assert clean["realMeanEvidence"] == pytest.approx(0.2)
    assert rows[1]["ewr"] is None and rows[1]["realMeanEvidence"] is None


def test_surveillance_ids_pick_dark_images():
    dark = training_sample(1, 0, SIZE)
    dark.image = constant_image(0.1, SIZE, SIZE)
    bright = training_sample(2, 0, SIZE)
    bright.image = constant_image(0.8, SIZE, SIZE)
    assert surveillance_ids([dark, bright], AttackManager(), 0) == [dark.id]


# Overlays and report files


def test_blend_overlay_alpha():
    img = textured_image(3)
    assert np.allclose(blend_overlay(img, np.zeros((SIZE, SIZE))), img)
    full = blend_overlay(img, np.ones((8, 8)))
    expected = img * (1.0 - OVERLAY_ALPHA) + OVERLAY_COLOR * OVERLAY_ALPHA
    assert np.allclose(full, expected, atol=1e-12)


def test_render_overlay_writes_a_png(tmp_path):
    path = str(tmp_path / "overlay.png")
    render_overlay(textured_image(4), np.full((8, 8), 0.5), path)
    assert load_image(path).shape == (SIZE, SIZE, 3)


def test_risk_coverage_plot(tmp_path):
    path = tmp_path / "rc.png"
    plot_risk_coverage({"clean": (np.linspace(0.1, 1, 10), np.linspace(0, 0.3, 10))}, str(path))
    assert path.stat().st_size > 0


def test_report_writer_records_order(tmp_path):
    writer = ReportWriter(str(tmp_path / "report"))
    writer.write_json("b.json", {"z": 1, "a": [1, 2]})
    writer.write_csv("a.csv", pd.DataFrame({"x": [0.5, 1.0 / 3.0]}))
    writer.write_jsonl("c.jsonl", [{"k": 1}, {"k": 2}])
    assert writer.written == ["b.json", "a.csv", "c.jsonl"]
    text = (tmp_path / "report" / "b.json").read_text()
    assert text.index('"a"') < text.index('"z"')
    assert (tmp_path / "report" / "a.csv").read_text().splitlines() == ["x", "0.5", "0.333333333333"]
    assert len((tmp_path / "report" / "c.jsonl").read_text().splitlines()) == 2
    assert os.path.isdir(writer.subdir("overlays"))
