"""
Experiment harness for the ForgeFighter system.

This module provides manifests, the synthetic corpus, run configuration and the
evaluation runner.
"""

from .config import RunConfig, RunOptions, load_run_config, save_run_config
from .manifest import ManifestEntry, load_samples, read_manifest, write_manifest
from .synth import gen_synth
from .evaluation import run_eval
