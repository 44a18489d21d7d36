"""Shared fixtures: one synthetic data set and one pipeline run, both
generated once per session and reused by every test that needs them."""

from __future__ import annotations

import time

import pytest

from marketburst.config import load_config
from marketburst.pipeline import PipelinePaths, run_pipeline
from marketburst.synth import generate_synthetic, standard_scenario

MULTIPLIER = 2.5


@pytest.fixture(scope="session")
def synth_dir(tmp_path_factory):
    """Directory with the stock seeded scenario's generated files."""
    out = tmp_path_factory.mktemp("synth")
    generate_synthetic(out, standard_scenario(seed=0))
    return out


@pytest.fixture(scope="session")
def pipeline_run(synth_dir, tmp_path_factory):
    """One full pipeline run at multiplier 2.5 over the synthetic set.

    Returns the config, paths object, summary dict, and wall time so
    the end-to-end checks can share the (comparatively slow) run.
    """
    out = tmp_path_factory.mktemp("run")
    config = load_config(synth_dir / "config.ini")
    started = time.perf_counter()
    summary = run_pipeline(config, synth_dir, out, multipliers=(MULTIPLIER,))
    elapsed = time.perf_counter() - started
    return {
        "config": config,
        "data_dir": synth_dir,
        "out_dir": out,
        "paths": PipelinePaths(out),
        "summary": summary,
        "elapsed_s": elapsed,
        "multiplier": MULTIPLIER,
    }
