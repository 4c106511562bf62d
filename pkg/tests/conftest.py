# Copyright 2026 Canonical Ltd.
# See LICENSE file for licensing details.

from pathlib import Path

import numpy as np
import pytest

from aesthetics.config import load_config
from aesthetics.pipeline import run_pipeline
from aesthetics.synth import generate_corpus

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def mini_config_path(tmp_path_factory) -> Path:
    """Config of a synthetic mini corpus, generated once per session."""
    return generate_corpus(tmp_path_factory.mktemp("mini"), preset="mini", seed=7)


@pytest.fixture
def mini_config(mini_config_path, tmp_path):
    """Mini corpus config writing its runs into a fresh directory."""
    return load_config(mini_config_path).with_overrides(output_dir=tmp_path / "runs")


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture(scope="session")
def mini_run(mini_config_path, tmp_path_factory) -> Path:
    """Run directory of one full pipeline run over the mini corpus."""
    config = load_config(mini_config_path).with_overrides(
        output_dir=tmp_path_factory.mktemp("mini-runs")
    )
    return run_pipeline(config)
