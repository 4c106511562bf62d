# Copyright 2026 Canonical Ltd.
# See LICENSE file for licensing details.

"""Tests for the command line interface."""

from pathlib import Path

import pytest
from typer.testing import CliRunner

from aesthetics.cli import app

runner = CliRunner()


@pytest.fixture
def corpus_dir(tmp_path):
    result = runner.invoke(app, ["synth", str(tmp_path / "corpus"), "--seed", "2"])
    assert result.exit_code == 0, result.output
    return tmp_path / "corpus"


def test_synth_prints_config_path(corpus_dir):
    assert (corpus_dir / "config.yaml").exists()
    assert (corpus_dir / "truth.json").exists()


def test_synth_unknown_preset(tmp_path):
    result = runner.invoke(app, ["synth", str(tmp_path), "--preset", "huge"])
    assert result.exit_code == 1


def test_run_selected_stages(corpus_dir, tmp_path):
    result = runner.invoke(
        app,
        [
            "run",
            "--config",
            str(corpus_dir / "config.yaml"),
            "--stage",
            "validate",
            "--stage",
            "fit-bt",
            "--out",
            str(tmp_path / "runs"),
            "--seed",
            "5",
        ],
    )

    assert result.exit_code == 0, result.output
    run_dir = Path(result.output.strip().splitlines()[-1])
    assert run_dir == tmp_path / "runs" / "run-seed5"
    assert (run_dir / "bt" / "bt_scores.csv").exists()
    assert not (run_dir / "features").exists()


def test_stage_command_fails_without_prerequisites(corpus_dir, tmp_path):
    result = runner.invoke(
        app, ["regress", "--config", str(corpus_dir / "config.yaml"), "--out", str(tmp_path)]
    )
    assert result.exit_code == 1


def test_missing_config_fails(tmp_path):
    result = runner.invoke(app, ["validate", "--config", str(tmp_path / "absent.yaml")])
    assert result.exit_code == 1


def test_bigrams(corpus_dir, tmp_path):
    result = runner.invoke(
        app, ["bigrams", "--config", str(corpus_dir / "config.yaml"), "--out", str(tmp_path)]
    )

    assert result.exit_code == 0, result.output
    written = sorted(p.name for p in (tmp_path / "run-seed2" / "bigrams").glob("*.csv"))
    assert written == ["classic.csv", "rugged.csv", "sporty.csv"]


def test_sample(corpus_dir, tmp_path):
    result = runner.invoke(
        app, ["sample", "--config", str(corpus_dir / "config.yaml"), "--out", str(tmp_path)]
    )

    assert result.exit_code == 0, result.output
    selected = (tmp_path / "run-seed2" / "sampling" / "selected_ids.txt").read_text().split()
    assert len(selected) == 4
    assert len(set(selected)) == 4


def test_captions_and_embed_with_stub_provider(corpus_dir):
    (corpus_dir / "captions.jsonl").unlink()
    (corpus_dir / "caption_embeddings.json").unlink()
    config = str(corpus_dir / "config.yaml")

    assert runner.invoke(app, ["captions", "--config", config]).exit_code == 0
    assert runner.invoke(app, ["embed", "--config", config]).exit_code == 0

    assert len((corpus_dir / "captions.jsonl").read_text().splitlines()) == 12
    assert (corpus_dir / "caption_embeddings.json").exists()
