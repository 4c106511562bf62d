# Copyright 2026 Canonical Ltd.
# See LICENSE file for licensing details.

"""Tests for the synthetic corpus generator."""

import numpy as np
import pandas as pd
import pytest

from aesthetics.corpus import load_corpus, validate_corpus
from aesthetics.pipeline import fit_alignment_models, read_json, style_correlation
from aesthetics.ranking import bt_scores_frame, fit_styles
from aesthetics.report import bigram_frequencies
from aesthetics.semantics import alignment_frame, alignment_scores
from aesthetics.synth import (
    AERODYNAMIC_KEY_PHRASE,
    SynthError,
    generate_corpus,
    planted_slopes,
)


@pytest.fixture(scope="module")
def paper_dir(tmp_path_factory):
    return generate_corpus(tmp_path_factory.mktemp("paper"), preset="paper", seed=1).parent


@pytest.fixture(scope="module")
def paper_corpus(paper_dir):
    return load_corpus(paper_dir / "corpus.json")


def test_planted_slopes():
    slopes = planted_slopes(("sporty", "classic", "rugged", "modern", "elegant"))
    assert slopes == {"sporty": 1.0, "classic": -1.0, "rugged": 1.0, "modern": 1.0, "elegant": 0.0}


def test_generation_is_deterministic(tmp_path):
    first = generate_corpus(tmp_path / "first", seed=3).parent
    second = generate_corpus(tmp_path / "second", seed=3).parent

    names = sorted(p.relative_to(first) for p in first.rglob("*") if p.is_file())
    assert names == sorted(p.relative_to(second) for p in second.rglob("*") if p.is_file())
    for name in names:
        assert (first / name).read_bytes() == (second / name).read_bytes()


def test_unknown_preset(tmp_path):
    with pytest.raises(SynthError):
        generate_corpus(tmp_path, preset="huge")


def test_scores_track_planted_strengths(mini_config_path, mini_run):
    truth = read_json(mini_config_path.parent / "truth.json")
    bt_scores = pd.read_csv(mini_run / "bt" / "bt_scores.csv")

    for style, strengths in truth["strengths"].items():
        scores = bt_scores[bt_scores["style"] == style].set_index("stimulus_id")["bt_score"]
        planted = pd.Series(strengths)[scores.index]
        assert np.corrcoef(planted, scores)[0, 1] > 0.7


def test_alignment_slope_signs_recovered(mini_config_path, mini_run):
    slopes = read_json(mini_config_path.parent / "truth.json")["alignment_slopes"]
    coefficients = pd.read_csv(mini_run / "regression" / "coefficients.csv")
    alignment = coefficients[
        (coefficients["family"] == "alignment") & (coefficients["feature"] == "mean_cosine")
    ].set_index("style")

    for style, slope in slopes.items():
        if slope != 0:
            assert np.sign(alignment.loc[style, "beta"]) == np.sign(slope)


def test_paper_corpus_shape(paper_corpus):
    report = validate_corpus(paper_corpus)

    assert report.issues == []
    assert len(paper_corpus.stimuli) == 80
    assert len(paper_corpus.styles) == 9
    assert len(paper_corpus.feature_vectors) == 1000
    assert len(paper_corpus.responses) == 9 * 80


def test_air_flow_leads_aerodynamic_bigrams(paper_corpus):
    frequencies = bigram_frequencies(paper_corpus.responses, "aerodynamic")
    assert frequencies[0] == (AERODYNAMIC_KEY_PHRASE, 80)


def test_classic_and_futuristic_scores_anticorrelate(paper_corpus):
    styles = ("classic", "futuristic")
    results = fit_styles(paper_corpus.judgments, paper_corpus.stimulus_ids, styles)

    correlation = style_correlation(bt_scores_frame(results), styles)

    assert correlation.loc["classic", "futuristic"] < -0.7


def test_interaction_model_recovers_planted_slopes(paper_dir, paper_corpus):
    planted = read_json(paper_dir / "truth.json")["alignment_slopes"]
    styles = list(paper_corpus.styles)
    alignment = alignment_frame(
        alignment_scores(
            paper_corpus.caption_embeddings(),
            paper_corpus.responses,
            styles,
            stimulus_ids=paper_corpus.stimulus_ids,
        )
    )
    results = fit_styles(paper_corpus.judgments, paper_corpus.stimulus_ids, styles)

    models = fit_alignment_models(alignment, bt_scores_frame(results), styles)

    fitted = models.slopes()
    signed = {style: slope for style, slope in planted.items() if slope != 0}
    assert len(signed) == 4
    for style, slope in signed.items():
        assert np.sign(fitted[style]) == np.sign(slope)
    assert models.f_test.df1 == len(styles) - 1
    assert models.f_test.p < 0.01
