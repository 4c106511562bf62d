# Copyright 2026 Canonical Ltd.
# See LICENSE file for licensing details.

"""Tests for corpus loading, aggregation and validation."""

import json
from contextlib import nullcontext
from pathlib import Path

import pytest

from aesthetics.corpus import (
    AnnotationRecord,
    Corpus,
    CorpusError,
    DimensionMismatchError,
    DuplicateIdError,
    EmptyInputError,
    IncompleteAnnotationsError,
    InvalidValueError,
    Judgment,
    MissingColumnError,
    MixedValueKindsError,
    NonFiniteValueError,
    SelfComparisonError,
    Stimulus,
    UnknownStimulusError,
    UnknownStyleError,
    Winner,
    aggregate_annotations,
    content_hash,
    load_annotations,
    load_captions,
    load_corpus,
    load_embeddings,
    load_judgments,
    pair_counts,
    parse_annotation_value,
    validate_corpus,
    write_corpus,
)
from tests.conftest import FIXTURES


def _write(path: Path, text: str) -> Path:
    path.write_text(text)
    return path


def _judgment(left, right, winner="Left", style="sporty", judge="j1"):
    return Judgment(judge, style, left, right, Winner(winner))


def _corpus(ids, judgments=(), styles=("sporty",), **kwargs):
    return Corpus(
        styles=tuple(styles),
        embedding_dim=3,
        stimuli=tuple(Stimulus(i, Path(f"{i}.png")) for i in ids),
        judgments=tuple(judgments),
        **kwargs,
    )


def test_load_judgments_normalizes_style_and_winner():
    judgments = load_judgments(FIXTURES / "judgments.csv", styles=("sporty", "rugged"))

    assert len(judgments) == 5
    assert judgments[3].style == "sporty"
    assert judgments[3].winner is Winner.RIGHT
    assert (judgments[2].winner_id, judgments[2].loser_id) == ("a", "c")


@pytest.mark.parametrize(
    "row, styles, stimulus_ids, context_raised",
    (
        ("j1,sporty,a,b,Left", ("sporty",), None, nullcontext()),
        ("j1,sporty,a,a,Left", ("sporty",), None, pytest.raises(SelfComparisonError)),
        ("j1,retro,a,b,Left", ("sporty",), None, pytest.raises(UnknownStyleError)),
        ("j1,sporty,a,b,Draw", ("sporty",), None, pytest.raises(InvalidValueError)),
        ("j1,sporty,a,z,Left", ("sporty",), ("a", "b"), pytest.raises(UnknownStimulusError)),
    ),
)
def test_load_judgments_rejects_bad_rows(tmp_path, row, styles, stimulus_ids, context_raised):
    path = _write(tmp_path / "j.csv", f"judge_id,style,left_id,right_id,winner\n{row}\n")
    with context_raised:
        judgments = load_judgments(path, styles=styles, stimulus_ids=stimulus_ids)
        assert len(judgments) == 1


def test_load_judgments_names_missing_column(tmp_path):
    path = _write(tmp_path / "j.csv", "judge_id,style,left_id,winner\nj1,sporty,a,Left\n")
    with pytest.raises(MissingColumnError) as raised:
        load_judgments(path)
    assert raised.value.column == "right_id"


@pytest.mark.parametrize(
    "raw, expected",
    (("TRUE", True), ("false", False), ("5", 5), ("Split", "split"), (" none ", "none")),
)
def test_parse_annotation_value(raw, expected):
    assert parse_annotation_value(raw) == expected


def test_parse_annotation_value_rejects_unknown():
    with pytest.raises(InvalidValueError):
        parse_annotation_value("maybe")


def test_aggregate_annotations_from_fixture():
    table = aggregate_annotations(load_annotations(FIXTURES / "annotations.csv"))

    assert list(table.index) == ["s1", "s2"]
    assert list(table.columns) == ["directional", "spokes", "split_type"]
    assert table.loc["s1", "directional"] == pytest.approx(2 / 3)
    assert table.loc["s2", "directional"] == 0.0
    assert table.loc["s1", "spokes"] == 5
    # 4 and 6 tie; the smaller count wins
    assert table.loc["s2", "spokes"] == 4
    # single and split tie; single comes first in category order
    assert table.loc["s1", "split_type"] == "single"
    assert table.loc["s2", "split_type"] == "none"


@pytest.mark.parametrize(
    "records, context_raised",
    (
        ([], pytest.raises(EmptyInputError)),
        (
            [
                AnnotationRecord("a1", "s1", "spokes", 5),
                AnnotationRecord("a2", "s1", "spokes", True),
            ],
            pytest.raises(MixedValueKindsError),
        ),
        (
            [
                AnnotationRecord("a1", "s1", "offset", True),
                AnnotationRecord("a1", "s2", "spokes", 4),
            ],
            pytest.raises(IncompleteAnnotationsError),
        ),
        ([AnnotationRecord("a1", "s1", "offset", True)], nullcontext()),
    ),
)
def test_aggregate_annotations_errors(records, context_raised):
    with context_raised:
        table = aggregate_annotations(records)
        assert table.loc["s1", "offset"] == 1.0


@pytest.mark.parametrize(
    "payload, context_raised",
    (
        ('{"a": [1, 0, 0], "b": [0, 1, 0]}', nullcontext()),
        ('{"a": [1, 0, 0], "a": [0, 1, 0]}', pytest.raises(DuplicateIdError)),
        ('{"a": [1, NaN, 0]}', pytest.raises(NonFiniteValueError)),
        ('{"a": [1, 0]}', pytest.raises(DimensionMismatchError)),
        ('{"a": [1, "x", 0]}', pytest.raises(InvalidValueError)),
        ("[[1, 0, 0]]", pytest.raises(InvalidValueError)),
    ),
)
def test_load_embeddings(tmp_path, payload, context_raised):
    path = _write(tmp_path / "e.json", payload)
    with context_raised:
        vectors = load_embeddings(path, expected_dim=3)
        assert sorted(vectors) == ["a", "b"]
        assert vectors["a"].tolist() == [1.0, 0.0, 0.0]


def test_load_captions_missing_file_is_empty(tmp_path):
    assert load_captions(tmp_path / "nothing.jsonl") == {}


def test_load_captions_rejects_duplicates(tmp_path):
    record = json.dumps({"id": "a", "caption": "a wheel"})
    path = _write(tmp_path / "c.jsonl", f"{record}\n{record}\n")
    with pytest.raises(DuplicateIdError):
        load_captions(path)


@pytest.mark.parametrize(
    "line",
    ('{"id": "a", "caption": ', '["a", "a wheel"]', "not json"),
)
def test_load_captions_rejects_malformed_lines(tmp_path, line):
    path = _write(tmp_path / "c.jsonl", json.dumps({"id": "b", "caption": "x"}) + f"\n{line}\n")
    with pytest.raises(InvalidValueError, match=r"c\.jsonl:2"):
        load_captions(path)


def _manifest(tmp_path, feature_vectors, **extra):
    _write(tmp_path / "stimuli.csv", "id,image_path\ns1,s1.png\n")
    _write(tmp_path / "vectors.json", feature_vectors)
    manifest = {"styles": ["sporty"], "stimuli": "stimuli.csv", "feature_vectors": "vectors.json"}
    return _write(tmp_path / "corpus.json", json.dumps({**manifest, **extra}))


@pytest.mark.parametrize(
    "feature_vectors, extra, context_raised",
    (
        ('{"p1": [1, 2], "p2": [3, 4]}', {}, nullcontext()),
        ('{"p1": [1, 2], "p2": [3, 4]}', {"feature_vector_dim": 2}, nullcontext()),
        ('{"p1": [1, 2], "p2": [3]}', {}, pytest.raises(DimensionMismatchError)),
        ("{}", {}, pytest.raises(EmptyInputError)),
        ("{}", {"feature_vector_dim": 2}, pytest.raises(EmptyInputError)),
    ),
)
def test_load_corpus_feature_vectors(tmp_path, feature_vectors, extra, context_raised):
    path = _manifest(tmp_path, feature_vectors, **extra)
    with context_raised:
        corpus = load_corpus(path)
        assert corpus.feature_vectors == {"p1": (1.0, 2.0), "p2": (3.0, 4.0)}
    assert issubclass(EmptyInputError, CorpusError)


def test_content_hash_is_sha256_hex():
    assert content_hash("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"


def test_pair_counts_ignores_side():
    counts = pair_counts([_judgment("a", "b"), _judgment("b", "a", "Right"), _judgment("a", "c")])
    assert counts == {("sporty", "a", "b"): 2, ("sporty", "a", "c"): 1}


def test_validate_corpus_clean():
    corpus = _corpus("abc", [_judgment("a", "b"), _judgment("b", "c"), _judgment("c", "a")])

    report = validate_corpus(corpus)

    assert report.ok
    assert report.findings == []
    assert report.coverage["n_compared_pairs"] == 3
    assert report.coverage["ratings_per_pair_mean"] == 1.0


def test_validate_corpus_reports_problems(caplog):
    corpus = _corpus(
        "abcd",
        [_judgment("a", "b"), _judgment("c", "d"), _judgment("a", "zz")],
        annotations=(AnnotationRecord("a1", "a", "sparkle", True),),
    )

    report = validate_corpus(corpus)

    kinds = sorted(finding.kind for finding in report.issues)
    assert kinds == ["DisconnectedGraph", "UnknownFeature", "UnknownStimulus"]
    assert not report.ok
    assert "Validation DisconnectedGraph" in caplog.text


def test_validate_corpus_checks_declared_features():
    corpus = _corpus(
        "ab",
        [_judgment("a", "b"), _judgment("b", "a")],
        designer_features=("directional", "sparkle"),
        annotations=(
            AnnotationRecord("a1", "a", "sparkle", True),
            AnnotationRecord("a1", "a", "directional", False),
            AnnotationRecord("a1", "a", "offset", True),
        ),
    )

    report = validate_corpus(corpus)

    assert [(f.kind, f.message) for f in report.issues] == [
        ("UnknownFeature", "Annotations use undeclared feature 'offset'")
    ]


def test_validate_corpus_warns_on_short_captions():
    stimuli = (Stimulus("a", Path("a.png"), caption="too short"), Stimulus("b", Path("b.png")))
    corpus = Corpus(styles=("sporty",), embedding_dim=3, stimuli=stimuli)

    report = validate_corpus(corpus)

    assert report.ok
    assert [finding.kind for finding in report.warnings] == ["CaptionLength"]


def test_validate_corpus_flags_bad_embeddings():
    stimuli = (Stimulus("a", Path("a.png"), embedding=(1.0, 0.0)),)
    report = validate_corpus(Corpus(styles=("sporty",), embedding_dim=3, stimuli=stimuli))
    assert [finding.kind for finding in report.issues] == ["InvalidEmbedding"]


def test_synthetic_corpus_is_valid(mini_config):
    corpus = load_corpus(mini_config.corpus)

    report = validate_corpus(corpus)

    assert report.issues == []
    assert len(corpus.stimuli) == 12
    assert corpus.styles == ("sporty", "rugged", "classic")
    assert all(s.embedding is not None for s in corpus.stimuli)
    assert all(r.embedding is not None for r in corpus.responses)


def test_corpus_diff(mini_config):
    corpus = load_corpus(mini_config.corpus)
    again = load_corpus(mini_config.corpus)
    assert corpus.diff(again) == {}

    changed = Corpus(
        styles=corpus.styles,
        embedding_dim=corpus.embedding_dim,
        stimuli=corpus.stimuli,
        judgments=corpus.judgments[1:],
    )
    assert corpus.diff(changed) != {}


def test_write_corpus_reloads_unchanged(mini_config, tmp_path):
    corpus = load_corpus(mini_config.corpus)

    manifest_path = write_corpus(corpus, tmp_path / "copy")
    again = load_corpus(manifest_path)

    assert corpus.diff(again) == {}
    assert again.designer_features == corpus.designer_features
    assert again.feature_vectors == corpus.feature_vectors
    assert validate_corpus(again).issues == []
