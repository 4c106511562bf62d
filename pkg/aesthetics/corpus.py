# Copyright 2026 Canonical Ltd.
# See LICENSE file for licensing details.

"""Data model, file ingestion, validation and persistence for a stimulus corpus.

A corpus is described by a manifest (YAML or JSON) that names the files holding stimuli,
pairwise judgments, feature annotations, captions, survey responses and embeddings, plus the
configured style keywords and the embedding dimension D. Loaders are all-or-nothing: a single
bad row fails the whole file.
"""

import hashlib
import json
import logging
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import yaml
from deepdiff import DeepDiff

logger = logging.getLogger(__name__)

DEFAULT_STYLES = (
    "aerodynamic",
    "classic",
    "dynamic",
    "elegant",
    "futuristic",
    "luxurious",
    "rugged",
    "sleek",
    "sporty",
)
DEFAULT_EMBEDDING_DIM = 384

BOOLEAN_FEATURES = (
    "directional",
    "doublesplit",
    "triplesplit",
    "vsplit",
    "ysplit",
    "complexsplit",
    "offset",
    "doublestacked",
    "hollowed",
    "indented",
)
COUNT_FEATURES = ("spokes",)
SPLIT_TYPES = ("none", "single", "split")
CATEGORICAL_FEATURES = {"split_type": SPLIT_TYPES}
FEATURE_REGISTRY = BOOLEAN_FEATURES + COUNT_FEATURES + tuple(CATEGORICAL_FEATURES)

JUDGMENT_COLUMNS = ("judge_id", "style", "left_id", "right_id", "winner")
ANNOTATION_COLUMNS = ("annotator_id", "stimulus_id", "feature", "value")
STIMULUS_COLUMNS = ("id", "image_path")
RESPONSE_COLUMNS = ("respondent_id", "style", "text")

CAPTION_MIN_WORDS = 20
CAPTION_MAX_WORDS = 400

AnnotationValue = Union[bool, int, str]


class CorpusError(Exception):
    """Base class for every corpus ingestion and validation failure."""


class MissingColumnError(CorpusError):
    """Raised if a CSV file lacks a required column."""

    def __init__(self, msg: str, column: str, path: Optional[Path] = None):
        super().__init__(msg)
        self.column = column
        self.path = path


class UnknownStyleError(CorpusError):
    """Raised if a row names a style keyword outside the configured set."""

    def __init__(self, msg: str, style: str):
        super().__init__(msg)
        self.style = style


class SelfComparisonError(CorpusError):
    """Raised if a judgment compares a stimulus against itself."""


class UnknownStimulusError(CorpusError):
    """Raised if a record references a stimulus id that is not in the corpus."""

    def __init__(self, msg: str, stimulus_id: str):
        super().__init__(msg)
        self.stimulus_id = stimulus_id


class InvalidValueError(CorpusError):
    """Raised if a field cannot be parsed into its declared type."""


class EmptyInputError(CorpusError):
    """Raised if an aggregation receives no records."""


class MixedValueKindsError(CorpusError):
    """Raised if one feature name carries values of different kinds."""

    def __init__(self, msg: str, feature: str):
        super().__init__(msg)
        self.feature = feature


class IncompleteAnnotationsError(CorpusError):
    """Raised if an annotated stimulus has no record for a boolean feature."""


class DimensionMismatchError(CorpusError):
    """Raised if a vector does not have the expected dimension."""

    def __init__(self, msg: str, key: str, expected: int, actual: int):
        super().__init__(msg)
        self.key = key
        self.expected = expected
        self.actual = actual


class NonFiniteValueError(CorpusError):
    """Raised if a vector contains NaN or infinity."""


class DuplicateIdError(CorpusError):
    """Raised if an id occurs twice where ids must be unique."""

    def __init__(self, msg: str, key: str):
        super().__init__(msg)
        self.key = key


class Winner(str, Enum):
    """Side chosen in a pairwise judgment."""

    LEFT = "Left"
    RIGHT = "Right"


@dataclass(frozen=True)
class Stimulus:
    """One product image plus its caption and caption embedding, when known."""

    id: str
    image_path: Path
    caption: Optional[str] = None
    embedding: Optional[Tuple[float, ...]] = None


@dataclass(frozen=True)
class Judgment:
    """One pairwise choice made by one judge for one style keyword."""

    judge_id: str
    style: str
    left_id: str
    right_id: str
    winner: Winner

    @property
    def winner_id(self) -> str:
        return self.left_id if self.winner is Winner.LEFT else self.right_id

    @property
    def loser_id(self) -> str:
        return self.right_id if self.winner is Winner.LEFT else self.left_id


@dataclass(frozen=True)
class AnnotationRecord:
    """One annotator's answer for one designer-informed feature of one stimulus."""

    annotator_id: str
    stimulus_id: str
    feature_name: str
    value: AnnotationValue


@dataclass(frozen=True)
class ResponseText:
    """A free-text answer describing the visual criteria used for a style keyword."""

    respondent_id: str
    style: str
    text: str
    embedding: Optional[Tuple[float, ...]] = None


@dataclass(frozen=True)
class Finding:
    """A single problem found by validate_corpus."""

    kind: str
    message: str
    severity: str = "error"
    style: Optional[str] = None
    stimulus_id: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "message": self.message,
            "severity": self.severity,
            "style": self.style,
            "stimulus_id": self.stimulus_id,
        }


@dataclass
class ValidationReport:
    """Findings and coverage statistics for a corpus. Never mutates the corpus."""

    findings: List[Finding] = field(default_factory=list)
    coverage: Dict[str, object] = field(default_factory=dict)

    @property
    def issues(self) -> List[Finding]:
        """Findings that make the corpus unfit for analysis."""
        return [finding for finding in self.findings if finding.severity == "error"]

    @property
    def warnings(self) -> List[Finding]:
        return [finding for finding in self.findings if finding.severity == "warning"]

    @property
    def ok(self) -> bool:
        return not self.issues

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "findings": [finding.to_dict() for finding in self.findings],
            "coverage": self.coverage,
        }


@dataclass(frozen=True)
class Corpus:
    """An immutable, fully loaded corpus."""

    styles: Tuple[str, ...]
    embedding_dim: int
    stimuli: Tuple[Stimulus, ...]
    judgments: Tuple[Judgment, ...] = ()
    annotations: Tuple[AnnotationRecord, ...] = ()
    responses: Tuple[ResponseText, ...] = ()
    designer_features: Tuple[str, ...] = FEATURE_REGISTRY
    feature_vectors: Optional[Mapping[str, Tuple[float, ...]]] = None

    @property
    def stimulus_ids(self) -> List[str]:
        return [stimulus.id for stimulus in self.stimuli]

    def stimulus(self, stimulus_id: str) -> Stimulus:
        for stimulus in self.stimuli:
            if stimulus.id == stimulus_id:
                return stimulus
        raise UnknownStimulusError(f"No stimulus with id '{stimulus_id}'", stimulus_id)

    def judgments_for(self, style: str) -> List[Judgment]:
        return [judgment for judgment in self.judgments if judgment.style == style]

    def caption_embeddings(self) -> Dict[str, np.ndarray]:
        return {
            stimulus.id: np.asarray(stimulus.embedding, dtype=float)
            for stimulus in self.stimuli
            if stimulus.embedding is not None
        }

    def diff(self, other: "Corpus") -> dict:
        """Returns a field-by-field diff against another corpus, in DeepDiff format."""
        return DeepDiff(_corpus_to_plain(self), _corpus_to_plain(other), ignore_order=False)


def content_hash(text: str) -> str:
    """Returns the sha256 hex digest used to key response embeddings."""
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _read_csv(path: Union[str, Path], columns: Sequence[str]) -> pd.DataFrame:
    path = Path(path)
    frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    for column in columns:
        if column not in frame.columns:
            raise MissingColumnError(
                f"File '{path}' is missing required column '{column}'", column, path
            )
    return frame


def _check_style(style: str, styles: Optional[Iterable[str]], where: str) -> str:
    style = style.strip().lower()
    if styles is not None and style not in styles:
        raise UnknownStyleError(f"{where}: style '{style}' is not a configured keyword", style)
    return style


def load_judgments(
    path: Union[str, Path],
    styles: Optional[Iterable[str]] = None,
    stimulus_ids: Optional[Iterable[str]] = None,
) -> List[Judgment]:
    """Loads pairwise judgments from a CSV file.

    Args:
        path: CSV file with header `judge_id,style,left_id,right_id,winner`.
        styles: configured style keywords; rows with any other style fail the load.
        stimulus_ids: when given, every referenced id must be one of these.

    Returns:
        One Judgment per row, in file order.
    """
    frame = _read_csv(path, JUDGMENT_COLUMNS)
    styles = None if styles is None else set(styles)
    known = None if stimulus_ids is None else set(stimulus_ids)
    judgments = []
    for line, row in enumerate(frame.itertuples(index=False), start=2):
        where = f"{path}:{line}"
        style = _check_style(row.style, styles, where)
        left_id, right_id = row.left_id.strip(), row.right_id.strip()
        if left_id == right_id:
            raise SelfComparisonError(f"{where}: stimulus '{left_id}' is compared with itself")
        if known is not None:
            for stimulus_id in (left_id, right_id):
                if stimulus_id not in known:
                    raise UnknownStimulusError(
                        f"{where}: unknown stimulus '{stimulus_id}'", stimulus_id
                    )
        try:
            winner = Winner(row.winner.strip().capitalize())
        except ValueError:
            raise InvalidValueError(f"{where}: winner must be Left or Right, got '{row.winner}'")
        judgments.append(Judgment(row.judge_id.strip(), style, left_id, right_id, winner))
    logger.debug(f"Loaded {len(judgments)} judgments from {path}")
    return judgments


def write_judgments(judgments: Iterable[Judgment], path: Union[str, Path]) -> None:
    """Writes judgments as CSV with the columns load_judgments expects."""
    rows = [
        (j.judge_id, j.style, j.left_id, j.right_id, j.winner.value) for j in judgments
    ]
    pd.DataFrame(rows, columns=JUDGMENT_COLUMNS).to_csv(path, index=False, lineterminator="\n")


def parse_annotation_value(raw: str) -> AnnotationValue:
    """Parses TRUE/FALSE, a non-negative integer, or a split-type category."""
    text = raw.strip()
    if text.upper() in ("TRUE", "FALSE"):
        return text.upper() == "TRUE"
    if text.isdigit():
        return int(text)
    if text.lower() in SPLIT_TYPES:
        return text.lower()
    raise InvalidValueError(f"Cannot parse annotation value '{raw}'")


def format_annotation_value(value: AnnotationValue) -> str:
    """Renders a value the way annotation CSVs spell it (TRUE/FALSE for booleans)."""
    if isinstance(value, bool):
        return "TRUE" if value else "FALSE"
    return str(value)


def load_annotations(path: Union[str, Path]) -> List[AnnotationRecord]:
    """Loads per-annotator feature values from CSV."""
    frame = _read_csv(path, ANNOTATION_COLUMNS)
    records = []
    for line, row in enumerate(frame.itertuples(index=False), start=2):
        try:
            value = parse_annotation_value(row.value)
        except InvalidValueError as e:
            raise InvalidValueError(f"{path}:{line}: {e}")
        if isinstance(value, int) and not isinstance(value, bool) and value < 0:
            raise InvalidValueError(f"{path}:{line}: spoke counts must be >= 0")
        records.append(
            AnnotationRecord(
                row.annotator_id.strip(), row.stimulus_id.strip(), row.feature.strip(), value
            )
        )
    return records


def write_annotations(records: Iterable[AnnotationRecord], path: Union[str, Path]) -> None:
    """Writes annotation records as CSV."""
    rows = [
        (r.annotator_id, r.stimulus_id, r.feature_name, format_annotation_value(r.value))
        for r in records
    ]
    pd.DataFrame(rows, columns=ANNOTATION_COLUMNS).to_csv(path, index=False, lineterminator="\n")


def _value_kind(value: AnnotationValue) -> str:
    if isinstance(value, bool):
        return "boolean"
    if isinstance(value, int):
        return "count"
    return "category"


def _modal_count(values: List[int]) -> int:
    counts = Counter(values)
    top = max(counts.values())
    return min(value for value, count in counts.items() if count == top)


def _modal_category(values: List[str]) -> str:
    counts = Counter(values)
    top = max(counts.values())
    return next(category for category in SPLIT_TYPES if counts.get(category, 0) == top)


def aggregate_annotations(records: Sequence[AnnotationRecord]) -> pd.DataFrame:
    """Aggregates multi-annotator records into one feature row per stimulus.

    Boolean features become the proportion of TRUE answers. Counts become the modal value,
    ties going to the smaller count. Split type becomes the modal category, ties broken by the
    order none < single < split.

    Returns:
        DataFrame indexed by stimulus id (sorted), one column per feature in registry order
        followed by any unregistered feature names in sorted order.
    """
    if not records:
        raise EmptyInputError("No annotation records to aggregate")

    kinds: Dict[str, str] = {}
    grouped: Dict[Tuple[str, str], list] = defaultdict(list)
    for record in records:
        kind = _value_kind(record.value)
        previous = kinds.setdefault(record.feature_name, kind)
        if previous != kind:
            raise MixedValueKindsError(
                f"Feature '{record.feature_name}' has both {previous} and {kind} values",
                record.feature_name,
            )
        grouped[(record.stimulus_id, record.feature_name)].append(record.value)

    stimulus_ids = sorted({record.stimulus_id for record in records})
    registered = [name for name in FEATURE_REGISTRY if name in kinds]
    columns = registered + sorted(name for name in kinds if name not in FEATURE_REGISTRY)

    rows = []
    for stimulus_id in stimulus_ids:
        row = {}
        for name in columns:
            values = grouped.get((stimulus_id, name))
            if not values:
                if kinds[name] == "boolean":
                    raise IncompleteAnnotationsError(
                        f"Stimulus '{stimulus_id}' has no record for boolean feature '{name}'"
                    )
                row[name] = None
                continue
            if kinds[name] == "boolean":
                row[name] = sum(1 for value in values if value) / len(values)
            elif kinds[name] == "count":
                row[name] = _modal_count(values)
            else:
                row[name] = _modal_category(values)
        rows.append(row)

    table = pd.DataFrame(rows, index=pd.Index(stimulus_ids, name="stimulus_id"), columns=columns)
    logger.info(f"Aggregated {len(records)} annotations into {len(table)} feature rows")
    return table


def _reject_duplicates(pairs):
    result = {}
    for key, value in pairs:
        if key in result:
            raise DuplicateIdError(f"Duplicate id '{key}' in JSON object", key)
        result[key] = value
    return result


def _reject_constant(token: str):
    raise NonFiniteValueError(f"Non-finite value '{token}' is not allowed")


def load_embeddings(
    path: Union[str, Path], expected_dim: Optional[int] = None
) -> Dict[str, np.ndarray]:
    """Loads a JSON object mapping ids to vectors of length expected_dim.

    Without expected_dim every vector must have the length of the first one.
    """
    with open(path) as f:
        data = json.load(f, object_pairs_hook=_reject_duplicates, parse_constant=_reject_constant)
    if not isinstance(data, dict):
        raise InvalidValueError(f"Embeddings file '{path}' must hold a JSON object")

    vectors = {}
    for key, values in data.items():
        if not isinstance(values, list) or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in values
        ):
            raise InvalidValueError(f"Embedding for '{key}' must be an array of numbers")
        if expected_dim is None:
            expected_dim = len(values)
        if len(values) != expected_dim:
            raise DimensionMismatchError(
                f"Embedding for '{key}' has length {len(values)}, expected {expected_dim}",
                key,
                expected_dim,
                len(values),
            )
        vector = np.asarray(values, dtype=float)
        if not np.all(np.isfinite(vector)):
            raise NonFiniteValueError(f"Embedding for '{key}' contains non-finite values")
        vectors[key] = vector
    return vectors


def write_embeddings(vectors: Mapping[str, Sequence[float]], path: Union[str, Path]) -> None:
    """Writes id-keyed vectors as JSON with keys sorted."""
    payload = {key: [float(v) for v in vectors[key]] for key in sorted(vectors)}
    with open(path, "w") as f:
        json.dump(payload, f, indent=1, sort_keys=True, allow_nan=False)
        f.write("\n")


def load_captions(path: Union[str, Path]) -> Dict[str, str]:
    """Loads captions from JSON Lines records of the form {"id": ..., "caption": ...}."""
    captions: Dict[str, str] = {}
    path = Path(path)
    if not path.exists():
        return captions
    with open(path) as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as e:
                raise InvalidValueError(f"{path}:{line_no}: invalid JSON: {e.msg}") from e
            if not isinstance(record, dict):
                raise InvalidValueError(f"{path}:{line_no}: expected a JSON object")
            try:
                stimulus_id, caption = str(record["id"]), str(record["caption"])
            except KeyError as e:
                raise MissingColumnError(f"{path}:{line_no}: missing key {e}", str(e), path)
            if stimulus_id in captions:
                raise DuplicateIdError(f"{path}:{line_no}: duplicate caption id", stimulus_id)
            captions[stimulus_id] = caption
    return captions


def write_captions(captions: Mapping[str, str], path: Union[str, Path]) -> None:
    """Writes captions as JSON lines, one {"id", "caption"} object per stimulus."""
    with open(path, "w") as f:
        for stimulus_id in sorted(captions):
            f.write(json.dumps({"id": stimulus_id, "caption": captions[stimulus_id]}) + "\n")


def load_stimuli(path: Union[str, Path], base_dir: Optional[Path] = None) -> List[Stimulus]:
    """Loads the stimulus table. Image paths resolve against base_dir."""
    frame = _read_csv(path, STIMULUS_COLUMNS)
    base_dir = Path(base_dir) if base_dir is not None else Path(path).parent
    seen = set()
    stimuli = []
    for row in frame.itertuples(index=False):
        stimulus_id = row.id.strip()
        if not stimulus_id:
            raise InvalidValueError(f"{path}: stimulus ids must be nonempty")
        if stimulus_id in seen:
            raise DuplicateIdError(f"{path}: duplicate stimulus id '{stimulus_id}'", stimulus_id)
        seen.add(stimulus_id)
        image_path = Path(row.image_path)
        if not image_path.is_absolute():
            image_path = base_dir / image_path
        stimuli.append(Stimulus(stimulus_id, image_path))
    return stimuli


def load_responses(
    path: Union[str, Path], styles: Optional[Iterable[str]] = None
) -> List[ResponseText]:
    """Loads free-text responses, optionally checking their styles."""
    frame = _read_csv(path, RESPONSE_COLUMNS)
    styles = None if styles is None else set(styles)
    responses = []
    for line, row in enumerate(frame.itertuples(index=False), start=2):
        style = _check_style(row.style, styles, f"{path}:{line}")
        if not row.text.strip():
            raise InvalidValueError(f"{path}:{line}: response text must be nonempty")
        responses.append(ResponseText(row.respondent_id.strip(), style, row.text))
    return responses


def write_responses(responses: Iterable[ResponseText], path: Union[str, Path]) -> None:
    """Writes responses as CSV."""
    rows = [(r.respondent_id, r.style, r.text) for r in responses]
    pd.DataFrame(rows, columns=RESPONSE_COLUMNS).to_csv(path, index=False, lineterminator="\n")


@dataclass(frozen=True)
class CorpusManifest:
    """File paths and settings named by a corpus manifest, resolved to absolute paths."""

    path: Path
    styles: Tuple[str, ...]
    embedding_dim: int
    stimuli: Path
    judgments: Optional[Path] = None
    annotations: Optional[Path] = None
    captions: Optional[Path] = None
    caption_embeddings: Optional[Path] = None
    responses: Optional[Path] = None
    response_embeddings: Optional[Path] = None
    feature_vectors: Optional[Path] = None
    feature_vector_dim: Optional[int] = None
    designer_features: Tuple[str, ...] = FEATURE_REGISTRY

    @classmethod
    def load(cls, path: Union[str, Path]) -> "CorpusManifest":
        """Loads a YAML or JSON manifest. Relative paths resolve against its directory."""
        path = Path(path)
        with open(path) as f:
            data = yaml.safe_load(f) or {}
        if "stimuli" not in data:
            raise MissingColumnError(
                f"Manifest '{path}' must name a stimuli file", "stimuli", path
            )

        def resolve(key: str) -> Optional[Path]:
            value = data.get(key)
            if value is None:
                return None
            value = Path(value)
            return value if value.is_absolute() else path.parent / value

        return cls(
            path=path,
            styles=tuple(s.lower() for s in data.get("styles", DEFAULT_STYLES)),
            embedding_dim=int(data.get("embedding_dim", DEFAULT_EMBEDDING_DIM)),
            stimuli=resolve("stimuli"),
            judgments=resolve("judgments"),
            annotations=resolve("annotations"),
            captions=resolve("captions"),
            caption_embeddings=resolve("caption_embeddings"),
            responses=resolve("responses"),
            response_embeddings=resolve("response_embeddings"),
            feature_vectors=resolve("feature_vectors"),
            feature_vector_dim=data.get("feature_vector_dim"),
            designer_features=tuple(data.get("designer_features", FEATURE_REGISTRY)),
        )


def _as_tuple(vector: Optional[np.ndarray]) -> Optional[Tuple[float, ...]]:
    return None if vector is None else tuple(float(v) for v in vector)


def load_corpus(manifest_path: Union[str, Path]) -> Corpus:
    """Loads every file named by a corpus manifest into an immutable Corpus.

    Judgments are checked against the style set but not against stimulus ids, so that
    validate_corpus can report referential breaks instead of failing the load.
    """
    manifest = CorpusManifest.load(manifest_path)
    stimuli = load_stimuli(manifest.stimuli)

    captions = load_captions(manifest.captions) if manifest.captions else {}
    caption_vectors = (
        load_embeddings(manifest.caption_embeddings, manifest.embedding_dim)
        if manifest.caption_embeddings and manifest.caption_embeddings.exists()
        else {}
    )
    stimuli = [
        Stimulus(s.id, s.image_path, captions.get(s.id), _as_tuple(caption_vectors.get(s.id)))
        for s in stimuli
    ]

    judgments = (
        load_judgments(manifest.judgments, styles=manifest.styles) if manifest.judgments else []
    )
    annotations = load_annotations(manifest.annotations) if manifest.annotations else []

    responses: List[ResponseText] = []
    if manifest.responses:
        response_vectors = (
            load_embeddings(manifest.response_embeddings, manifest.embedding_dim)
            if manifest.response_embeddings and manifest.response_embeddings.exists()
            else {}
        )
        responses = [
            ResponseText(
                r.respondent_id,
                r.style,
                r.text,
                _as_tuple(response_vectors.get(content_hash(r.text))),
            )
            for r in load_responses(manifest.responses, styles=manifest.styles)
        ]

    feature_vectors = None
    if manifest.feature_vectors:
        vectors = load_embeddings(manifest.feature_vectors, manifest.feature_vector_dim)
        if not vectors:
            raise EmptyInputError(f"Feature vector file '{manifest.feature_vectors}' is empty")
        feature_vectors = {key: _as_tuple(vector) for key, vector in vectors.items()}

    corpus = Corpus(
        styles=manifest.styles,
        embedding_dim=manifest.embedding_dim,
        stimuli=tuple(stimuli),
        judgments=tuple(judgments),
        annotations=tuple(annotations),
        responses=tuple(responses),
        designer_features=manifest.designer_features,
        feature_vectors=feature_vectors,
    )
    logger.info(
        f"Loaded corpus from {manifest.path}: {len(corpus.stimuli)} stimuli, "
        f"{len(corpus.judgments)} judgments, {len(corpus.annotations)} annotations, "
        f"{len(corpus.responses)} responses"
    )
    return corpus


def write_corpus(corpus: Corpus, out_dir: Union[str, Path]) -> Path:
    """Writes a corpus as a manifest plus the files it names, returning the manifest path.

    Image paths are written absolute, so the images stay where they are.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(
        [(s.id, str(s.image_path.absolute())) for s in corpus.stimuli], columns=STIMULUS_COLUMNS
    ).to_csv(out_dir / "stimuli.csv", index=False, lineterminator="\n")
    write_judgments(corpus.judgments, out_dir / "judgments.csv")
    write_annotations(corpus.annotations, out_dir / "annotations.csv")
    write_captions(
        {s.id: s.caption for s in corpus.stimuli if s.caption is not None},
        out_dir / "captions.jsonl",
    )
    write_embeddings(corpus.caption_embeddings(), out_dir / "caption_embeddings.json")
    write_responses(corpus.responses, out_dir / "responses.csv")
    write_embeddings(
        {content_hash(r.text): r.embedding for r in corpus.responses if r.embedding is not None},
        out_dir / "response_embeddings.json",
    )
    manifest = {
        "styles": list(corpus.styles),
        "embedding_dim": corpus.embedding_dim,
        "stimuli": "stimuli.csv",
        "judgments": "judgments.csv",
        "annotations": "annotations.csv",
        "captions": "captions.jsonl",
        "caption_embeddings": "caption_embeddings.json",
        "responses": "responses.csv",
        "response_embeddings": "response_embeddings.json",
        "designer_features": list(corpus.designer_features),
    }
    if corpus.feature_vectors:
        write_embeddings(corpus.feature_vectors, out_dir / "feature_vectors.json")
        manifest["feature_vectors"] = "feature_vectors.json"
        manifest["feature_vector_dim"] = len(next(iter(corpus.feature_vectors.values())))
    path = out_dir / "corpus.json"
    with open(path, "w") as f:
        json.dump(manifest, f, indent=2)
        f.write("\n")
    logger.info(f"Wrote corpus with {len(corpus.stimuli)} stimuli to {out_dir}")
    return path


def _corpus_to_plain(corpus: Corpus) -> dict:
    return {
        "styles": list(corpus.styles),
        "embedding_dim": corpus.embedding_dim,
        "stimuli": [
            [
                s.id,
                str(s.image_path),
                s.caption,
                None if s.embedding is None else list(s.embedding),
            ]
            for s in corpus.stimuli
        ],
        "judgments": [
            [j.judge_id, j.style, j.left_id, j.right_id, j.winner.value] for j in corpus.judgments
        ],
        "annotations": [
            [a.annotator_id, a.stimulus_id, a.feature_name, a.value] for a in corpus.annotations
        ],
        "responses": [
            [r.respondent_id, r.style, r.text, None if r.embedding is None else list(r.embedding)]
            for r in corpus.responses
        ],
    }


def pair_counts(judgments: Iterable[Judgment]) -> Counter:
    """Counts judgments per unordered (style, stimulus pair)."""
    return Counter(
        (j.style,) + tuple(sorted((j.left_id, j.right_id))) for j in judgments
    )


def _judgment_findings(corpus: Corpus, known: set) -> List[Finding]:
    findings = []
    seen_unknown = set()
    for judgment in corpus.judgments:
        if judgment.style not in corpus.styles:
            findings.append(
                Finding("UnknownStyle", f"Judgment uses unknown style '{judgment.style}'")
            )
        for stimulus_id in (judgment.left_id, judgment.right_id):
            if stimulus_id not in known and stimulus_id not in seen_unknown:
                seen_unknown.add(stimulus_id)
                findings.append(
                    Finding(
                        "UnknownStimulus",
                        f"Judgments reference unknown stimulus '{stimulus_id}'",
                        stimulus_id=stimulus_id,
                    )
                )
    return findings


def _annotation_findings(corpus: Corpus, known: set) -> List[Finding]:
    declared = set(corpus.designer_features)
    findings = [
        Finding("UnknownFeature", f"Annotations use undeclared feature '{name}'")
        for name in sorted({a.feature_name for a in corpus.annotations} - declared)
    ]
    for stimulus_id in sorted({a.stimulus_id for a in corpus.annotations} - known):
        findings.append(
            Finding(
                "UnknownStimulus",
                f"Annotations reference unknown stimulus '{stimulus_id}'",
                stimulus_id=stimulus_id,
            )
        )
    return findings


def _connectivity_findings(corpus: Corpus, known: set) -> List[Finding]:
    from aesthetics.ranking import check_connectivity, win_matrix_from_judgments

    findings = []
    for style in corpus.styles:
        judgments = [
            j for j in corpus.judgments_for(style) if j.left_id in known and j.right_id in known
        ]
        if not judgments:
            continue
        connectivity = check_connectivity(
            win_matrix_from_judgments(judgments, corpus.stimulus_ids)
        )
        if not connectivity.connected:
            findings.append(
                Finding(
                    "DisconnectedGraph",
                    f"Comparison graph for style '{style}' has "
                    f"{len(connectivity.components)} components",
                    style=style,
                )
            )
    return findings


def _stimulus_findings(corpus: Corpus) -> List[Finding]:
    findings = []
    for stimulus in corpus.stimuli:
        embedding = stimulus.embedding
        if embedding is not None and (
            len(embedding) != corpus.embedding_dim or not all(math.isfinite(v) for v in embedding)
        ):
            findings.append(
                Finding(
                    "InvalidEmbedding",
                    f"Caption embedding of '{stimulus.id}' is invalid",
                    stimulus_id=stimulus.id,
                )
            )
        words = None if stimulus.caption is None else len(stimulus.caption.split())
        if words is not None and not CAPTION_MIN_WORDS <= words <= CAPTION_MAX_WORDS:
            findings.append(
                Finding(
                    "CaptionLength",
                    f"Caption of '{stimulus.id}' has {words} words, outside "
                    f"{CAPTION_MIN_WORDS}-{CAPTION_MAX_WORDS}",
                    severity="warning",
                    stimulus_id=stimulus.id,
                )
            )
    return findings


def _coverage(corpus: Corpus, known: set) -> Dict[str, object]:
    pairs = pair_counts(j for j in corpus.judgments if j.left_id in known and j.right_id in known)
    return {
        "n_stimuli": len(corpus.stimuli),
        "n_judgments": len(corpus.judgments),
        "n_styles": len(corpus.styles),
        "judgments_per_style": {s: len(corpus.judgments_for(s)) for s in corpus.styles},
        "n_compared_pairs": len(pairs),
        "ratings_per_pair_mean": (sum(pairs.values()) / len(pairs)) if pairs else 0.0,
        "ratings_per_pair_min": min(pairs.values()) if pairs else 0,
        "ratings_per_pair_max": max(pairs.values()) if pairs else 0,
        "n_annotations": len(corpus.annotations),
        "annotated_stimuli": len({a.stimulus_id for a in corpus.annotations}),
        "n_responses": len(corpus.responses),
        "n_captions": sum(1 for s in corpus.stimuli if s.caption is not None),
    }


def validate_corpus(corpus: Corpus) -> ValidationReport:
    """Checks referential integrity, comparison-graph connectivity and coverage.

    Findings with severity "error" make the corpus unfit for analysis; "warning" findings
    (such as captions outside the expected length) are reported but do not block a run.
    """
    known = set(corpus.stimulus_ids)
    report = ValidationReport()
    report.findings.extend(_judgment_findings(corpus, known))
    report.findings.extend(_annotation_findings(corpus, known))
    report.findings.extend(_connectivity_findings(corpus, known))
    report.findings.extend(_stimulus_findings(corpus))
    report.coverage = _coverage(corpus, known)
    for finding in report.findings:
        log = logger.warning if finding.severity == "warning" else logger.error
        log(f"Validation {finding.kind}: {finding.message}")
    return report
