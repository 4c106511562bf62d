# Copyright 2026 Canonical Ltd.
# See LICENSE file for licensing details.

"""Semantic alignment between image captions and free-text style criteria.

Captions and responses are embedded into a shared vector space. The alignment of a stimulus with
a style is the mean cosine similarity between its caption embedding and the embeddings of every
response given for that style.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Union

import numpy as np
import pandas as pd

from aesthetics.corpus import (
    ResponseText,
    Stimulus,
    content_hash,
    load_captions,
    load_embeddings,
    write_captions,
    write_embeddings,
)
from aesthetics.providers import ProviderError, ProviderUnreachableError

logger = logging.getLogger(__name__)

DEFAULT_PROMPT = (
    "Describe this car wheel image in detail. Write your description in 5-7 full sentences "
    "without using bullet points. Include information about the wheel design, style, finish, "
    "spoke pattern, and any other notable features"
)
ALIGNMENT_COLUMNS = ("stimulus_id", "style", "mean_cosine", "n_responses")


class SemanticsError(Exception):
    """Base class for alignment failures."""


class ZeroVectorError(SemanticsError):
    """Raised if a cosine similarity involves a zero vector."""


class DimensionMismatchError(SemanticsError):
    """Raised if two vectors, or a vector and the configured dimension, disagree in length."""


class NonFiniteVectorError(SemanticsError):
    """Raised if a provider returns a vector holding NaN or infinity."""


class MissingCaptionEmbeddingError(SemanticsError):
    """Raised if a stimulus to be scored has no caption embedding."""

    def __init__(self, *args, stimulus_id: Optional[str] = None, **kwargs):
        super().__init__(*args, **kwargs)
        self.stimulus_id = stimulus_id


class MissingResponseEmbeddingError(SemanticsError):
    """Raised if a response has no embedding."""


@dataclass(frozen=True)
class AlignmentScore:
    """Mean caption-response cosine of one stimulus under one style."""

    stimulus_id: str
    style: str
    mean_cosine: float
    n_responses: int


def cosine(a: Sequence[float], b: Sequence[float]) -> float:
    """Cosine similarity, clamped to [-1, 1]."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise DimensionMismatchError(f"Cannot compare vectors of shape {a.shape} and {b.shape}")
    norm_a, norm_b = np.linalg.norm(a), np.linalg.norm(b)
    if norm_a == 0 or norm_b == 0:
        raise ZeroVectorError("Cosine similarity is undefined for a zero vector")
    return float(np.clip(np.dot(a, b) / (norm_a * norm_b), -1.0, 1.0))


def _response_vectors(
    responses: Sequence[ResponseText], styles: Sequence[str]
) -> Dict[str, List[np.ndarray]]:
    by_style: Dict[str, List[np.ndarray]] = {style: [] for style in styles}
    for response in responses:
        if response.style not in by_style:
            continue
        if response.embedding is None:
            raise MissingResponseEmbeddingError(
                f"Response of '{response.respondent_id}' for '{response.style}' has no embedding"
            )
        by_style[response.style].append(np.asarray(response.embedding, dtype=float))
    return by_style


def alignment_scores(
    caption_embeddings: Mapping[str, Sequence[float]],
    responses: Sequence[ResponseText],
    styles: Sequence[str],
    stimulus_ids: Optional[Iterable[str]] = None,
) -> List[AlignmentScore]:
    """Scores every (stimulus, style) pair.

    Args:
        caption_embeddings: caption vector per stimulus id.
        responses: embedded responses; their order does not affect the result.
        styles: styles to score, in output order.
        stimulus_ids: stimuli to score, defaults to every captioned stimulus.

    Returns:
        Scores ordered by stimulus id, then by the given style order. Styles without any
        response are skipped with a warning.
    """
    ids = sorted(caption_embeddings if stimulus_ids is None else stimulus_ids)
    for stimulus_id in ids:
        if stimulus_id not in caption_embeddings:
            raise MissingCaptionEmbeddingError(
                f"No caption embedding for stimulus '{stimulus_id}'", stimulus_id=stimulus_id
            )

    by_style = _response_vectors(responses, styles)
    scores = []
    for stimulus_id in ids:
        caption = caption_embeddings[stimulus_id]
        for style in styles:
            vectors = by_style[style]
            if not vectors:
                continue
            # fsum keeps the mean independent of response order
            total = math.fsum(cosine(caption, vector) for vector in vectors)
            scores.append(AlignmentScore(stimulus_id, style, total / len(vectors), len(vectors)))

    for style in styles:
        if not by_style[style]:
            logger.warning(f"No responses for style '{style}'; its alignment scores are omitted")
    return scores


def alignment_frame(scores: Iterable[AlignmentScore]) -> pd.DataFrame:
    """Tabulates alignment scores."""
    rows = [(s.stimulus_id, s.style, s.mean_cosine, s.n_responses) for s in scores]
    return pd.DataFrame(rows, columns=ALIGNMENT_COLUMNS)


def write_alignment_scores(scores: Iterable[AlignmentScore], path: Union[str, Path]) -> None:
    """Writes alignment scores as CSV."""
    alignment_frame(scores).to_csv(path, index=False, lineterminator="\n", float_format="%.12g")


def load_alignment_scores(path: Union[str, Path]) -> pd.DataFrame:
    """Reads an alignment score table."""
    return pd.read_csv(path, dtype={"stimulus_id": str, "style": str})


def response_cosines(
    caption_embeddings: Mapping[str, Sequence[float]],
    responses: Sequence[ResponseText],
    style: str,
) -> np.ndarray:
    """Every caption-response cosine for one style, used for distribution checks."""
    values = [
        cosine(caption_embeddings[stimulus_id], response.embedding)
        for stimulus_id in sorted(caption_embeddings)
        for response in responses
        if response.style == style and response.embedding is not None
    ]
    return np.asarray(values, dtype=float)


def fetch_captions(
    provider,
    stimuli: Sequence[Stimulus],
    out_path: Union[str, Path],
    prompt: str = DEFAULT_PROMPT,
    max_in_flight: int = 4,
) -> Dict[str, str]:
    """Captions every stimulus that is not already in out_path.

    Captions already on disk are never re-requested. A provider error for one stimulus is
    logged and the run continues. If the provider becomes unreachable, the captions obtained so
    far are persisted before the error propagates.

    Returns:
        Every caption known after the call, keyed by stimulus id.
    """
    captions = load_captions(out_path)
    pending = [s for s in sorted(stimuli, key=lambda s: s.id) if s.id not in captions]
    logger.info(f"Captioning {len(pending)} stimuli ({len(captions)} already captioned)")

    def request(stimulus: Stimulus):
        try:
            return stimulus.id, provider.caption(stimulus.image_path, prompt)
        except ProviderUnreachableError:
            raise
        except ProviderError as e:
            logger.error(f"Captioning failed for '{stimulus.id}': {e}")
            return stimulus.id, None

    try:
        with ThreadPoolExecutor(max_workers=max(1, max_in_flight)) as executor:
            for stimulus_id, caption in executor.map(request, pending):
                if caption is not None:
                    captions[stimulus_id] = caption
    finally:
        write_captions(captions, out_path)
    return captions


def fetch_embeddings(
    provider,
    texts: Iterable[str],
    out_path: Union[str, Path],
    expected_dim: int,
    keys: Optional[Sequence[str]] = None,
    batch_size: int = 32,
    max_in_flight: int = 4,
) -> Dict[str, np.ndarray]:
    """Embeds texts, skipping any whose key is already in out_path.

    Args:
        provider: anything with an `embed(texts)` method.
        texts: texts to embed.
        out_path: JSON file mapping keys to vectors. Read first, rewritten at the end.
        expected_dim: required vector length.
        keys: key per text. Defaults to the sha256 content hash of each text.
        batch_size: texts per provider request.
        max_in_flight: concurrent requests.

    Returns:
        Every vector known after the call.
    """
    texts = list(texts)
    keys = [content_hash(text) for text in texts] if keys is None else list(keys)
    out_path = Path(out_path)
    known = load_embeddings(out_path, expected_dim) if out_path.exists() else {}

    pending: Dict[str, str] = {}
    for key, text in zip(keys, texts):
        if key not in known and key not in pending:
            pending[key] = text
    pending_keys = list(pending)
    batches = [
        pending_keys[start : start + batch_size]
        for start in range(0, len(pending_keys), batch_size)
    ]
    logger.info(f"Embedding {len(pending_keys)} texts in {len(batches)} batches")

    def request(batch: List[str]):
        vectors = provider.embed([pending[key] for key in batch])
        for key, vector in zip(batch, vectors):
            if len(vector) != expected_dim:
                raise DimensionMismatchError(
                    f"Provider returned a vector of length {len(vector)} for '{key}', "
                    f"expected {expected_dim}"
                )
            if not np.all(np.isfinite(np.asarray(vector, dtype=float))):
                raise NonFiniteVectorError(f"Provider returned a non-finite vector for '{key}'")
        return batch, vectors

    try:
        with ThreadPoolExecutor(max_workers=max(1, max_in_flight)) as executor:
            for batch, vectors in executor.map(request, batches):
                for key, vector in zip(batch, vectors):
                    known[key] = np.asarray(vector, dtype=float)
    finally:
        write_embeddings(known, out_path)
    return known
