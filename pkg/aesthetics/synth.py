# Copyright 2026 Canonical Ltd.
# See LICENSE file for licensing details.

"""Synthetic corpus generator.

Writes a complete corpus with planted ground truth: wheel images drawn from planted feature
values, noisy multi-annotator annotations of those values, pairwise judgments simulated from
planted Bradley-Terry strengths, captions, free-text responses and their embeddings, a pool of
feature vectors for representative sampling, a corpus manifest and a pipeline config.

Caption and response embeddings are built around one criterion direction per style, so the
mean cosine between a stimulus caption and the responses of a style tracks a planted weight.
Planted strengths depend on that weight with a per-style slope whose sign is recorded in
truth.json.
"""

import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Tuple, Union

import cv2
import numpy as np
import pandas as pd

from aesthetics.config import (
    DipConfig,
    PipelineConfig,
    ProviderConfig,
    SamplingConfig,
    write_config,
)
from aesthetics.corpus import (
    BOOLEAN_FEATURES,
    DEFAULT_EMBEDDING_DIM,
    DEFAULT_STYLES,
    FEATURE_REGISTRY,
    SPLIT_TYPES,
    STIMULUS_COLUMNS,
    AnnotationRecord,
    Judgment,
    ResponseText,
    Winner,
    content_hash,
    write_annotations,
    write_captions,
    write_embeddings,
    write_judgments,
    write_responses,
)
from aesthetics.pipeline import write_json

logger = logging.getLogger(__name__)

FEATURE_VECTOR_DIM = 16
MIN_SPOKES = 3
MAX_SPOKES = 8

STYLE_PHRASES = {
    "aerodynamic": (
        "smooth curved spokes",
        "thin blades",
        "low drag shape",
        "closed face",
        "turbine look",
        "swept spokes",
        "slim profile",
    ),
    "classic": (
        "simple round design",
        "many thin spokes",
        "polished silver finish",
        "traditional mesh pattern",
        "chrome lip",
        "symmetric layout",
        "timeless look",
    ),
    "dynamic": (
        "sense of motion",
        "angled spokes",
        "sharp edges",
        "directional pattern",
        "spinning feel",
        "contrast between spokes",
        "energetic lines",
    ),
    "elegant": (
        "fine thin spokes",
        "balanced proportions",
        "subtle detail",
        "clean surfaces",
        "graceful curves",
        "refined finish",
        "light appearance",
    ),
    "futuristic": (
        "unusual geometry",
        "hollow spokes",
        "layered structure",
        "dark tinted finish",
        "asymmetric pattern",
        "concept car look",
        "complex split spokes",
    ),
    "luxurious": (
        "large diameter",
        "bright chrome finish",
        "detailed machining",
        "many split spokes",
        "premium materials",
        "deep dish",
        "intricate pattern",
    ),
    "rugged": (
        "thick dark spokes",
        "heavy build",
        "wide chunky spokes",
        "off road feel",
        "matte black finish",
        "exposed bolts",
        "strong hub",
    ),
    "sleek": (
        "smooth flat face",
        "minimal spokes",
        "seamless finish",
        "narrow openings",
        "glossy surface",
        "flowing lines",
        "low profile look",
    ),
    "sporty": (
        "five thin spokes",
        "open design",
        "light weight",
        "racing look",
        "visible brakes",
        "y shaped spokes",
        "aggressive stance",
    ),
}
# Every aerodynamic response mentions this, so it is the most frequent bigram for that style.
AERODYNAMIC_KEY_PHRASE = "air flow"


class SynthError(Exception):
    """Raised if a synthetic corpus cannot be generated with the requested settings."""


@dataclass(frozen=True)
class SynthPreset:
    """Shape of a generated corpus."""

    name: str
    n_stimuli: int
    styles: Tuple[str, ...]
    n_annotators: int
    n_judges: int
    designer_features: Tuple[str, ...]
    ratings_per_pair: Tuple[int, int]
    respondents_per_style: int
    pool_size: int
    pool_clusters: int
    image_size: int
    embedding_dim: int = DEFAULT_EMBEDDING_DIM
    dip_reps: int = 10000
    sampling: SamplingConfig = field(default_factory=SamplingConfig)


PRESETS = {
    "mini": SynthPreset(
        name="mini",
        n_stimuli=12,
        styles=("sporty", "rugged", "classic"),
        n_annotators=3,
        n_judges=6,
        designer_features=("directional", "offset", "hollowed", "spokes"),
        ratings_per_pair=(12, 12),
        respondents_per_style=4,
        pool_size=40,
        pool_clusters=4,
        image_size=96,
        dip_reps=2000,
        sampling=SamplingConfig(perplexity=5.0, n_iter=500, k=4, m_total=4, restarts=4),
    ),
    "paper": SynthPreset(
        name="paper",
        n_stimuli=80,
        styles=DEFAULT_STYLES,
        n_annotators=5,
        n_judges=40,
        designer_features=FEATURE_REGISTRY,
        ratings_per_pair=(10, 30),
        respondents_per_style=80,
        pool_size=1000,
        pool_clusters=80,
        image_size=128,
    ),
}


@dataclass
class PlantedTruth:
    """What the generator planted, written to truth.json."""

    strengths: Dict[str, Dict[str, float]]
    alignment_slopes: Dict[str, float]
    designer_coefficients: Dict[str, Dict[str, float]]
    features: Dict[str, Dict[str, object]]

    def to_dict(self) -> dict:
        return {
            "strengths": self.strengths,
            "alignment_slopes": self.alignment_slopes,
            "designer_coefficients": self.designer_coefficients,
            "features": self.features,
        }


def planted_slopes(styles: Tuple[str, ...]) -> Dict[str, float]:
    """Per-style alignment slope.

    Positive for the first three non-classic styles, negative for classic, zero for the rest.
    """
    slopes = {}
    positive = 0
    for style in styles:
        if style == "classic":
            slopes[style] = -1.0
        elif positive < 3:
            slopes[style] = 1.0
            positive += 1
        else:
            slopes[style] = 0.0
    return slopes


def _unit(vector: np.ndarray) -> np.ndarray:
    return vector / np.linalg.norm(vector)


def _stimulus_ids(n: int) -> List[str]:
    width = max(2, len(str(n)))
    return [f"w{i:0{width}d}" for i in range(1, n + 1)]


def _plant_features(rng: np.random.Generator, ids: List[str]) -> Dict[str, Dict[str, object]]:
    features = {}
    for stimulus_id in ids:
        truth: Dict[str, object] = {
            name: bool(rng.random() < 0.4) for name in BOOLEAN_FEATURES
        }
        truth["spokes"] = int(rng.integers(MIN_SPOKES, MAX_SPOKES + 1))
        truth["split_type"] = str(rng.choice(SPLIT_TYPES, p=[0.5, 0.3, 0.2]))
        truth["gray"] = int(rng.integers(90, 231))
        truth["phase"] = float(rng.uniform(0.0, 2 * math.pi))
        features[stimulus_id] = truth
    return features


def draw_wheel(truth: Dict[str, object], size: int, rng: np.random.Generator) -> np.ndarray:
    """Grayscale wheel: a rim ring, a filled hub and evenly spaced radial spokes.

    Directional wheels sweep each spoke sideways towards the rim, hollowed spokes get a dark
    centre line and split spokes are drawn as two close lines.
    """
    image = np.zeros((size, size), dtype=np.uint8)
    centre = size // 2
    rim = int(0.42 * size)
    hub = int(0.12 * size)
    gray = int(truth["gray"])
    thickness = max(2, size // 32)

    cv2.circle(image, (centre, centre), rim, gray, thickness=thickness)
    cv2.circle(image, (centre, centre), hub, gray, thickness=-1)

    sweep = math.radians(20.0) if truth["directional"] else 0.0
    offsets = (0.0,) if truth["split_type"] == "none" else (-0.06, 0.06)
    spoke_width = thickness + (2 if truth["doublestacked"] else 0)
    for i in range(int(truth["spokes"])):
        angle = float(truth["phase"]) + 2 * math.pi * i / int(truth["spokes"])
        for offset in offsets:
            start = (
                int(round(centre + hub * math.cos(angle + offset))),
                int(round(centre + hub * math.sin(angle + offset))),
            )
            end = (
                int(round(centre + rim * math.cos(angle + sweep + offset))),
                int(round(centre + rim * math.sin(angle + sweep + offset))),
            )
            cv2.line(image, start, end, gray, spoke_width)
            if truth["hollowed"]:
                cv2.line(image, start, end, 0, max(1, spoke_width // 3))

    noise = rng.normal(0.0, 6.0, size=image.shape)
    return np.clip(image.astype(float) + noise, 0, 255).astype(np.uint8)


def _caption(stimulus_id: str, truth: Dict[str, object]) -> str:
    finish = "bright" if int(truth["gray"]) > 160 else "dark"
    split = {
        "none": "plain single spokes",
        "single": "spokes that split once",
        "split": "spokes that split into several branches",
    }[str(truth["split_type"])]
    extras = [name for name in ("directional", "hollowed", "offset") if truth[name]]
    detail = f"The spokes look {' and '.join(extras)}." if extras else "The spokes look plain."
    return (
        f"Wheel {stimulus_id} is shown face on against a dark background. It has "
        f"{truth['spokes']} spokes with {split}, a round hub and a thin outer rim in a {finish} "
        f"finish. {detail} Nothing else in the picture draws attention away from the wheel."
    )


def _responses(
    rng: np.random.Generator, styles: Tuple[str, ...], per_style: int
) -> List[ResponseText]:
    responses = []
    used = set()
    for style in styles:
        phrases = STYLE_PHRASES[style]
        for respondent in range(1, per_style + 1):
            chosen = [str(p) for p in rng.choice(phrases, size=2, replace=False)]
            if style == "aerodynamic":
                chosen.insert(int(rng.integers(0, len(chosen) + 1)), AERODYNAMIC_KEY_PHRASE)
            text = f"I looked for {', '.join(chosen[:-1])} and {chosen[-1]}"
            if rng.random() < 0.5:
                text += " in the wheel"
            if text in used:
                text += f" more than anything (respondent {respondent})"
            used.add(text)
            responses.append(ResponseText(f"r{respondent:03d}", style, text))
    return responses


def _simulate_judgments(
    rng: np.random.Generator,
    ids: List[str],
    strengths: Dict[str, Dict[str, float]],
    preset: SynthPreset,
) -> List[Judgment]:
    styles = preset.styles
    low, high = preset.ratings_per_pair
    judgments = []
    for a in range(len(ids)):
        for b in range(a + 1, len(ids)):
            count = int(rng.integers(low, high + 1))
            start = int(rng.integers(0, len(styles)))
            for k in range(count):
                style = styles[(start + k) % len(styles)]
                left, right = (ids[a], ids[b]) if rng.random() < 0.5 else (ids[b], ids[a])
                margin = strengths[style][left] - strengths[style][right]
                left_wins = rng.random() < 1.0 / (1.0 + math.exp(-margin))
                judge = f"judge-{int(rng.integers(1, preset.n_judges + 1)):03d}"
                winner = Winner.LEFT if left_wins else Winner.RIGHT
                judgments.append(Judgment(judge, style, left, right, winner))
    return _ensure_finite_strengths(judgments, styles, ids)


def _ensure_finite_strengths(
    judgments: List[Judgment], styles: Tuple[str, ...], ids: List[str]
) -> List[Judgment]:
    """Flips one judgment of any item that never wins or never loses within a style."""
    judgments = list(judgments)
    for _ in range(10):
        played: Dict[Tuple[str, str], List[int]] = defaultdict(list)
        for position, j in enumerate(judgments):
            played[(j.style, j.left_id)].append(position)
            played[(j.style, j.right_id)].append(position)
        flipped = 0
        for style in styles:
            for stimulus_id in ids:
                positions = played.get((style, stimulus_id), [])
                won = [p for p in positions if judgments[p].winner_id == stimulus_id]
                if not positions or 0 < len(won) < len(positions):
                    continue
                target = won[0] if won else positions[0]
                j = judgments[target]
                winner = Winner.RIGHT if j.winner is Winner.LEFT else Winner.LEFT
                judgments[target] = Judgment(j.judge_id, j.style, j.left_id, j.right_id, winner)
                logger.debug(f"Flipped a '{style}' judgment of '{stimulus_id}'")
                flipped += 1
        if not flipped:
            break
    return judgments


def _annotate(
    rng: np.random.Generator,
    features: Dict[str, Dict[str, object]],
    n_annotators: int,
    designer_features: Tuple[str, ...],
) -> List[AnnotationRecord]:
    """Noisy copies of the planted values of the declared features, one set per annotator."""
    records = []
    for annotator in range(1, n_annotators + 1):
        annotator_id = f"a{annotator}"
        for stimulus_id, truth in features.items():
            for name in designer_features:
                value = truth[name]
                if name in BOOLEAN_FEATURES:
                    value = bool(value) != (rng.random() < 0.1)
                elif name == "spokes":
                    value = int(value)
                    if rng.random() < 0.1:
                        value = max(MIN_SPOKES, value + int(rng.choice([-1, 1])))
                elif rng.random() < 0.1:
                    value = str(rng.choice(SPLIT_TYPES))
                else:
                    value = str(value)
                records.append(AnnotationRecord(annotator_id, stimulus_id, name, value))
    return records


def _zscore(values: np.ndarray) -> np.ndarray:
    spread = values.std()
    return (values - values.mean()) / spread if spread > 0 else values - values.mean()


def _plant_strengths(
    rng: np.random.Generator,
    ids: List[str],
    features: Dict[str, Dict[str, object]],
    weights: Dict[str, np.ndarray],
    shape: SynthPreset,
) -> Tuple[Dict[str, Dict[str, float]], Dict[str, float], Dict[str, Dict[str, float]]]:
    """Mean-zero log-strengths per style from planted features, alignment and noise."""
    slopes = planted_slopes(shape.styles)
    designer_names = [n for n in shape.designer_features if n in BOOLEAN_FEATURES]
    coefficients = {
        style: {name: float(rng.normal(0.0, 0.6)) for name in designer_names}
        for style in shape.styles
    }
    brightness = _zscore(np.array([float(features[i]["gray"]) for i in ids]))
    spokes = _zscore(np.array([float(features[i]["spokes"]) for i in ids]))
    strengths: Dict[str, Dict[str, float]] = {}
    for style in shape.styles:
        designer = np.array(
            [
                sum(coefficients[style][n] * float(features[i][n]) for n in designer_names)
                for i in ids
            ]
        )
        latent = (
            0.5 * designer
            + 0.3 * brightness * (1.0 if style != "rugged" else -1.0)
            + 0.2 * spokes
            + slopes[style] * _zscore(weights[style])
            + rng.normal(0.0, 0.25, size=len(ids))
        )
        strengths[style] = dict(zip(ids, (latent - latent.mean()).tolist()))
    if "classic" in strengths and "futuristic" in strengths:
        strengths["futuristic"] = {
            i: -strengths["classic"][i] + float(rng.normal(0.0, 0.3)) for i in ids
        }
    return strengths, slopes, coefficients


def generate_corpus(
    out_dir: Union[str, Path], preset: str = "mini", seed: int = 0
) -> Path:
    """Generates a synthetic corpus under out_dir.

    Args:
        out_dir: target directory, created if needed.
        preset: "mini" (12 stimuli, 3 styles, 3 annotators) or "paper" (80 stimuli, 9 styles).
        seed: generator seed. The same preset and seed always give identical files.

    Returns:
        Path of the written pipeline config (config.yaml), which points at corpus.json.
    """
    if preset not in PRESETS:
        raise SynthError(f"Unknown preset '{preset}'; expected one of {sorted(PRESETS)}")
    shape = PRESETS[preset]
    unknown = [s for s in shape.styles if s not in STYLE_PHRASES]
    if unknown:
        raise SynthError(f"No response vocabulary for styles {unknown}")
    out_dir = Path(out_dir)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)

    ids = _stimulus_ids(shape.n_stimuli)
    features = _plant_features(rng, ids)

    for stimulus_id in ids:
        image = draw_wheel(features[stimulus_id], shape.image_size, rng)
        cv2.imwrite(str(out_dir / "images" / f"{stimulus_id}.png"), image)
    pd.DataFrame(
        [(stimulus_id, f"images/{stimulus_id}.png") for stimulus_id in ids],
        columns=STIMULUS_COLUMNS,
    ).to_csv(out_dir / "stimuli.csv", index=False, lineterminator="\n")

    # Criterion direction per style; captions mix them with planted weights.
    dim = shape.embedding_dim
    directions = {style: _unit(rng.standard_normal(dim)) for style in shape.styles}
    weights = {style: rng.uniform(0.0, 1.0, size=len(ids)) for style in shape.styles}
    caption_vectors = {}
    for position, stimulus_id in enumerate(ids):
        mixed = sum(weights[s][position] * directions[s] for s in shape.styles)
        noise = 0.3 * rng.standard_normal(dim) / math.sqrt(dim)
        caption_vectors[stimulus_id] = _unit(mixed + noise)
    write_embeddings(caption_vectors, out_dir / "caption_embeddings.json")
    write_captions(
        {stimulus_id: _caption(stimulus_id, features[stimulus_id]) for stimulus_id in ids},
        out_dir / "captions.jsonl",
    )

    responses = _responses(rng, shape.styles, shape.respondents_per_style)
    response_vectors = {
        content_hash(r.text): _unit(
            directions[r.style] + 0.6 * rng.standard_normal(dim) / math.sqrt(dim)
        )
        for r in responses
    }
    write_responses(responses, out_dir / "responses.csv")
    write_embeddings(response_vectors, out_dir / "response_embeddings.json")

    strengths, slopes, coefficients = _plant_strengths(rng, ids, features, weights, shape)

    judgments = _simulate_judgments(rng, ids, strengths, shape)
    write_judgments(judgments, out_dir / "judgments.csv")
    annotations = _annotate(rng, features, shape.n_annotators, shape.designer_features)
    write_annotations(annotations, out_dir / "annotations.csv")

    centres = rng.normal(0.0, 4.0, size=(shape.pool_clusters, FEATURE_VECTOR_DIM))
    pool = {
        f"pool-{n:04d}": (
            centres[n % shape.pool_clusters] + rng.normal(0.0, 0.5, FEATURE_VECTOR_DIM)
        ).tolist()
        for n in range(1, shape.pool_size + 1)
    }
    write_embeddings(pool, out_dir / "feature_vectors.json")

    write_json(
        {
            "styles": list(shape.styles),
            "embedding_dim": dim,
            "stimuli": "stimuli.csv",
            "judgments": "judgments.csv",
            "annotations": "annotations.csv",
            "captions": "captions.jsonl",
            "caption_embeddings": "caption_embeddings.json",
            "responses": "responses.csv",
            "response_embeddings": "response_embeddings.json",
            "feature_vectors": "feature_vectors.json",
            "feature_vector_dim": FEATURE_VECTOR_DIM,
            "designer_features": list(shape.designer_features),
        },
        out_dir / "corpus.json",
    )
    truth = PlantedTruth(
        strengths=strengths,
        alignment_slopes=slopes,
        designer_coefficients=coefficients,
        features={
            i: {k: v for k, v in features[i].items() if k in FEATURE_REGISTRY} for i in ids
        },
    )
    write_json(truth.to_dict(), out_dir / "truth.json")

    config = PipelineConfig(
        corpus=Path("corpus.json"),
        output_dir=Path("runs"),
        seed=seed,
        dip=DipConfig(reps=shape.dip_reps),
        providers=ProviderConfig(),
        sampling=shape.sampling,
    )
    config_path = out_dir / "config.yaml"
    write_config(config, config_path)
    logger.info(
        f"Generated '{preset}' corpus in {out_dir}: {len(ids)} stimuli, {len(judgments)} "
        f"judgments, {len(responses)} responses"
    )
    return config_path
