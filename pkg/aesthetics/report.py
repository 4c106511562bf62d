# Copyright 2026 Canonical Ltd.
# See LICENSE file for licensing details.

"""Run summaries (JSON plus a rendered text report) and bigram tallies of free-text responses."""

import logging
import re
from collections import Counter
from pathlib import Path
from typing import TYPE_CHECKING, Dict, List, Optional, Sequence, Tuple, Union

import pandas as pd
from jinja2 import Environment, FileSystemLoader, StrictUndefined

from aesthetics.corpus import Corpus, ResponseText, pair_counts
from aesthetics.ranking import top_k

if TYPE_CHECKING:
    from aesthetics.config import PipelineConfig
    from aesthetics.pipeline import RunArtifacts

logger = logging.getLogger(__name__)

TEMPLATES_DIR = Path(__file__).parent / "templates"
STOPWORDS_FILE = Path(__file__).parent / "data" / "stopwords.txt"


class ReportError(Exception):
    """Raised if a report cannot be produced from the available inputs."""


class NoResponsesError(ReportError):
    """Raised if there are no responses to tally."""


def format_alpha(alpha: float) -> str:
    """0.05 -> ".05", the way significance levels are usually written."""
    text = f"{alpha:.3f}".rstrip("0")
    return text[1:] if text.startswith("0.") else text


def _significant(coefficients: pd.DataFrame, family: str, style: str, alpha: float) -> List[dict]:
    if coefficients is None or coefficients.empty:
        return []
    rows = coefficients[
        (coefficients["family"] == family)
        & (coefficients["style"] == style)
        & (coefficients["feature"] != "intercept")
        & (coefficients["p"] < alpha)
    ]
    return [
        {"feature": row.feature, "beta": float(row.beta), "p": float(row.p)}
        for row in rows.itertuples()
    ]


def _distribution_summary(distributions: Optional[dict], alpha: float) -> List[str]:
    """One sentence per tested quantity saying whether unimodality and normality hold."""
    if not distributions:
        return []
    lines = []
    for kind, label in (("bt", "Bradley-Terry scores"), ("cosine", "alignment scores")):
        dip_p = [
            entry[kind]["dip"]["p"]
            for entry in distributions.values()
            if kind in entry and entry[kind].get("dip")
        ]
        if dip_p:
            if min(dip_p) > alpha:
                lines.append(
                    f"Unimodality of {label} is not rejected for any style "
                    f"(all dip p > {format_alpha(alpha)})."
                )
            else:
                lines.append(
                    f"Unimodality of {label} is rejected for "
                    f"{sum(p <= alpha for p in dip_p)} of {len(dip_p)} styles."
                )
        sw_p = [
            entry[kind]["shapiro"]["p"]
            for entry in distributions.values()
            if kind in entry and entry[kind].get("shapiro")
        ]
        if sw_p:
            rejected = sum(p <= alpha for p in sw_p)
            lines.append(
                f"Normality of {label} is rejected for {rejected} of {len(sw_p)} styles "
                f"(Shapiro-Wilk, alpha = {format_alpha(alpha)})."
            )
    return lines


def build_summary(
    artifacts: "RunArtifacts", corpus: Corpus, config: "PipelineConfig"
) -> Dict[str, object]:
    """Collects the numbers every report is rendered from."""
    alpha = config.alpha
    pairs = pair_counts(corpus.judgments)
    counts = {
        "n_stimuli": len(corpus.stimuli),
        "n_styles": len(corpus.styles),
        "n_judgments": len(corpus.judgments),
        "n_compared_pairs": len(pairs),
        "ratings_per_pair_mean": (sum(pairs.values()) / len(pairs)) if pairs else 0.0,
        "n_annotations": len(corpus.annotations),
        "n_annotators": len({a.annotator_id for a in corpus.annotations}),
        "n_responses": len(corpus.responses),
    }

    descriptives = {}
    if artifacts.bt_descriptives is not None:
        descriptives = {
            row["style"]: row for row in artifacts.bt_descriptives.to_dict(orient="records")
        }
    bradley_terry = {}
    for style in corpus.styles:
        if style not in descriptives:
            continue
        bradley_terry[style] = {
            "descriptives": descriptives[style],
            "top5": [
                {"stimulus_id": stimulus_id, "bt_score": score}
                for stimulus_id, score in top_k(artifacts.bt_scores, style, 5)
            ],
            "diagnostics": (artifacts.bt_diagnostics or {}).get(style),
        }

    regressions = {}
    summaries = artifacts.model_summaries or {}
    for family, per_style in summaries.items():
        if family == "alignment-models":
            continue
        regressions[family] = {}
        for style, summary in per_style.items():
            entry = dict(summary)
            if "skipped" not in entry:
                entry["significant"] = _significant(artifacts.coefficients, family, style, alpha)
            regressions[family][style] = entry

    return {
        "seed": config.seed,
        "alpha": alpha,
        "counts": counts,
        "bradley_terry": bradley_terry,
        "regressions": regressions,
        "alignment_models": summaries.get("alignment-models"),
        "distributions": artifacts.distributions or {},
        "distribution_summary": _distribution_summary(artifacts.distributions, alpha),
    }


def render_text(summary: Dict[str, object]) -> str:
    """Renders the summary through the text template."""
    environment = Environment(
        loader=FileSystemLoader(str(TEMPLATES_DIR)),
        keep_trailing_newline=True,
        undefined=StrictUndefined,
    )
    template = environment.get_template("summary.txt.j2")
    return template.render(alpha_text=format_alpha(summary["alpha"]), **summary)


def emit_report(
    artifacts: "RunArtifacts",
    corpus: Corpus,
    config: "PipelineConfig",
    out_dir: Union[str, Path],
) -> Tuple[Path, Path]:
    """Writes summary.json and summary.txt into out_dir.

    Returns:
        The paths of the JSON and text summaries.
    """
    from aesthetics.pipeline import write_json

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = build_summary(artifacts, corpus, config)
    json_path = out_dir / "summary.json"
    text_path = out_dir / "summary.txt"
    write_json(summary, json_path)
    text_path.write_text(render_text(summary))
    logger.info(f"Wrote report to {out_dir}")
    return json_path, text_path


def load_stopwords(path: Union[str, Path] = STOPWORDS_FILE) -> frozenset:
    """Reads one stopword per line."""
    return frozenset(
        line.strip().lower() for line in Path(path).read_text().splitlines() if line.strip()
    )


def tokenize(text: str) -> List[str]:
    """Lowercases and strips punctuation."""
    return re.sub(r"[^a-z0-9\s]", " ", text.lower()).split()


def bigram_frequencies(
    responses: Sequence[ResponseText],
    style: Optional[str] = None,
    stopwords: Optional[frozenset] = None,
) -> List[Tuple[str, int]]:
    """Counts adjacent word pairs in responses, optionally for one style only.

    Bigrams made of two stop words are dropped.

    Returns:
        (bigram, count) pairs sorted by descending count, then alphabetically.
    """
    selected = [r for r in responses if style is None or r.style == style]
    if not selected:
        raise NoResponsesError(f"No responses for style '{style}'")
    stopwords = load_stopwords() if stopwords is None else stopwords

    counts: Counter = Counter()
    for response in selected:
        words = tokenize(response.text)
        for first, second in zip(words, words[1:]):
            if first in stopwords and second in stopwords:
                continue
            counts[f"{first} {second}"] += 1
    return sorted(counts.items(), key=lambda item: (-item[1], item[0]))


def write_bigrams(
    responses: Sequence[ResponseText], styles: Sequence[str], out_dir: Union[str, Path]
) -> List[Path]:
    """Writes one bigram table per style that has responses."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for style in styles:
        try:
            frequencies = bigram_frequencies(responses, style)
        except NoResponsesError:
            logger.warning(f"No responses for style '{style}'; no bigram table written")
            continue
        path = out_dir / f"{style}.csv"
        pd.DataFrame(frequencies, columns=["bigram", "count"]).to_csv(
            path, index=False, lineterminator="\n"
        )
        paths.append(path)
    return paths
