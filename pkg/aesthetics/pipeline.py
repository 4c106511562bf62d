# Copyright 2026 Canonical Ltd.
# See LICENSE file for licensing details.

"""End-to-end analysis pipeline.

Stages run in a fixed order and each one persists its outputs under the run directory before the
next starts, so a failure leaves every completed stage on disk. A stage run on its own loads the
outputs of earlier stages from the run directory.
"""

import hashlib
import json
import logging
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import pandas as pd

from aesthetics import figures, report
from aesthetics.config import PipelineConfig, config_to_dict
from aesthetics.corpus import (
    BOOLEAN_FEATURES,
    COUNT_FEATURES,
    SPLIT_TYPES,
    Corpus,
    aggregate_annotations,
    load_corpus,
    validate_corpus,
)
from aesthetics.ranking import bt_descriptives, bt_scores_frame, fit_styles
from aesthetics.semantics import alignment_frame, alignment_scores
from aesthetics.stats import (
    DesignMatrix,
    FTestResult,
    RankDeficientError,
    RegressionResult,
    StatsError,
    TooFewRowsError,
    ZeroVarianceError,
    distribution_tests,
    nested_f_test,
    ols_fit,
    pearson_corr_matrix,
)
from aesthetics.vision import CV_FEATURE_NAMES, extract_feature_table

logger = logging.getLogger(__name__)

STAGES = ("validate", "extract", "fit-bt", "align", "regress", "report", "figures")
FLOAT_FORMAT = "%.12g"
FAMILY_TABLE_COLUMNS = ("style", "feature", "beta", "std_err", "t", "p", "ci_lo", "ci_hi")


class StageError(Exception):
    """Raised if a pipeline stage fails. The failing stage is kept on `stage`."""

    def __init__(self, *args, stage: str, **kwargs):
        super().__init__(*args, **kwargs)
        self.stage = stage


class MissingStageError(StageError):
    """Raised if a stage needs outputs that no earlier stage has produced."""


def derive_seed(seed: int, stage: str) -> int:
    """Stable per-stage seed derived from the run seed."""
    digest = hashlib.sha256(f"{seed}:{stage}".encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "little")


def sha256_file(path: Path) -> str:
    """Returns the hex sha256 of a file's contents."""
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_json(data, path: Path) -> None:
    """Writes indented JSON with sorted keys."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        json.dump(data, f, indent=2, sort_keys=True, default=float)
        f.write("\n")


def read_json(path: Path):
    """Reads a JSON file."""
    with open(path) as f:
        return json.load(f)


def write_csv(frame: pd.DataFrame, path: Path, index: bool = False) -> None:
    """Writes a table with a fixed float format and newline."""
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=index, lineterminator="\n", float_format=FLOAT_FORMAT)


def style_correlation(bt_scores: pd.DataFrame, styles: Sequence[str]) -> Optional[pd.DataFrame]:
    """Pearson correlation of BT scores between styles, over stimuli scored in every style.

    Styles whose scores are constant are left out with a warning. Returns None when fewer
    than two styles or three stimuli remain.
    """
    table = bt_scores.pivot(index="stimulus_id", columns="style", values="bt_score")
    table = table[[s for s in styles if s in table.columns]].dropna(axis=0)
    columns = {}
    for style in table.columns:
        if table[style].nunique() <= 1:
            logger.warning(f"BT scores of style '{style}' are constant; left out of correlations")
            continue
        columns[style] = table[style].to_numpy(dtype=float)
    if len(columns) < 2:
        logger.warning("Fewer than two styles to correlate; skipping correlation matrix")
        return None
    try:
        return pearson_corr_matrix(columns)
    except (StatsError, ZeroVarianceError) as e:
        logger.warning(f"Skipping correlation matrix: {e}")
        return None


@dataclass
class AlignmentModels:
    """Pooled additive and interaction models of BT score on alignment across styles."""

    styles: List[str]
    additive: RegressionResult
    interaction: RegressionResult
    f_test: FTestResult

    def slopes(self) -> Dict[str, float]:
        """Alignment slope of each style under the interaction model."""
        base = self.interaction.coefficient("mean_cosine").beta
        slopes = {self.styles[0]: base}
        for style in self.styles[1:]:
            slopes[style] = base + self.interaction.coefficient(f"mean_cosine:style[{style}]").beta
        return slopes

    def summary(self) -> dict:
        return {
            "additive": self.additive.summary(),
            "interaction": self.interaction.summary(),
            "f_test": self.f_test.to_dict(),
            "slopes": self.slopes(),
        }


def fit_alignment_models(
    alignment: pd.DataFrame, bt_scores: pd.DataFrame, styles: Sequence[str]
) -> AlignmentModels:
    """Fits BT score on alignment with style dummies, then adds alignment x style terms.

    The first style is the reference level. Raises StatsError if either model cannot be fit.
    """
    styles = list(styles)
    pooled = alignment.merge(bt_scores, on=["stimulus_id", "style"], how="inner")
    pooled = pooled[pooled["style"].isin(styles)].reset_index(drop=True)
    pooled.index = [f"{r.stimulus_id}/{r.style}" for r in pooled.itertuples()]

    dummies = [f"style[{s}]" for s in styles[1:]]
    interactions = [f"mean_cosine:style[{s}]" for s in styles[1:]]
    for style, dummy, interaction in zip(styles[1:], dummies, interactions):
        pooled[dummy] = (pooled["style"] == style).astype(float)
        pooled[interaction] = pooled[dummy] * pooled["mean_cosine"]

    additive_columns = ["mean_cosine"] + dummies
    full_columns = additive_columns + interactions
    y = pooled["bt_score"].to_numpy(dtype=float)
    additive = ols_fit(DesignMatrix.from_frame(pooled, additive_columns, drop_constant=False), y)
    full = ols_fit(DesignMatrix.from_frame(pooled, full_columns, drop_constant=False), y)
    return AlignmentModels(styles, additive, full, nested_f_test(additive, full))


@dataclass
class RunArtifacts:
    """Persisted outputs of every stage, in their on-disk (tabular or plain-data) form."""

    validation: Optional[dict] = None
    designer_features: Optional[pd.DataFrame] = None
    cv_features: Optional[pd.DataFrame] = None
    bt_scores: Optional[pd.DataFrame] = None
    bt_diagnostics: Optional[dict] = None
    bt_descriptives: Optional[pd.DataFrame] = None
    alignment: Optional[pd.DataFrame] = None
    coefficients: Optional[pd.DataFrame] = None
    model_summaries: Optional[dict] = None
    correlation: Optional[pd.DataFrame] = None
    distributions: Optional[dict] = None

    FILES = {
        "validation": "validation.json",
        "designer_features": "features/designer_features.csv",
        "cv_features": "features/cv_features.csv",
        "bt_scores": "bt/bt_scores.csv",
        "bt_diagnostics": "bt/diagnostics.json",
        "bt_descriptives": "bt/descriptives.csv",
        "alignment": "alignment/alignment_scores.csv",
        "coefficients": "regression/coefficients.csv",
        "model_summaries": "regression/summary.json",
        "correlation": "analysis/correlation.csv",
        "distributions": "analysis/distributions.json",
    }
    INDEXED = ("designer_features", "cv_features", "correlation")

    def save(self, run_dir: Path, name: str) -> None:
        value = getattr(self, name)
        path = run_dir / self.FILES[name]
        if isinstance(value, pd.DataFrame):
            write_csv(value, path, index=name in self.INDEXED)
        else:
            write_json(value, path)

    @classmethod
    def load(cls, run_dir: Union[str, Path]) -> "RunArtifacts":
        """Reads whatever outputs exist in a run directory."""
        run_dir = Path(run_dir)
        artifacts = cls()
        for item in fields(cls):
            path = run_dir / cls.FILES[item.name]
            if not path.exists():
                continue
            if path.suffix == ".json":
                value = read_json(path)
            elif item.name in cls.INDEXED:
                value = pd.read_csv(path, index_col=0)
                value.index = value.index.astype(str)
            else:
                value = pd.read_csv(path, dtype={"stimulus_id": str, "style": str})
            setattr(artifacts, item.name, value)
        return artifacts


class Pipeline:
    """Runs the analysis stages for one config and corpus."""

    def __init__(self, config: PipelineConfig, corpus: Optional[Corpus] = None):
        self.config = config
        self._corpus = corpus
        self.run_dir = config.run_dir
        self.artifacts = RunArtifacts()
        self.completed: List[str] = []

    @property
    def corpus(self) -> Corpus:
        if self._corpus is None:
            self._corpus = load_corpus(self.config.corpus)
        return self._corpus

    def run(self, stages: Optional[Sequence[str]] = None) -> RunArtifacts:
        """Runs the given stages (default: all) in pipeline order.

        Raises:
            StageError: naming the stage that failed. Outputs of completed stages and the run
                        manifest are written before it propagates.
        """
        requested = STAGES if stages is None else tuple(stages)
        unknown = [s for s in requested if s not in STAGES]
        if unknown:
            raise StageError(f"Unknown stages {unknown}", stage=unknown[0])

        self.run_dir.mkdir(parents=True, exist_ok=True)
        disk = RunArtifacts.load(self.run_dir)
        self.artifacts = disk

        handlers = {
            "validate": self.validate,
            "extract": self.extract,
            "fit-bt": self.fit_bt,
            "align": self.align,
            "regress": self.regress,
            "report": self.report,
            "figures": self.figures,
        }
        try:
            for stage in STAGES:
                if stage not in requested:
                    continue
                logger.info(f"Running stage '{stage}'")
                try:
                    handlers[stage]()
                except StageError:
                    raise
                except Exception as e:
                    raise StageError(f"Stage '{stage}' failed: {e}", stage=stage) from e
                self.completed.append(stage)
        finally:
            self.write_manifest()
        return self.artifacts

    def _require(self, name: str, stage: str, producer: str):
        value = getattr(self.artifacts, name)
        if value is None:
            raise MissingStageError(
                f"Stage '{stage}' needs output of stage '{producer}', which has not run",
                stage=stage,
            )
        return value

    def _save(self, *names: str) -> None:
        for name in names:
            self.artifacts.save(self.run_dir, name)

    def validate(self) -> None:
        validation = validate_corpus(self.corpus)
        self.artifacts.validation = validation.to_dict()
        self._save("validation")
        if not validation.ok:
            kinds = sorted({finding.kind for finding in validation.issues})
            raise StageError(
                f"Corpus validation found {len(validation.issues)} issues ({', '.join(kinds)})",
                stage="validate",
            )

    def extract(self) -> None:
        corpus = self.corpus
        if corpus.annotations:
            table = aggregate_annotations(corpus.annotations)
            keep = [c for c in table.columns if c in corpus.designer_features]
            self.artifacts.designer_features = table.loc[:, keep]
            self._save("designer_features")
        images = [(stimulus.id, stimulus.image_path) for stimulus in corpus.stimuli]
        self.artifacts.cv_features = extract_feature_table(
            images, self.config.features, workers=self.config.workers
        )
        self._save("cv_features")

    def fit_bt(self) -> None:
        options = self.config.bradley_terry
        results = fit_styles(
            self.corpus.judgments,
            self.corpus.stimulus_ids,
            self.corpus.styles,
            tol=options.tol,
            max_iters=options.max_iters,
            pseudo_count=options.pseudo_count,
            workers=options.workers,
        )
        self.artifacts.bt_scores = bt_scores_frame(results)
        self.artifacts.bt_diagnostics = {s: r.diagnostics() for s, r in results.items()}
        self.artifacts.bt_descriptives = pd.DataFrame(
            [bt_descriptives(result).as_row() for result in results.values()]
        )
        self._save("bt_scores", "bt_diagnostics", "bt_descriptives")

    def align(self) -> None:
        corpus = self.corpus
        scores = alignment_scores(
            corpus.caption_embeddings(),
            corpus.responses,
            corpus.styles,
            stimulus_ids=corpus.stimulus_ids,
        )
        self.artifacts.alignment = alignment_frame(scores)
        self._save("alignment")

    def regress(self) -> None:
        bt_scores = self._require("bt_scores", "regress", "fit-bt")
        rows: List[pd.DataFrame] = []
        summaries: Dict[str, Dict[str, dict]] = {}
        for family in self.config.models:
            summaries[family] = {}
            for style in self.corpus.styles:
                frame, columns = self._family_frame(family, style, bt_scores)
                if frame is None:
                    continue
                summaries[family][style] = self._fit(family, style, frame, columns, rows)

        if "alignment" in self.config.models and self.artifacts.alignment is not None:
            summaries["alignment-models"] = self._alignment_models(bt_scores)

        self.artifacts.coefficients = (
            pd.concat(rows, ignore_index=True) if rows else pd.DataFrame(columns=["family"])
        )
        self.artifacts.model_summaries = summaries
        self._save("coefficients", "model_summaries")
        self._write_family_tables()
        self._analyze(bt_scores)

    def _family_frame(self, family: str, style: str, bt_scores: pd.DataFrame):
        """Joins the predictors of one family with the scores of one style."""
        scores = bt_scores[bt_scores["style"] == style].set_index("stimulus_id")["bt_score"]
        if family in ("designer", "split-type"):
            designer = self._require("designer_features", "regress", "extract")
            if family == "designer":
                columns = [
                    c for c in designer.columns if c in BOOLEAN_FEATURES + COUNT_FEATURES
                ]
                predictors = designer.loc[:, columns]
            else:
                if "split_type" not in designer.columns:
                    logger.warning("No split_type annotations; skipping split-type models")
                    return None, []
                columns = list(SPLIT_TYPES[1:])
                predictors = pd.DataFrame(
                    {c: (designer["split_type"] == c).astype(float) for c in columns},
                    index=designer.index,
                )
        elif family == "cv":
            predictors = self._require("cv_features", "regress", "extract")
            columns = list(CV_FEATURE_NAMES)
        else:
            alignment = self._require("alignment", "regress", "align")
            subset = alignment[alignment["style"] == style].set_index("stimulus_id")
            if subset.empty:
                logger.warning(f"No alignment scores for style '{style}'; skipping its model")
                return None, []
            predictors = subset[["mean_cosine"]]
            columns = ["mean_cosine"]
        predictors = predictors.copy()
        predictors.index = predictors.index.astype(str)
        frame = predictors.join(scores.rename("bt_score"), how="inner")
        return frame, columns

    def _fit(self, family, style, frame, columns, rows) -> dict:
        design = DesignMatrix.from_frame(frame, columns)
        response = frame.loc[list(design.row_ids), "bt_score"].to_numpy(dtype=float)
        try:
            result = ols_fit(design, response, style=style)
        except (RankDeficientError, TooFewRowsError) as e:
            logger.error(f"Skipping {family} model for '{style}': {e}")
            return {"skipped": str(e), "n": len(frame)}
        table = result.to_frame()
        table.insert(0, "family", family)
        rows.append(table)
        return result.summary()

    def _write_family_tables(self) -> None:
        coefficients = self.artifacts.coefficients
        for family, per_style in self.artifacts.model_summaries.items():
            if family == "alignment-models":
                continue
            for style in per_style:
                if coefficients.empty:
                    table = pd.DataFrame(columns=FAMILY_TABLE_COLUMNS)
                else:
                    selected = (coefficients["family"] == family) & (
                        coefficients["style"] == style
                    )
                    table = coefficients.loc[selected, list(FAMILY_TABLE_COLUMNS)]
                write_csv(table, self.run_dir / "regression" / family / f"{style}.csv")

    def _alignment_models(self, bt_scores: pd.DataFrame) -> dict:
        alignment = self.artifacts.alignment
        styles = [s for s in self.corpus.styles if s in set(alignment["style"])]
        if len(styles) < 2:
            return {"skipped": "needs at least two styles with alignment scores"}
        try:
            models = fit_alignment_models(alignment, bt_scores, styles)
        except StatsError as e:
            logger.error(f"Skipping pooled alignment models: {e}")
            return {"skipped": str(e)}
        test = models.f_test
        logger.info(
            f"Alignment interaction F({test.df1},{test.df2}) = {test.f:.3f}, p = {test.p:.4g}"
        )
        return models.summary()

    def _analyze(self, bt_scores: pd.DataFrame) -> None:
        """Style by style correlation of BT scores plus distribution-shape tests per style."""
        self.artifacts.correlation = style_correlation(bt_scores, self.corpus.styles)
        if self.artifacts.correlation is not None:
            self._save("correlation")

        seed = derive_seed(self.config.seed, "distributions")
        reps = self.config.dip.reps
        run_dip, run_shapiro = self.config.dip.enabled, self.config.shapiro.enabled
        distributions = {}
        for style in self.corpus.styles:
            entry = {}
            scores = bt_scores.loc[bt_scores["style"] == style, "bt_score"].to_numpy(dtype=float)
            if len(scores):
                entry["bt"] = distribution_tests(scores, reps, seed, run_dip, run_shapiro)
            if self.artifacts.alignment is not None:
                alignment = self.artifacts.alignment
                cosines = alignment.loc[alignment["style"] == style, "mean_cosine"]
                if len(cosines):
                    entry["cosine"] = distribution_tests(
                        cosines.to_numpy(dtype=float), reps, seed, run_dip, run_shapiro
                    )
            distributions[style] = entry
        self.artifacts.distributions = distributions
        self._save("distributions")

    def report(self) -> None:
        self._require("bt_scores", "report", "fit-bt")
        self._require("model_summaries", "report", "regress")
        report.emit_report(self.artifacts, self.corpus, self.config, self.run_dir / "report")

    def figures(self) -> None:
        self._require("bt_scores", "figures", "fit-bt")
        self._require("model_summaries", "figures", "regress")
        figures.emit_figures(self.artifacts, self.config, self.run_dir / "figures")

    def write_manifest(self) -> Path:
        """Lists every file in the run directory with its sha256, plus seed and stages."""
        path = self.run_dir / "manifest.json"
        files = {
            str(p.relative_to(self.run_dir)): sha256_file(p)
            for p in sorted(self.run_dir.rglob("*"))
            if p.is_file() and p != path
        }
        write_json(
            {
                "seed": self.config.seed,
                "stages_completed": list(self.completed),
                "config": {
                    key: value
                    for key, value in config_to_dict(self.config).items()
                    if key not in ("corpus", "output_dir")
                },
                "files": files,
            },
            path,
        )
        return path


def run_pipeline(
    config: PipelineConfig, stages: Optional[Sequence[str]] = None, corpus: Optional[Corpus] = None
) -> Path:
    """Runs the pipeline and returns the run directory."""
    pipeline = Pipeline(config, corpus)
    pipeline.run(stages)
    logger.info(f"Run finished; outputs in {pipeline.run_dir}")
    return pipeline.run_dir

