# Copyright 2026 Canonical Ltd.
# See LICENSE file for licensing details.

"""Command line interface: one command per pipeline stage plus corpus utilities."""

import logging
from pathlib import Path
from typing import List, Optional

import typer

from aesthetics.config import ConfigError, PipelineConfig, load_config
from aesthetics.corpus import CorpusError, CorpusManifest, load_corpus, load_stimuli
from aesthetics.pipeline import STAGES, StageError, derive_seed, run_pipeline
from aesthetics.providers import ProviderError, make_provider
from aesthetics.report import ReportError, write_bigrams
from aesthetics.sampling import (
    SamplingError,
    kmeans,
    select_representatives,
    tsne_embed,
    write_sampling,
)
from aesthetics.semantics import SemanticsError, fetch_captions, fetch_embeddings
from aesthetics.synth import PRESETS, SynthError, generate_corpus

logger = logging.getLogger(__name__)

app = typer.Typer(add_completion=False, help="Consumer aesthetic perception analysis.")

DOMAIN_ERRORS = (
    ConfigError,
    CorpusError,
    ProviderError,
    ReportError,
    SamplingError,
    SemanticsError,
    SynthError,
)

CONFIG_OPTION = typer.Option(..., "--config", "-c", help="Path to the pipeline config (YAML)")
OUT_OPTION = typer.Option(None, "--out", help="Output directory; overrides output_dir")
SEED_OPTION = typer.Option(None, "--seed", help="Run seed; overrides seed")


@app.callback()
def main(verbose: bool = typer.Option(False, "--verbose", help="Log at DEBUG level")):
    """Consumer aesthetic perception analysis."""
    logging.basicConfig(level=logging.INFO)
    if verbose:
        logging.getLogger("aesthetics").setLevel(logging.DEBUG)
        logger.debug("Verbose logging enabled")


def _load(
    config: Path,
    out: Optional[Path] = None,
    seed: Optional[int] = None,
    provider_captions: Optional[str] = None,
    provider_embeddings: Optional[str] = None,
) -> PipelineConfig:
    try:
        loaded = load_config(config)
    except ConfigError as e:
        _fail(e)
    return loaded.with_overrides(
        output_dir=out,
        seed=seed,
        providers={"captions": provider_captions, "embeddings": provider_embeddings},
    )


def _fail(error: Exception):
    if isinstance(error, StageError):
        logger.error(f"Stage '{error.stage}' failed: {error}")
    else:
        logger.error(f"{type(error).__name__}: {error}")
    raise typer.Exit(code=1)


def _run(config: PipelineConfig, stages: Optional[List[str]]) -> Path:
    try:
        run_dir = run_pipeline(config, stages)
    except (StageError,) + DOMAIN_ERRORS as e:
        _fail(e)
    typer.echo(str(run_dir))
    return run_dir


@app.command()
def run(
    config: Path = CONFIG_OPTION,
    stage: Optional[List[str]] = typer.Option(
        None, "--stage", help=f"Stage to run; repeatable. One of: {', '.join(STAGES)}"
    ),
    out: Optional[Path] = OUT_OPTION,
    seed: Optional[int] = SEED_OPTION,
    provider_captions: Optional[str] = typer.Option(
        None, "--provider-captions", help="Caption provider URI (stub:// or http(s)://...)"
    ),
    provider_embeddings: Optional[str] = typer.Option(
        None, "--provider-embeddings", help="Embedding provider URI (stub:// or http(s)://...)"
    ),
):
    """Run the full pipeline, or only the given stages."""
    loaded = _load(config, out, seed, provider_captions, provider_embeddings)
    _run(loaded, stage or None)


def _stage_command(name: str, summary: str):
    def command(
        config: Path = CONFIG_OPTION,
        out: Optional[Path] = OUT_OPTION,
        seed: Optional[int] = SEED_OPTION,
    ):
        _run(_load(config, out, seed), [name])

    command.__doc__ = summary
    app.command(name=name)(command)


_stage_command("validate", "Check the corpus for referential and connectivity problems.")
_stage_command("extract", "Aggregate annotations and extract image features.")
_stage_command("fit-bt", "Fit Bradley-Terry scores per style.")
_stage_command("align", "Score caption-criteria alignment per stimulus and style.")
_stage_command("regress", "Fit the regression families, correlations and distribution tests.")
_stage_command("report", "Write the JSON and text summaries.")
_stage_command("figures", "Write the SVG figures.")


@app.command()
def sample(
    config: Path = CONFIG_OPTION,
    out: Optional[Path] = OUT_OPTION,
    seed: Optional[int] = SEED_OPTION,
):
    """Select representative stimuli from the corpus feature-vector pool."""
    loaded = _load(config, out, seed)
    options = loaded.sampling
    try:
        corpus = load_corpus(loaded.corpus)
        if not corpus.feature_vectors:
            raise CorpusError("The corpus manifest names no feature_vectors file")
        embedding = tsne_embed(
            corpus.feature_vectors,
            perplexity=options.perplexity,
            n_iter=options.n_iter,
            learning_rate=options.learning_rate,
            early_exaggeration=options.early_exaggeration,
            seed=derive_seed(loaded.seed, "tsne"),
        )
        clustering = kmeans(
            embedding.coordinates,
            options.k,
            seed=derive_seed(loaded.seed, "kmeans"),
            restarts=options.restarts,
        )
        selected = select_representatives(
            embedding.points, clustering, options.m_total, per_cluster=options.per_cluster
        )
    except DOMAIN_ERRORS as e:
        _fail(e)
    out_dir = loaded.run_dir / "sampling"
    write_sampling(embedding.points, clustering, selected, out_dir)
    logger.info(f"Selected {len(selected)} of {len(embedding.points)} pool items")
    typer.echo(str(out_dir))


@app.command()
def captions(
    config: Path = CONFIG_OPTION,
    provider_captions: Optional[str] = typer.Option(
        None, "--provider-captions", help="Caption provider URI (stub:// or http(s)://...)"
    ),
):
    """Caption every stimulus that has no caption yet."""
    loaded = _load(config, provider_captions=provider_captions)
    providers = loaded.providers
    try:
        manifest = CorpusManifest.load(loaded.corpus)
        if manifest.captions is None:
            raise CorpusError("The corpus manifest names no captions file")
        provider = make_provider(
            providers.captions, manifest.embedding_dim, providers.token_env, providers.timeout
        )
        fetch_captions(
            provider,
            load_stimuli(manifest.stimuli),
            manifest.captions,
            prompt=providers.prompt,
            max_in_flight=providers.max_in_flight,
        )
    except DOMAIN_ERRORS as e:
        _fail(e)


@app.command()
def embed(
    config: Path = CONFIG_OPTION,
    provider_embeddings: Optional[str] = typer.Option(
        None, "--provider-embeddings", help="Embedding provider URI (stub:// or http(s)://...)"
    ),
):
    """Embed captions (keyed by stimulus id) and responses (keyed by content hash)."""
    loaded = _load(config, provider_embeddings=provider_embeddings)
    providers = loaded.providers
    try:
        manifest = CorpusManifest.load(loaded.corpus)
        corpus = load_corpus(loaded.corpus)
        provider = make_provider(
            providers.embeddings, manifest.embedding_dim, providers.token_env, providers.timeout
        )
        captioned = [s for s in corpus.stimuli if s.caption is not None]
        if captioned and manifest.caption_embeddings is not None:
            fetch_embeddings(
                provider,
                [s.caption for s in captioned],
                manifest.caption_embeddings,
                manifest.embedding_dim,
                keys=[s.id for s in captioned],
                batch_size=providers.batch_size,
                max_in_flight=providers.max_in_flight,
            )
        if corpus.responses and manifest.response_embeddings is not None:
            fetch_embeddings(
                provider,
                [r.text for r in corpus.responses],
                manifest.response_embeddings,
                manifest.embedding_dim,
                batch_size=providers.batch_size,
                max_in_flight=providers.max_in_flight,
            )
    except DOMAIN_ERRORS as e:
        _fail(e)


@app.command()
def bigrams(config: Path = CONFIG_OPTION, out: Optional[Path] = OUT_OPTION):
    """Write ranked bigram counts of the free-text responses, one CSV per style."""
    loaded = _load(config, out)
    try:
        corpus = load_corpus(loaded.corpus)
        paths = write_bigrams(corpus.responses, corpus.styles, loaded.run_dir / "bigrams")
    except DOMAIN_ERRORS as e:
        _fail(e)
    for path in paths:
        typer.echo(str(path))


@app.command()
def synth(
    out_dir: Path = typer.Argument(..., help="Directory to write the corpus into"),
    preset: str = typer.Option("mini", "--preset", help=f"One of: {', '.join(PRESETS)}"),
    seed: int = typer.Option(0, "--seed", help="Generator seed"),
):
    """Generate a synthetic corpus with planted ground truth."""
    try:
        config_path = generate_corpus(out_dir, preset=preset, seed=seed)
    except SynthError as e:
        _fail(e)
    typer.echo(str(config_path))


if __name__ == "__main__":
    app()
