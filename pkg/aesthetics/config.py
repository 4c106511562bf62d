# Copyright 2026 Canonical Ltd.
# See LICENSE file for licensing details.

"""Pipeline configuration loaded from YAML."""

import dataclasses
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import yaml

from aesthetics.providers import DEFAULT_TOKEN_ENV
from aesthetics.semantics import DEFAULT_PROMPT
from aesthetics.vision import VisionConfig

logger = logging.getLogger(__name__)

MODEL_FAMILIES = ("designer", "cv", "alignment", "split-type")
DEFAULT_MODELS = ("designer", "cv", "alignment")


class ConfigError(Exception):
    """Raised if a configuration file is missing, malformed or holds invalid values."""


@dataclass(frozen=True)
class BradleyTerryConfig:
    """Bradley-Terry fitting options."""

    tol: float = 1e-8
    max_iters: int = 10000
    pseudo_count: float = 0.0
    workers: int = 1


@dataclass(frozen=True)
class DipConfig:
    """Hartigan dip test options."""

    enabled: bool = True
    reps: int = 10000


@dataclass(frozen=True)
class ShapiroConfig:
    """Shapiro-Wilk options."""

    enabled: bool = True


@dataclass(frozen=True)
class ProviderConfig:
    """Caption and embedding endpoints."""

    captions: str = "stub://"
    embeddings: str = "stub://"
    token_env: str = DEFAULT_TOKEN_ENV
    max_in_flight: int = 4
    batch_size: int = 32
    timeout: float = 60.0
    prompt: str = DEFAULT_PROMPT


@dataclass(frozen=True)
class SamplingConfig:
    """t-SNE and k-means options for representative selection."""

    perplexity: float = 30.0
    n_iter: int = 1000
    learning_rate: float = 200.0
    early_exaggeration: float = 12.0
    k: int = 80
    m_total: int = 80
    per_cluster: bool = False
    restarts: int = 10


@dataclass(frozen=True)
class PipelineConfig:
    """Everything a run needs besides the corpus files themselves."""

    corpus: Path
    output_dir: Path = Path("runs")
    seed: int = 0
    alpha: float = 0.05
    workers: int = 1
    features: VisionConfig = field(default_factory=VisionConfig)
    bradley_terry: BradleyTerryConfig = field(default_factory=BradleyTerryConfig)
    models: Tuple[str, ...] = DEFAULT_MODELS
    dip: DipConfig = field(default_factory=DipConfig)
    shapiro: ShapiroConfig = field(default_factory=ShapiroConfig)
    providers: ProviderConfig = field(default_factory=ProviderConfig)
    sampling: SamplingConfig = field(default_factory=SamplingConfig)

    @property
    def run_dir(self) -> Path:
        return self.output_dir / f"run-seed{self.seed}"

    def with_overrides(self, **overrides: Any) -> "PipelineConfig":
        """Returns a copy with CLI overrides applied. None values are ignored."""
        updates = {k: v for k, v in overrides.items() if v is not None and k != "providers"}
        providers = overrides.get("providers") or {}
        providers = {k: v for k, v in providers.items() if v is not None}
        if providers:
            updates["providers"] = dataclasses.replace(self.providers, **providers)
        if "output_dir" in updates:
            updates["output_dir"] = Path(updates["output_dir"])
        return dataclasses.replace(self, **updates)


def _section(cls, data: Optional[Dict[str, Any]], name: str):
    data = data or {}
    if not isinstance(data, dict):
        raise ConfigError(f"Config section '{name}' must be a mapping")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"Unknown keys in config section '{name}': {', '.join(unknown)}")
    try:
        return cls(**data)
    except TypeError as e:
        raise ConfigError(f"Invalid config section '{name}': {e}")


def parse_config(data: Dict[str, Any], base_dir: Optional[Path] = None) -> PipelineConfig:
    """Builds a PipelineConfig from a parsed YAML mapping.

    Relative corpus and output paths resolve against base_dir when given.
    """
    if not isinstance(data, dict):
        raise ConfigError("Config must be a mapping")
    if "corpus" not in data:
        raise ConfigError("Config must name a corpus manifest under 'corpus'")
    top_level = {f.name for f in dataclasses.fields(PipelineConfig)}
    unknown = sorted(set(data) - top_level)
    if unknown:
        raise ConfigError(f"Unknown config keys: {', '.join(unknown)}")

    def resolve(value) -> Path:
        path = Path(value)
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        return path

    models = tuple(data.get("models", DEFAULT_MODELS))
    bad = [m for m in models if m not in MODEL_FAMILIES]
    if bad:
        raise ConfigError(f"Unknown model families {bad}; expected some of {MODEL_FAMILIES}")

    alpha = float(data.get("alpha", 0.05))
    if not 0 < alpha < 1:
        raise ConfigError(f"alpha must lie in (0, 1), got {alpha}")

    config = PipelineConfig(
        corpus=resolve(data["corpus"]),
        output_dir=resolve(data.get("output_dir", "runs")),
        seed=int(data.get("seed", 0)),
        alpha=alpha,
        workers=int(data.get("workers", 1)),
        features=_section(VisionConfig, data.get("features"), "features"),
        bradley_terry=_section(BradleyTerryConfig, data.get("bradley_terry"), "bradley_terry"),
        models=models,
        dip=_section(DipConfig, data.get("dip"), "dip"),
        shapiro=_section(ShapiroConfig, data.get("shapiro"), "shapiro"),
        providers=_section(ProviderConfig, data.get("providers"), "providers"),
        sampling=_section(SamplingConfig, data.get("sampling"), "sampling"),
    )
    if config.dip.reps < 1:
        raise ConfigError("dip.reps must be positive")
    return config


def load_config(path: Union[str, Path]) -> PipelineConfig:
    """Loads a pipeline config. Relative paths inside resolve against the file's directory."""
    path = Path(path)
    try:
        with open(path) as f:
            data = yaml.safe_load(f)
    except FileNotFoundError:
        raise ConfigError(f"Config file '{path}' not found")
    except yaml.YAMLError as e:
        raise ConfigError(f"Config file '{path}' is not valid YAML: {e}")
    config = parse_config(data or {}, base_dir=path.parent)
    logger.debug(f"Loaded config from {path}: {config}")
    return config


def config_to_dict(config: PipelineConfig) -> Dict[str, Any]:
    """Plain-data view of a config, suitable for YAML or JSON output."""

    def plain(value):
        if isinstance(value, Path):
            return str(value)
        if isinstance(value, tuple):
            return [plain(v) for v in value]
        if isinstance(value, dict):
            return {k: plain(v) for k, v in value.items()}
        return value

    return plain(dataclasses.asdict(config))


def write_config(config: PipelineConfig, path: Union[str, Path]) -> None:
    """Writes config as YAML that load_config reads back to an equal config."""
    with open(path, "w") as f:
        yaml.safe_dump(config_to_dict(config), f, sort_keys=False)
