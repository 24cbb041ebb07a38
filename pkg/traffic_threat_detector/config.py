"""
Pipeline configuration.

A config document is YAML with optional top-level sections ``paths``,
``schema``, ``hashing``, ``tokenizer``, ``model``, ``training``,
``evaluation`` and a scalar ``seed``. Values may reference environment
variables with the ``!ENV ${VAR}`` tag. Every key is optional; unknown
keys are rejected.

Precedence, highest first: command-line flags, the config document,
environment variables (``TTD_CONFIG`` for the document path,
``TTD_DATA_DIR`` for the artifact root), built-in defaults.
"""

from __future__ import annotations

import argparse
import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any

import yaml
from pyaml_env import parse_config

from .constants import (
    CHECKPOINT_FILENAME,
    CORPUS_FILENAME,
    DEFAULT_BENCH_RUNS,
    DEFAULT_BENCH_WARMUP,
    DEFAULT_CHUNK_SIZE,
    DEFAULT_DATA_DIR,
    DEFAULT_LABEL_COLUMN,
    DEFAULT_MAX_LEN,
    DEFAULT_MIN_FREQUENCY,
    DEFAULT_SEED,
    DEFAULT_TRAIN_RATIO,
    DEFAULT_VOCAB_SIZE,
    ENV_CONFIG_PATH,
    ENV_DATA_DIR,
    HISTORY_FILENAME,
    LABELS_FILENAME,
)
from .errors import BadConfig, ConfigError
from .model import ModelConfig
from .ppfle import HashConfig
from .schema import FeatureSchema, default_schema, load_schema
from .training import TrainConfig


def default_data_dir() -> str:
    return os.environ.get(ENV_DATA_DIR, DEFAULT_DATA_DIR)


@dataclass(frozen=True)
class PathsConfig:
    data_dir: str = field(default_factory=default_data_dir)
    tokenizer_dir: str | None = None
    checkpoint: str | None = None
    reports_dir: str | None = None

    def _resolve(self, value: str | None, default: str) -> Path:
        return Path(value) if value is not None else Path(self.data_dir) / default

    def csv_path(self, split: str) -> Path:
        return Path(self.data_dir) / f"{split}.csv"

    def corpus_path(self, split: str) -> Path:
        return Path(self.data_dir) / f"{split}.{CORPUS_FILENAME}"

    def labels_path(self, split: str) -> Path:
        return Path(self.data_dir) / f"{split}.{LABELS_FILENAME}"

    @property
    def tokenizer_path(self) -> Path:
        return self._resolve(self.tokenizer_dir, "tokenizer")

    @property
    def checkpoint_path(self) -> Path:
        return self._resolve(self.checkpoint, CHECKPOINT_FILENAME)

    @property
    def reports_path(self) -> Path:
        return self._resolve(self.reports_dir, "reports")

    @property
    def history_path(self) -> Path:
        return self.reports_path / HISTORY_FILENAME


@dataclass(frozen=True)
class SchemaConfig:
    path: str | None = None
    excluded: tuple[str, ...] | None = None
    label_column: str = DEFAULT_LABEL_COLUMN
    train_ratio: float = DEFAULT_TRAIN_RATIO

    def __post_init__(self) -> None:
        if not 0.0 < self.train_ratio < 1.0:
            raise BadConfig(f"schema.train_ratio must be strictly between 0 and 1, got {self.train_ratio}")
        if self.excluded is not None:
            object.__setattr__(self, "excluded", tuple(self.excluded))

    def load(self) -> FeatureSchema:
        """The configured schema, or the built-in one, with the configured exclusion list applied."""
        schema = load_schema(self.path) if self.path is not None else default_schema()
        if self.excluded is not None:
            unknown = sorted(set(self.excluded) - set(schema.names))
            if unknown:
                raise BadConfig(f"schema.excluded names unknown column(s): {', '.join(unknown)}")
            schema = schema.with_excluded(self.excluded)
        return schema


@dataclass(frozen=True)
class TokenizerConfig:
    vocab_size: int = DEFAULT_VOCAB_SIZE
    min_frequency: int = DEFAULT_MIN_FREQUENCY
    max_len: int = DEFAULT_MAX_LEN
    chunk_size: int = DEFAULT_CHUNK_SIZE

    def __post_init__(self) -> None:
        if self.min_frequency < 1:
            raise BadConfig(f"tokenizer.min_frequency must be >= 1, got {self.min_frequency}")
        if self.max_len < 2:
            raise BadConfig(f"tokenizer.max_len must be >= 2, got {self.max_len}")
        if self.chunk_size < 1:
            raise BadConfig(f"tokenizer.chunk_size must be >= 1, got {self.chunk_size}")


@dataclass(frozen=True)
class EvaluationConfig:
    bench_runs: int = DEFAULT_BENCH_RUNS
    bench_warmup: int = DEFAULT_BENCH_WARMUP
    histogram_bins: int = 100

    def __post_init__(self) -> None:
        if self.bench_runs < 1:
            raise BadConfig(f"evaluation.bench_runs must be >= 1, got {self.bench_runs}")
        if self.histogram_bins < 1:
            raise BadConfig(f"evaluation.histogram_bins must be >= 1, got {self.histogram_bins}")


SECTIONS: dict[str, type] = {
    "paths": PathsConfig,
    "schema": SchemaConfig,
    "hashing": HashConfig,
    "tokenizer": TokenizerConfig,
    "model": ModelConfig,
    "training": TrainConfig,
    "evaluation": EvaluationConfig,
}


# Keys derived from another setting, which is the one to configure.
TIED_KEYS: dict[tuple[str, str], str] = {
    ("model", "vocab_size"): "tokenizer.vocab_size",
    ("training", "seed"): "seed",
}


@dataclass(frozen=True)
class PipelineConfig:
    paths: PathsConfig = field(default_factory=PathsConfig)
    schema: SchemaConfig = field(default_factory=SchemaConfig)
    hashing: HashConfig = field(default_factory=HashConfig)
    tokenizer: TokenizerConfig = field(default_factory=TokenizerConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    training: TrainConfig = field(default_factory=TrainConfig)
    evaluation: EvaluationConfig = field(default_factory=EvaluationConfig)
    seed: int = DEFAULT_SEED

    def __post_init__(self) -> None:
        # The global seed and tokenizer vocabulary size drive the sections that depend on them.
        if self.training.seed != self.seed:
            object.__setattr__(self, "training", replace(self.training, seed=self.seed))
        if self.model.vocab_size != self.tokenizer.vocab_size:
            object.__setattr__(self, "model", replace(self.model, vocab_size=self.tokenizer.vocab_size))

    def to_dict(self) -> dict[str, Any]:
        document: dict[str, Any] = {}
        for name in SECTIONS:
            section = getattr(self, name)
            document[name] = {
                f.name: _plain(getattr(section, f.name)) for f in fields(section)
                if f.init and (name, f.name) not in TIED_KEYS
            }
        document["seed"] = self.seed
        return document


def _plain(value: Any) -> Any:
    return list(value) if isinstance(value, tuple) else value


def _build_section(name: str, values: Any) -> Any:
    cls = SECTIONS[name]
    if values is None:
        return cls()
    if not isinstance(values, dict):
        raise ConfigError(f"Config section {name!r} must be a mapping")
    known = {f.name for f in fields(cls) if f.init}
    unknown = sorted(set(values) - known)
    if unknown:
        raise ConfigError(f"Unknown config key {name}.{unknown[0]}")
    for key in sorted(values):
        if (name, key) in TIED_KEYS:
            raise ConfigError(f"Unknown config key {name}.{key} (set {TIED_KEYS[name, key]} instead)")
    try:
        return cls(**values)
    except TypeError as e:
        raise ConfigError(f"Invalid value in config section {name!r}: {e}") from e


def config_from_dict(document: dict[str, Any] | None) -> PipelineConfig:
    """
    Builds a validated config from a parsed document.

    :raises ConfigError: On unknown keys or invalid values, naming the dotted key.
    """
    document = document or {}
    if not isinstance(document, dict):
        raise ConfigError("Config document must be a mapping")
    unknown = sorted(set(document) - set(SECTIONS) - {"seed"})
    if unknown:
        raise ConfigError(f"Unknown config key {unknown[0]}")
    sections = {name: _build_section(name, document.get(name)) for name in SECTIONS}
    seed = document.get("seed", DEFAULT_SEED)
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise ConfigError(f"seed must be an integer, got {seed!r}")
    return PipelineConfig(**sections, seed=seed)


def load_pipeline_config(path: Path | str | None = None) -> PipelineConfig:
    """
    Loads a config document, or the defaults when no document is named.

    With ``path`` None, the ``TTD_CONFIG`` environment variable names the
    document if set.

    :raises ConfigError: If the named document does not exist, is malformed or is invalid.
    """
    if path is None:
        path = os.environ.get(ENV_CONFIG_PATH)
    if path is None:
        return PipelineConfig()
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"Config file not found: {path}")
    try:
        document = parse_config(str(path))
    except yaml.YAMLError as e:
        raise ConfigError(f"Config file {path} is not valid YAML: {e}") from e
    return config_from_dict(document)


# Command-line option name -> dotted config key.
OVERRIDES: dict[str, str] = {
    "data_dir": "paths.data_dir",
    "tokenizer_dir": "paths.tokenizer_dir",
    "checkpoint": "paths.checkpoint",
    "reports_dir": "paths.reports_dir",
    "schema": "schema.path",
    "label_column": "schema.label_column",
    "train_ratio": "schema.train_ratio",
    "hash_algorithm": "hashing.algorithm",
    "truncation": "hashing.truncation",
    "vocab_size": "tokenizer.vocab_size",
    "min_frequency": "tokenizer.min_frequency",
    "max_len": "tokenizer.max_len",
    "chunk_size": "tokenizer.chunk_size",
    "hidden": "model.hidden",
    "layers": "model.layers",
    "heads": "model.heads",
    "intermediate": "model.intermediate",
    "dropout": "model.dropout",
    "epochs": "training.epochs",
    "batch_size": "training.batch_size",
    "learning_rate": "training.learning_rate",
    "optimizer": "training.optimizer",
    "eval_every": "training.eval_every",
    "target_accuracy": "training.target_accuracy",
    "n_runs": "evaluation.bench_runs",
    "warmup": "evaluation.bench_warmup",
    "bins": "evaluation.histogram_bins",
}


def apply_overrides(config: PipelineConfig, args: argparse.Namespace) -> PipelineConfig:
    """
    Copies every non-None command-line value over the loaded config.

    Options absent from ``args`` are ignored, so each subcommand only
    overrides what it defines.
    """
    updates: dict[str, dict[str, Any]] = {}
    for option, key in OVERRIDES.items():
        value = getattr(args, option, None)
        if value is None:
            continue
        section, name = key.split(".")
        updates.setdefault(section, {})[name] = str(value) if isinstance(value, Path) else value
    sections = {name: replace(getattr(config, name), **values) for name, values in updates.items()}
    seed = getattr(args, "seed", None)
    return replace(config, **sections, seed=config.seed if seed is None else seed)
