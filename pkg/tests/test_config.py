"""
Unit tests for pipeline configuration loading, validation and command-line overrides.
"""

import argparse
from collections.abc import Generator
from pathlib import Path

import pytest
from pytest import MonkeyPatch

from traffic_threat_detector.config import (
    PathsConfig,
    PipelineConfig,
    SchemaConfig,
    apply_overrides,
    config_from_dict,
    load_pipeline_config,
)
from traffic_threat_detector.errors import BadConfig, ConfigError

# Constants for testing
ENV_CONFIG_NAME = "TTD_CONFIG"
ENV_DATA_DIR_NAME = "TTD_DATA_DIR"
TEST_DATA_DIR_ENV = "/data/from-env"
TEST_DATA_DIR_ARG = "/data/from-arg"


@pytest.fixture(autouse=True)
def clean_env_vars(monkeypatch: MonkeyPatch) -> Generator[None, None, None]:
    """
    Fixture to ensure relevant environment variables are cleaned before/after each test.
    Using autouse=True to apply it automatically to all tests in this module.
    """
    monkeypatch.delenv(ENV_CONFIG_NAME, raising=False)
    monkeypatch.delenv(ENV_DATA_DIR_NAME, raising=False)
    yield


@pytest.fixture
def config_file(tmp_path: Path) -> Path:
    """Writes a small config document and returns its path."""
    path = tmp_path / "pipeline.config.yaml"
    path.write_text(
        "paths:\n"
        "  data_dir: !ENV ${TEST_PIPELINE_DIR}\n"
        "tokenizer:\n"
        "  vocab_size: 1000\n"
        "training:\n"
        "  epochs: 3\n"
        "  optimizer: sgd\n"
        "seed: 9\n"
    )
    return path


# --- Tests for load_pipeline_config ---


def test_defaults_without_document() -> None:
    """Verify the built-in defaults apply when no document is named."""
    config = load_pipeline_config()
    assert config == PipelineConfig()
    assert config.paths.data_dir == "artifacts"
    assert config.tokenizer.vocab_size == 5000
    assert config.model.hidden == 128
    assert config.training.epochs == 4
    assert config.seed == 42


def test_data_dir_from_env(monkeypatch: MonkeyPatch) -> None:
    """Verify TTD_DATA_DIR sets the artifact root."""
    monkeypatch.setenv(ENV_DATA_DIR_NAME, TEST_DATA_DIR_ENV)
    config = load_pipeline_config()
    assert config.paths.data_dir == TEST_DATA_DIR_ENV
    assert config.paths.checkpoint_path == Path(TEST_DATA_DIR_ENV) / "model.safetensors"


def test_load_document_with_env_tag(config_file: Path, monkeypatch: MonkeyPatch) -> None:
    """Verify document values, including !ENV references, are loaded."""
    monkeypatch.setenv("TEST_PIPELINE_DIR", "/srv/ttd")
    config = load_pipeline_config(config_file)
    assert config.paths.data_dir == "/srv/ttd"
    assert config.tokenizer.vocab_size == 1000
    assert config.training.epochs == 3
    assert config.training.optimizer == "sgd"
    assert config.seed == 9


def test_document_path_from_env(config_file: Path, monkeypatch: MonkeyPatch) -> None:
    """Verify TTD_CONFIG names the document when no path is given."""
    monkeypatch.setenv("TEST_PIPELINE_DIR", "/srv/ttd")
    monkeypatch.setenv(ENV_CONFIG_NAME, str(config_file))
    assert load_pipeline_config().training.epochs == 3


def test_tied_settings_follow_their_source(config_file: Path, monkeypatch: MonkeyPatch) -> None:
    """Verify the model vocabulary and training seed follow tokenizer.vocab_size and seed."""
    monkeypatch.setenv("TEST_PIPELINE_DIR", "/srv/ttd")
    config = load_pipeline_config(config_file)
    assert config.model.vocab_size == 1000
    assert config.training.seed == 9


def test_missing_document_raises_error(tmp_path: Path) -> None:
    with pytest.raises(ConfigError, match="not found"):
        load_pipeline_config(tmp_path / "absent.yaml")


def test_malformed_yaml_raises_error(tmp_path: Path) -> None:
    path = tmp_path / "bad.yaml"
    path.write_text("tokenizer: [unclosed\n")
    with pytest.raises(ConfigError):
        load_pipeline_config(path)


# --- Tests for config_from_dict ---


def test_unknown_key_is_named() -> None:
    with pytest.raises(ConfigError, match="Unknown config key tokenizer.vocabsize"):
        config_from_dict({"tokenizer": {"vocabsize": 10}})
    with pytest.raises(ConfigError, match="Unknown config key colour"):
        config_from_dict({"colour": "red"})


def test_tied_key_is_rejected() -> None:
    with pytest.raises(ConfigError, match="tokenizer.vocab_size"):
        config_from_dict({"model": {"vocab_size": 10}})


def test_invalid_values_raise_error() -> None:
    with pytest.raises(BadConfig):
        config_from_dict({"model": {"hidden": 128, "heads": 3}})
    with pytest.raises(BadConfig):
        config_from_dict({"schema": {"train_ratio": 1.0}})
    with pytest.raises(ConfigError):
        config_from_dict({"seed": "forty-two"})


def test_to_dict_reloads_to_same_config() -> None:
    config = config_from_dict({"tokenizer": {"vocab_size": 800}, "training": {"betas": [0.8, 0.9]}, "seed": 3})
    document = config.to_dict()
    assert "vocab_size" not in document["model"]
    assert "seed" not in document["training"]
    assert config_from_dict(document) == config


def test_schema_config_exclusions() -> None:
    schema = SchemaConfig(excluded=("tcp.len",)).load()
    assert schema.excluded == frozenset({"tcp.len"})
    with pytest.raises(BadConfig):
        SchemaConfig(excluded=("no.such.column",)).load()


def test_split_paths() -> None:
    paths = PathsConfig(data_dir="/d")
    assert paths.csv_path("train") == Path("/d/train.csv")
    assert paths.corpus_path("eval") == Path("/d/eval.corpus.txt")
    assert paths.labels_path("eval") == Path("/d/eval.labels.txt")
    assert paths.tokenizer_path == Path("/d/tokenizer")
    assert paths.history_path == Path("/d/reports/history.csv")
    assert PathsConfig(data_dir="/d", reports_dir="/r").reports_path == Path("/r")


# --- Tests for apply_overrides ---


def test_args_override_document(config_file: Path, monkeypatch: MonkeyPatch) -> None:
    """Verify command-line values take precedence over the document."""
    monkeypatch.setenv("TEST_PIPELINE_DIR", "/srv/ttd")
    args = argparse.Namespace(data_dir=TEST_DATA_DIR_ARG, epochs=5, vocab_size=600, seed=1, checkpoint=Path("/m.st"))
    config = apply_overrides(load_pipeline_config(config_file), args)
    assert config.paths.data_dir == TEST_DATA_DIR_ARG
    assert config.paths.checkpoint == "/m.st"
    assert config.training.epochs == 5
    assert config.training.optimizer == "sgd"
    assert config.tokenizer.vocab_size == 600
    assert config.model.vocab_size == 600
    assert config.seed == 1
    assert config.training.seed == 1


def test_absent_and_none_args_are_ignored() -> None:
    config = PipelineConfig()
    assert apply_overrides(config, argparse.Namespace(epochs=None)) == config


def test_invalid_override_raises_error() -> None:
    with pytest.raises(BadConfig):
        apply_overrides(PipelineConfig(), argparse.Namespace(heads=5))


def test_target_accuracy_override() -> None:
    config = apply_overrides(PipelineConfig(), argparse.Namespace(target_accuracy=0.95))
    assert config.training.target_accuracy == 0.95
    assert PipelineConfig().training.target_accuracy is None
