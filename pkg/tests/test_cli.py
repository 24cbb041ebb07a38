import time
from pathlib import Path

import pandas as pd
import pytest
import yaml

from traffic_threat_detector import cli
from traffic_threat_detector.constants import CLASS_NAMES, EXIT_DATA_ERROR, EXIT_USAGE_ERROR
from traffic_threat_detector.ppfle import read_corpus

TEST_PER_CLASS = 12
TEST_MODEL_ARGS = [
    "--hidden", "16",
    "--layers", "1",
    "--heads", "2",
    "--intermediate", "32",
    "--max-len", "64",
]


def run(*argv: str) -> None:
    cli.main(list(argv))


def exit_code(*argv: str) -> int:
    with pytest.raises(SystemExit) as excinfo:
        run(*argv)
    return int(excinfo.value.code)


@pytest.fixture
def data_dir(tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> Path:
    """An empty artifact root with no config or data-dir environment leaking in."""
    monkeypatch.delenv("TTD_CONFIG", raising=False)
    monkeypatch.delenv("TTD_DATA_DIR", raising=False)
    return tmp_path / "artifacts"


@pytest.fixture
def encoded(data_dir: Path) -> Path:
    """Synthesized, split and encoded train/eval corpora."""
    d = str(data_dir)
    run("synthesize", "--per-class", str(TEST_PER_CLASS), "--data-dir", d)
    run("split", str(data_dir / "all.csv"), "--data-dir", d)
    run("encode", str(data_dir / "train.csv"), "--data-dir", d)
    run("encode", str(data_dir / "eval.csv"), "--data-dir", d)
    return data_dir


# --- data preparation ---


def test_fetch_defaults_to_all_csv(data_dir: Path, mocker):
    fetch = mocker.patch("traffic_threat_detector.cli.fetch_dataset")
    run("fetch", "--url", "https://example.org/datasets/Edge-IIoTset.csv", "--data-dir", str(data_dir))
    fetch.assert_called_once_with("https://example.org/datasets/Edge-IIoTset.csv", data_dir / "all.csv")


def test_fetch_output_overrides_default(data_dir: Path, tmp_path: Path, mocker):
    fetch = mocker.patch("traffic_threat_detector.cli.fetch_dataset")
    run("fetch", "--url", "https://example.org/data.csv", "--output", str(tmp_path / "raw.csv"), "--data-dir", str(data_dir))
    fetch.assert_called_once_with("https://example.org/data.csv", tmp_path / "raw.csv")


def test_prepare_data(encoded: Path):
    assert len(pd.read_csv(encoded / "all.csv")) == TEST_PER_CLASS * len(CLASS_NAMES)
    train = read_corpus(encoded / "train.corpus.txt", encoded / "train.labels.txt")
    evaluation = read_corpus(encoded / "eval.corpus.txt", encoded / "eval.labels.txt")
    assert len(train) == 10 * len(CLASS_NAMES)
    assert len(evaluation) == 2 * len(CLASS_NAMES)
    assert all(len(line) == 53 for line in train.lines)
    assert all(len(digest) == 64 for digest in train.lines[0].digests)
    assert "Attack Type" in (encoded / "reports" / "distribution.txt").read_text()


def test_encode_unlabeled_csv(encoded: Path, tmp_path: Path):
    frame = pd.read_csv(encoded / "eval.csv", dtype=str, keep_default_na=False).drop(columns=["Attack_type"])
    unlabeled = tmp_path / "unlabeled.csv"
    frame.to_csv(unlabeled, index=False)
    run("encode", str(unlabeled), "--data-dir", str(encoded), "--truncation", "16")
    corpus = read_corpus(encoded / "unlabeled.corpus.txt")
    assert len(corpus) == len(frame)
    assert all(len(digest) == 16 for digest in corpus.lines[0].digests)
    assert not (encoded / "unlabeled.labels.txt").exists()


# --- full pipeline ---


@pytest.mark.slow
def test_train_evaluate_and_infer(encoded: Path, capsys: pytest.CaptureFixture[str]):
    d = str(encoded)
    run("train-tokenizer", "--data-dir", d, "--vocab-size", "400")
    assert (encoded / "tokenizer" / "vocab.json").is_file()

    run("train", "--data-dir", d, "--epochs", "2", "--batch-size", "32", *TEST_MODEL_ARGS)
    assert (encoded / "model.safetensors").is_file()
    history = pd.read_csv(encoded / "reports" / "history.csv")
    assert set(history["split"]) == {"train", "eval"}

    run("eval", "--data-dir", d, "--max-len", "64")
    reports = encoded / "reports"
    report = yaml.safe_load((reports / "report.yaml").read_text())
    assert [c["name"] for c in report["classes"]] == list(CLASS_NAMES)
    assert sum(c["support"] for c in report["classes"]) == 2 * len(CLASS_NAMES)
    assert 0.0 <= report["accuracy"] <= 1.0
    assert (reports / "confusion.csv").is_file()
    assert set(pd.read_csv(reports / "roc.csv")["class"]) == set(CLASS_NAMES)

    capsys.readouterr()
    run("infer", "--data-dir", d, "--max-len", "64", "--csv", str(encoded / "eval.csv"), "--row", "0")
    result = yaml.safe_load(capsys.readouterr().out)
    assert result["prediction"] in CLASS_NAMES
    assert list(result["probabilities"]) == list(CLASS_NAMES)
    assert sum(result["probabilities"].values()) == pytest.approx(1.0, abs=1e-4)

    run("bench", "--data-dir", d, "--max-len", "64", "--n-runs", "3")
    latency = yaml.safe_load((reports / "latency.yaml").read_text())
    assert latency["n_runs"] == 3
    assert latency["includes_tokenization"] is True

    run("esd", "--data-dir", d)
    spectrum = pd.read_csv(reports / "spectrum.csv")
    assert "classifier.weight" in set(spectrum["layer"])
    assert (reports / "esd_histogram.csv").is_file()


# --- desk-scale runs ---

TEST_DESK_PER_CLASS = 500
TEST_DESK_MAX_LEN = "96"
TEST_DESK_MODEL_ARGS = [
    "--hidden", "64",
    "--layers", "2",
    "--heads", "4",
    "--intermediate", "128",
    "--max-len", TEST_DESK_MAX_LEN,
]


def desk_run(data_dir: Path, per_class: int, epochs: int, *train_args: str) -> dict:
    """Synthesize, split, encode with 16-hex digests, fit a 1000-token vocabulary, train and evaluate."""
    d = str(data_dir)
    run("synthesize", "--per-class", str(per_class), "--data-dir", d, "--seed", "7")
    run("split", str(data_dir / "all.csv"), "--data-dir", d, "--seed", "7")
    run("encode", str(data_dir / "train.csv"), "--data-dir", d, "--truncation", "16")
    run("encode", str(data_dir / "eval.csv"), "--data-dir", d, "--truncation", "16")
    run("train-tokenizer", "--data-dir", d, "--vocab-size", "1000")
    run(
        "train",
        "--data-dir", d,
        "--seed", "7",
        "--epochs", str(epochs),
        "--batch-size", "32",
        "--dropout", "0.0",
        *TEST_DESK_MODEL_ARGS,
        *train_args,
    )
    run("eval", "--data-dir", d, "--max-len", TEST_DESK_MAX_LEN)
    return yaml.safe_load((data_dir / "reports" / "report.yaml").read_text())


@pytest.mark.slow
def test_desk_scale_run_reaches_accuracy(data_dir: Path):
    started = time.perf_counter()
    report = desk_run(data_dir, TEST_DESK_PER_CLASS, 10, "--target-accuracy", "0.95")
    elapsed = time.perf_counter() - started
    assert sum(c["support"] for c in report["classes"]) == TEST_DESK_PER_CLASS * len(CLASS_NAMES) // 5
    assert report["accuracy"] >= 0.95
    history = pd.read_csv(data_dir / "reports" / "history.csv")
    assert history[history["split"] == "eval"]["epoch"].max() <= 10
    assert elapsed < 600


@pytest.mark.slow
def test_same_seed_runs_are_identical(tmp_path: Path, data_dir: Path):
    first, second = tmp_path / "first", tmp_path / "second"
    first_report = desk_run(first, 40, 2)
    second_report = desk_run(second, 40, 2)
    for name in ("all.csv", "train.corpus.txt", "eval.corpus.txt", "train.labels.txt"):
        assert (first / name).read_bytes() == (second / name).read_bytes()
    assert (first / "tokenizer" / "merges.txt").read_bytes() == (second / "tokenizer" / "merges.txt").read_bytes()
    assert first_report["accuracy"] == second_report["accuracy"]
    assert first_report["confusion_matrix"] == second_report["confusion_matrix"]
    first_history = pd.read_csv(first / "reports" / "history.csv")
    pd.testing.assert_frame_equal(first_history, pd.read_csv(second / "reports" / "history.csv"))


# --- exit codes ---


def test_unknown_command_is_usage_error(data_dir: Path):
    assert exit_code("no-such-command") == EXIT_USAGE_ERROR


def test_bad_option_value_is_usage_error(data_dir: Path):
    assert exit_code("synthesize", "--per-class", "0", "--data-dir", str(data_dir)) == EXIT_USAGE_ERROR


def test_invalid_config_is_usage_error(data_dir: Path, tmp_path: Path):
    config = tmp_path / "bad.yaml"
    config.write_text("tokenizer:\n  vocabsize: 10\n")
    assert exit_code("synthesize", "--config", str(config), "--data-dir", str(data_dir)) == EXIT_USAGE_ERROR


def test_missing_input_is_data_error(data_dir: Path):
    assert exit_code("train-tokenizer", "--data-dir", str(data_dir)) == EXIT_DATA_ERROR
    assert exit_code("eval", "--data-dir", str(data_dir)) == EXIT_DATA_ERROR


def test_unknown_label_is_data_error(data_dir: Path):
    d = str(data_dir)
    run("synthesize", "--per-class", "2", "--classes", "2", "--data-dir", d)
    frame = pd.read_csv(data_dir / "all.csv", dtype=str, keep_default_na=False)
    frame.loc[0, "Attack_type"] = "Botnet"
    frame.to_csv(data_dir / "all.csv", index=False)
    run("encode", str(data_dir / "all.csv"), "--data-dir", d)
    run("train-tokenizer", "--data-dir", d, "--corpus", str(data_dir / "all.corpus.txt"))
    code = exit_code(
        "train",
        "--data-dir", d,
        "--corpus", str(data_dir / "all.corpus.txt"),
        "--labels", str(data_dir / "all.labels.txt"),
        *TEST_MODEL_ARGS,
    )
    assert code == EXIT_DATA_ERROR
