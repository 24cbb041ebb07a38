"""
Command line entry point: one executable with a subcommand per pipeline stage.

A typical desk-scale run::

    traffic-threat-detector synthesize --per-class 500 --output artifacts/all.csv
    traffic-threat-detector split artifacts/all.csv
    traffic-threat-detector encode artifacts/train.csv
    traffic-threat-detector encode artifacts/eval.csv
    traffic-threat-detector train-tokenizer --vocab-size 1000
    traffic-threat-detector train --hidden 64 --epochs 10
    traffic-threat-detector eval

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 internal error. Diagnostics go to standard error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
import pandas as pd
import yaml

from . import evaluation, spectrum
from .config import PipelineConfig, apply_overrides, load_pipeline_config
from .constants import (
    CLASS_NAMES,
    DEFAULT_BATCH_SIZE,
    DEFAULT_BENCH_RUNS,
    DEFAULT_BENCH_WARMUP,
    DEFAULT_CHUNK_SIZE,
    DEFAULT_DATA_DIR,
    DEFAULT_DROPOUT,
    DEFAULT_EPOCHS,
    DEFAULT_EVAL_EVERY,
    DEFAULT_HEADS,
    DEFAULT_HIDDEN,
    DEFAULT_INTERMEDIATE,
    DEFAULT_LABEL_COLUMN,
    DEFAULT_LAYERS,
    DEFAULT_LEARNING_RATE,
    DEFAULT_MAX_LEN,
    DEFAULT_MIN_FREQUENCY,
    DEFAULT_OPTIMIZER,
    DEFAULT_SEED,
    DEFAULT_TRAIN_RATIO,
    DEFAULT_VOCAB_SIZE,
    ENV_CONFIG_PATH,
    ENV_DATA_DIR,
    ESD_HISTOGRAM_FILENAME,
    EXIT_INTERNAL_ERROR,
    EXIT_USAGE_ERROR,
    LATENCY_FILENAME,
    ROC_FILENAME,
    SPECTRUM_FILENAME,
)
from .errors import BadConfig, DataError, DetectorError, EmptyCorpus, VocabMismatch
from .ingest import (
    FeatureTable,
    distribution_report,
    drop_excluded,
    fetch_dataset,
    generate_synthetic,
    load_csv,
    split_train_eval,
    write_csv,
)
from .flows import extract_flows
from .logger import Logger, package_logger
from .model import ClassifierModel, build, load_checkpoint, save_checkpoint, summary_table
from .ppfle import DataList, encode_table, read_corpus, write_corpus
from .schema import FeatureSchema, label_index, label_name
from .tokenizer import (
    BpeTrainer,
    EncodedBatch,
    TokenizerModel,
    encode_chunked,
    load_tokenizer,
    save_tokenizer,
    sequence_length_stats,
)
from .training import Trainer, history_to_csv, predict
from .utils import fail_hard, non_negative_int, positive_float, positive_int, unit_fraction

CAPTURE_SUFFIXES = (".pcap", ".cap", ".pcapng", ".dmp")


class PipelineRunner:
    """
    Runs one subcommand against a resolved pipeline config.
    """

    def __init__(self, config: PipelineConfig, debug: bool = False) -> None:
        """
        :param config: Fully resolved config (file values with command-line overrides applied).
        :type config: PipelineConfig
        :param debug: Enable debug logging.
        :type debug: bool
        """
        self.config = config
        self.debug = debug
        self.log: logging.Logger = Logger(self.__class__.__name__, debug=debug)

    @property
    def schema(self) -> FeatureSchema:
        return self.config.schema.load()

    def fetch(self, url: str, output: Path | None) -> None:
        destination = output or self.config.paths.csv_path("all")
        fetch_dataset(url, destination)
        self.log.info(f"Saved dataset to {destination}")

    def synthesize(self, per_class: int, classes: int, output: Path | None) -> None:
        output = output or self.config.paths.csv_path("all")
        table = generate_synthetic(per_class, classes, self.schema, self.config.seed)
        self._write_table(table, output)
        self.log.info(f"Wrote {len(table)} synthetic rows ({classes} classes x {per_class}) to {output}")

    def extract(self, source: Path, output: Path, window: float | None) -> None:
        if source.suffix.lower() in CAPTURE_SUFFIXES:
            table = extract_flows(source, window, self.schema, debug=self.debug)
        else:
            table = self._load_csv_optional_labels(source)
        self._write_table(table, output)
        self.log.info(f"Wrote {len(table)} rows x {len(table.schema)} columns to {output}")

    def split(self, source: Path, train_output: Path | None, eval_output: Path | None) -> None:
        table = self._load_labeled_csv(source)
        train, evaluation_table = split_train_eval(table, self.config.schema.train_ratio, self.config.seed)
        self._write_table(train, train_output or self.config.paths.csv_path("train"))
        self._write_table(evaluation_table, eval_output or self.config.paths.csv_path("eval"))
        report = distribution_report(train, evaluation_table)
        reports = self.config.paths.reports_path
        reports.mkdir(parents=True, exist_ok=True)
        (reports / "distribution.txt").write_text(report + "\n", encoding="utf-8")
        self.log.info(f"Split {len(table)} rows into {len(train)} train / {len(evaluation_table)} eval\n{report}")

    def encode(self, source: Path, output: Path | None, labels_output: Path | None) -> None:
        table = self._load_csv_optional_labels(source)
        data = encode_table(drop_excluded(table), self.config.hashing)
        output = output or self.config.paths.corpus_path(source.stem)
        if data.labels is not None:
            labels_output = labels_output or self.config.paths.labels_path(source.stem)
        else:
            labels_output = None
        output.parent.mkdir(parents=True, exist_ok=True)
        write_corpus(data, output, labels_output)
        self.log.info(
            f"Encoded {len(data)} rows into {output}"
            + (f" with labels in {labels_output}" if labels_output else "")
        )

    def train_tokenizer(self, corpus: Path | None, output_dir: Path | None) -> None:
        corpus = corpus or self.config.paths.corpus_path("train")
        data = read_corpus(corpus)
        settings = self.config.tokenizer
        trainer = BpeTrainer(settings.vocab_size, settings.min_frequency, debug=self.debug)
        tok = trainer.train(data.texts())
        output_dir = output_dir or self.config.paths.tokenizer_path
        save_tokenizer(tok, output_dir)
        stats = sequence_length_stats(tok, data.texts())
        self.log.info(
            f"Saved tokenizer with {len(tok)} tokens to {output_dir}; sequence lengths "
            f"min={stats['min']} max={stats['max']} mean={stats['mean']:.1f}"
        )
        if stats["max"] > settings.max_len:
            self.log.warning(f"Longest line has {stats['max']} tokens and will be truncated to {settings.max_len}")

    def train(self, corpus: Path | None, labels: Path | None, eval_corpus: Path | None, eval_labels: Path | None) -> None:
        paths = self.config.paths
        tok = load_tokenizer(paths.tokenizer_path)
        train_batch, train_targets = self._encode_labeled(tok, corpus or paths.corpus_path("train"), labels or paths.labels_path("train"))
        eval_corpus = eval_corpus or paths.corpus_path("eval")
        eval_batch, eval_targets = None, None
        if eval_corpus.is_file():
            eval_batch, eval_targets = self._encode_labeled(tok, eval_corpus, eval_labels or paths.labels_path("eval"))
        else:
            self.log.info(f"No evaluation corpus at {eval_corpus}; training without evaluation")

        model_config = replace(self.config.model, vocab_size=tok.vocab_size)
        if self.config.tokenizer.max_len > model_config.max_position:
            raise BadConfig(
                f"tokenizer.max_len ({self.config.tokenizer.max_len}) exceeds model.max_position ({model_config.max_position})"
            )
        model = build(model_config, self.config.seed)
        self.log.info(f"Model configuration:\n{summary_table(model)}")
        trainer = Trainer(model, self.config.training, progress=sys.stderr.isatty(), debug=self.debug)
        model, history = trainer.train(train_batch, train_targets, eval_batch, eval_targets)

        save_checkpoint(model, paths.checkpoint_path)
        paths.reports_path.mkdir(parents=True, exist_ok=True)
        history_to_csv(history, paths.history_path)
        self.log.info(f"Saved checkpoint to {paths.checkpoint_path} and history to {paths.history_path}")

    def evaluate(self, corpus: Path | None, labels: Path | None) -> None:
        paths = self.config.paths
        model, tok = self._load_model_and_tokenizer()
        batch, targets = self._encode_labeled(tok, corpus or paths.corpus_path("eval"), labels or paths.labels_path("eval"))
        predictions, probabilities = predict(model, batch, self.config.training.batch_size)
        report = evaluation.classification_report(targets, predictions, probabilities)
        reports = paths.reports_path
        evaluation.write_report(report, reports)
        evaluation.roc_curves_csv(targets, probabilities, reports / ROC_FILENAME)
        self.log.info(f"Evaluation on {len(batch)} samples:\n{evaluation.render_report(report)}")

    def infer(self, line: str | None, csv_path: Path | None, row: int) -> None:
        model, tok = self._load_model_and_tokenizer()
        if line is None:
            if csv_path is None:
                raise BadConfig("infer needs either --line or --csv")
            table = load_csv(csv_path, self.schema)
            if not 0 <= row < len(table):
                raise DataError(f"Row {row} is out of range for {csv_path} ({len(table)} rows)")
            line = encode_table(drop_excluded(table.take([row])), self.config.hashing).texts()[0]
        settings = self.config.tokenizer
        predicted, probabilities = predict(model, encode_chunked(tok, [line], settings.chunk_size, settings.max_len))
        result = {
            "prediction": label_name(int(predicted[0])),
            "probabilities": {name: round(float(p), 6) for name, p in zip(CLASS_NAMES, probabilities[0])},
        }
        sys.stdout.write(yaml.safe_dump(result, sort_keys=False))

    def bench(self, corpus: Path | None, threads: int) -> None:
        model, tok = self._load_model_and_tokenizer()
        corpus = corpus or self.config.paths.corpus_path("eval")
        data = read_corpus(corpus)
        if not len(data):
            raise EmptyCorpus(f"{corpus} has no lines to benchmark with")
        report = evaluation.bench_inference(
            model,
            tok,
            data.lines[0].render(),
            n_runs=self.config.evaluation.bench_runs,
            warmup=self.config.evaluation.bench_warmup,
            max_len=self.config.tokenizer.max_len,
            threads=threads,
        )
        reports = self.config.paths.reports_path
        reports.mkdir(parents=True, exist_ok=True)
        evaluation.write_latency(report, reports / LATENCY_FILENAME)

    def esd(self) -> None:
        model = load_checkpoint(self.config.paths.checkpoint_path)
        report = spectrum.esd_alpha(model)
        reports = self.config.paths.reports_path
        reports.mkdir(parents=True, exist_ok=True)
        spectrum.spectrum_csv(report, reports / SPECTRUM_FILENAME)
        spectrum.esd_histograms_csv(report, reports / ESD_HISTOGRAM_FILENAME, bins=self.config.evaluation.histogram_bins)
        for layer in report.layers:
            alpha = f"{layer.alpha:.3f} ({layer.quality})" if layer.alpha is not None else "n/a"
            self.log.info(f"{layer.name} {layer.shape}: alpha={alpha} lambda_max={layer.lambda_max:.4f}")

    def _write_table(self, table: FeatureTable, output: Path) -> None:
        output.parent.mkdir(parents=True, exist_ok=True)
        write_csv(table, output, self.config.schema.label_column)

    def _load_labeled_csv(self, source: Path) -> FeatureTable:
        return load_csv(source, self.schema, label_column=self.config.schema.label_column)

    def _load_csv_optional_labels(self, source: Path) -> FeatureTable:
        label_column = self.config.schema.label_column
        if source.is_file() and label_column not in pd.read_csv(source, nrows=0, dtype=str).columns:
            self.log.debug(f"{source} has no {label_column} column; encoding without labels")
            return load_csv(source, self.schema)
        return self._load_labeled_csv(source)

    def _encode_labeled(self, tok: TokenizerModel, corpus: Path, labels: Path) -> tuple[EncodedBatch, np.ndarray]:
        data: DataList = read_corpus(corpus, labels)
        if not len(data):
            raise EmptyCorpus(f"{corpus} is empty")
        settings = self.config.tokenizer
        batch = encode_chunked(tok, data.texts(), settings.chunk_size, settings.max_len)
        targets = np.array([label_index(label) for label in data.labels or ()], dtype=np.int64)
        return batch, targets

    def _load_model_and_tokenizer(self) -> tuple[ClassifierModel, TokenizerModel]:
        model = load_checkpoint(self.config.paths.checkpoint_path)
        tok = load_tokenizer(self.config.paths.tokenizer_path)
        if model.config.vocab_size != tok.vocab_size or len(tok) > model.config.vocab_size:
            raise VocabMismatch(
                f"Checkpoint vocab size {model.config.vocab_size} does not match tokenizer vocab size "
                f"{tok.vocab_size} ({len(tok)} tokens)"
            )
        if self.config.tokenizer.max_len > model.config.max_position:
            raise BadConfig(
                f"tokenizer.max_len ({self.config.tokenizer.max_len}) exceeds the checkpoint's "
                f"max_position ({model.config.max_position})"
            )
        return model, tok


class ArgumentParser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        fail_hard(f"{self.prog}: error: {message}", EXIT_USAGE_ERROR)


def _default(value: object) -> str:
    return f" (default: {value})"


def parse_arguments(argv: list[str] | None = None) -> argparse.Namespace:
    common = ArgumentParser(add_help=False)
    common.add_argument(
        "--config",
        type=Path,
        default=argparse.SUPPRESS,
        help=f"Pipeline config YAML (also can be provided as {ENV_CONFIG_PATH} environment variable)",
    )
    common.add_argument(
        "--data-dir",
        type=str,
        default=argparse.SUPPRESS,
        help=f"Artifact root directory (also can be provided as {ENV_DATA_DIR} environment variable)"
        + _default(DEFAULT_DATA_DIR),
    )
    common.add_argument("--tokenizer-dir", type=str, default=argparse.SUPPRESS, help="Tokenizer directory" + _default("<data-dir>/tokenizer"))
    common.add_argument("--checkpoint", type=str, default=argparse.SUPPRESS, help="Model checkpoint file" + _default("<data-dir>/model.safetensors"))
    common.add_argument("--reports-dir", type=str, default=argparse.SUPPRESS, help="Report output directory" + _default("<data-dir>/reports"))
    common.add_argument("--schema", type=str, default=argparse.SUPPRESS, help="Feature schema YAML" + _default("built-in 61-column schema"))
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="Global random seed" + _default(DEFAULT_SEED))
    common.add_argument("--debug", action="store_true", help="Enable debug logging")

    tokenizer_options = ArgumentParser(add_help=False)
    tokenizer_options.add_argument("--max-len", type=positive_int, default=argparse.SUPPRESS, help="Maximum sequence length in tokens" + _default(DEFAULT_MAX_LEN))
    tokenizer_options.add_argument("--chunk-size", type=positive_int, default=argparse.SUPPRESS, help="Lines encoded per chunk" + _default(DEFAULT_CHUNK_SIZE))

    hashing_options = ArgumentParser(add_help=False)
    hashing_options.add_argument("--hash-algorithm", type=str, default=argparse.SUPPRESS, help="Cell digest algorithm" + _default("sha256"))
    hashing_options.add_argument("--truncation", type=positive_int, default=argparse.SUPPRESS, help="Keep this many hex characters of each digest" + _default("full digest"))

    parser = ArgumentParser(
        description="Privacy-preserving transformer classifier for IoT network traffic.",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    commands = parser.add_subparsers(dest="command", required=True, metavar="command")

    def command(name: str, help_text: str, *parents: argparse.ArgumentParser) -> argparse.ArgumentParser:
        return commands.add_parser(name, help=help_text, description=help_text, parents=[common, *parents])

    fetch = command("fetch", "Download a dataset CSV, retrying transient failures.")
    fetch.add_argument("--url", required=True, help="Dataset URL")
    fetch.add_argument("--output", type=Path, default=None, help="Destination file" + _default("<data-dir>/all.csv"))

    synthesize = command("synthesize", "Generate a seeded synthetic labeled dataset.")
    synthesize.add_argument("--per-class", type=positive_int, default=500, help="Rows per class (default: %(default)s)")
    synthesize.add_argument("--classes", type=positive_int, default=len(CLASS_NAMES), help="Number of classes (default: %(default)s)")
    synthesize.add_argument("--output", type=Path, default=None, help="Output CSV" + _default("<data-dir>/all.csv"))

    extract = command("extract", "Extract schema-ordered features from a pcap capture or feature CSV.")
    extract.add_argument("input", type=Path, help="Capture (.pcap) or feature CSV")
    extract.add_argument("--output", type=Path, required=True, help="Output CSV")
    extract.add_argument("--window", type=positive_float, default=None, help="Flow window in seconds" + _default("whole capture"))
    extract.add_argument("--label-column", type=str, default=argparse.SUPPRESS, help="Label column of CSV input" + _default(DEFAULT_LABEL_COLUMN))

    split = command("split", "Stratified train/eval split of a labeled feature CSV.")
    split.add_argument("input", type=Path, help="Labeled feature CSV")
    split.add_argument("--train-ratio", type=unit_fraction, default=argparse.SUPPRESS, help="Training fraction" + _default(DEFAULT_TRAIN_RATIO))
    split.add_argument("--train-output", type=Path, default=None, help="Training CSV" + _default("<data-dir>/train.csv"))
    split.add_argument("--eval-output", type=Path, default=None, help="Evaluation CSV" + _default("<data-dir>/eval.csv"))
    split.add_argument("--label-column", type=str, default=argparse.SUPPRESS, help="Label column" + _default(DEFAULT_LABEL_COLUMN))

    encode = command("encode", "Hash a feature CSV into a privacy-preserving corpus.", hashing_options)
    encode.add_argument("input", type=Path, help="Feature CSV")
    encode.add_argument("--output", type=Path, default=None, help="Corpus file" + _default("<data-dir>/<input stem>.corpus.txt"))
    encode.add_argument("--labels-output", type=Path, default=None, help="Label sidecar" + _default("<data-dir>/<input stem>.labels.txt"))
    encode.add_argument("--label-column", type=str, default=argparse.SUPPRESS, help="Label column" + _default(DEFAULT_LABEL_COLUMN))

    train_tokenizer = command("train-tokenizer", "Train the byte-level BPE tokenizer on a corpus.", tokenizer_options)
    train_tokenizer.add_argument("--corpus", type=Path, default=None, help="Training corpus" + _default("<data-dir>/train.corpus.txt"))
    train_tokenizer.add_argument("--vocab-size", type=positive_int, default=argparse.SUPPRESS, help="Vocabulary size" + _default(DEFAULT_VOCAB_SIZE))
    train_tokenizer.add_argument("--min-frequency", type=positive_int, default=argparse.SUPPRESS, help="Minimum pair frequency" + _default(DEFAULT_MIN_FREQUENCY))

    train = command("train", "Train the classifier on an encoded corpus.", tokenizer_options)
    train.add_argument("--corpus", type=Path, default=None, help="Training corpus" + _default("<data-dir>/train.corpus.txt"))
    train.add_argument("--labels", type=Path, default=None, help="Training labels" + _default("<data-dir>/train.labels.txt"))
    train.add_argument("--eval-corpus", type=Path, default=None, help="Evaluation corpus" + _default("<data-dir>/eval.corpus.txt"))
    train.add_argument("--eval-labels", type=Path, default=None, help="Evaluation labels" + _default("<data-dir>/eval.labels.txt"))
    train.add_argument("--hidden", type=positive_int, default=argparse.SUPPRESS, help="Hidden size" + _default(DEFAULT_HIDDEN))
    train.add_argument("--layers", type=positive_int, default=argparse.SUPPRESS, help="Encoder layers" + _default(DEFAULT_LAYERS))
    train.add_argument("--heads", type=positive_int, default=argparse.SUPPRESS, help="Attention heads" + _default(DEFAULT_HEADS))
    train.add_argument("--intermediate", type=positive_int, default=argparse.SUPPRESS, help="Feed-forward size" + _default(DEFAULT_INTERMEDIATE))
    train.add_argument("--dropout", type=float, default=argparse.SUPPRESS, help="Dropout rate" + _default(DEFAULT_DROPOUT))
    train.add_argument("--epochs", type=positive_int, default=argparse.SUPPRESS, help="Training epochs" + _default(DEFAULT_EPOCHS))
    train.add_argument("--batch-size", type=positive_int, default=argparse.SUPPRESS, help="Batch size" + _default(DEFAULT_BATCH_SIZE))
    train.add_argument("--learning-rate", type=float, default=argparse.SUPPRESS, help="Learning rate" + _default(DEFAULT_LEARNING_RATE))
    train.add_argument("--optimizer", choices=("adamw", "adam", "sgd"), default=argparse.SUPPRESS, help="Optimizer" + _default(DEFAULT_OPTIMIZER))
    train.add_argument("--eval-every", type=non_negative_int, default=argparse.SUPPRESS, help="Evaluate every N steps, 0 for once per epoch" + _default(DEFAULT_EVAL_EVERY))
    train.add_argument(
        "--target-accuracy",
        type=unit_fraction,
        default=argparse.SUPPRESS,
        help="Stop once eval accuracy reaches this value" + _default("train all epochs"),
    )

    evaluate = command("eval", "Evaluate a checkpoint and write the classification report.", tokenizer_options)
    evaluate.add_argument("--corpus", type=Path, default=None, help="Evaluation corpus" + _default("<data-dir>/eval.corpus.txt"))
    evaluate.add_argument("--labels", type=Path, default=None, help="Evaluation labels" + _default("<data-dir>/eval.labels.txt"))
    evaluate.add_argument("--batch-size", type=positive_int, default=argparse.SUPPRESS, help="Inference batch size" + _default(DEFAULT_BATCH_SIZE))

    infer = command("infer", "Classify one corpus line or one CSV row.", tokenizer_options, hashing_options)
    source = infer.add_mutually_exclusive_group(required=True)
    source.add_argument("--line", type=str, default=None, help="Encoded corpus line")
    source.add_argument("--csv", type=Path, default=None, help="Feature CSV")
    infer.add_argument("--row", type=non_negative_int, default=0, help="Row of --csv to classify (default: %(default)s)")

    bench = command("bench", "Benchmark single-sample inference latency.", tokenizer_options)
    bench.add_argument("--corpus", type=Path, default=None, help="Corpus whose first line is the sample" + _default("<data-dir>/eval.corpus.txt"))
    bench.add_argument("--n-runs", type=positive_int, default=argparse.SUPPRESS, help="Timed runs" + _default(DEFAULT_BENCH_RUNS))
    bench.add_argument("--warmup", type=non_negative_int, default=argparse.SUPPRESS, help="Untimed warm-up runs, at least 10" + _default(DEFAULT_BENCH_WARMUP))
    bench.add_argument("--threads", type=positive_int, default=1, help="Intra-op threads in the timed region (default: %(default)s)")

    esd = command("esd", "Fit power laws to the weight spectra of a checkpoint.")
    esd.add_argument("--bins", type=positive_int, default=argparse.SUPPRESS, help="Histogram bins" + _default(100))

    return parser.parse_args(argv)


def dispatch(runner: PipelineRunner, args: argparse.Namespace) -> None:
    command = args.command
    if command == "fetch":
        runner.fetch(args.url, args.output)
    elif command == "synthesize":
        runner.synthesize(args.per_class, args.classes, args.output)
    elif command == "extract":
        runner.extract(args.input, args.output, args.window)
    elif command == "split":
        runner.split(args.input, args.train_output, args.eval_output)
    elif command == "encode":
        runner.encode(args.input, args.output, args.labels_output)
    elif command == "train-tokenizer":
        runner.train_tokenizer(args.corpus, None)
    elif command == "train":
        runner.train(args.corpus, args.labels, args.eval_corpus, args.eval_labels)
    elif command == "eval":
        runner.evaluate(args.corpus, args.labels)
    elif command == "infer":
        runner.infer(args.line, args.csv, args.row)
    elif command == "bench":
        runner.bench(args.corpus, args.threads)
    elif command == "esd":
        runner.esd()


def main(argv: list[str] | None = None) -> None:
    args = parse_arguments(argv)
    log = package_logger(debug=args.debug)
    try:
        config = apply_overrides(load_pipeline_config(getattr(args, "config", None)), args)
        log.debug(f"Resolved config: {config.to_dict()}")
        dispatch(PipelineRunner(config, debug=args.debug), args)
    except DetectorError as e:
        log.error(f"{type(e).__name__}: {e}", exc_info=args.debug)
        fail_hard(f"{args.command} failed", e.exit_code)
    except Exception as e:
        log.critical(f"Unhandled exception during {args.command}: {e}", exc_info=args.debug)
        fail_hard(f"{args.command} failed due to an unhandled exception.", EXIT_INTERNAL_ERROR)


if __name__ == "__main__":
    main()
