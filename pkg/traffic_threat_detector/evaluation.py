"""
Classification metrics, report rendering and inference latency benchmarking.
"""

from __future__ import annotations

import logging
import os
import platform
import time
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd
import torch
import yaml
from sklearn import metrics

from .constants import (
    CLASS_NAMES,
    CONFUSION_FILENAME,
    DEFAULT_BENCH_RUNS,
    DEFAULT_BENCH_WARMUP,
    DEFAULT_MAX_LEN,
    REPORT_DATA_FILENAME,
    REPORT_FILENAME,
)
from .errors import DegenerateClass, LabelOutOfRange, LengthMismatch, ShapeMismatch
from .model import ClassifierModel, as_tensors
from .tokenizer import TokenizerModel, encode_lines

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ClassMetrics:
    name: str
    precision: float
    recall: float
    f1: float
    support: int
    auc: float | None


@dataclass(frozen=True)
class AverageMetrics:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass(frozen=True)
class EvalReport:
    classes: tuple[ClassMetrics, ...]
    macro: AverageMetrics
    weighted: AverageMetrics
    accuracy: float
    confusion: np.ndarray

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "classes": [asdict(c) for c in self.classes],
            "macro_avg": asdict(self.macro),
            "weighted_avg": asdict(self.weighted),
            "confusion_matrix": self.confusion.tolist(),
        }


@dataclass(frozen=True)
class LatencyReport:
    hardware: str
    n_runs: int
    warmup: int
    mean: float
    p50: float
    p95: float
    threads: int
    parallelism_enabled: bool
    includes_tokenization: bool = True


def _as_labels(values: Sequence[int] | np.ndarray, n_classes: int, what: str) -> np.ndarray:
    labels = np.asarray(values, dtype=np.int64)
    if labels.ndim != 1:
        raise ShapeMismatch(f"{what} must be one-dimensional, got shape {labels.shape}")
    if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
        raise LabelOutOfRange(f"{what} must be in [0, {n_classes}), got range [{labels.min()}, {labels.max()}]")
    return labels


def confusion_matrix(
    y_true: Sequence[int] | np.ndarray, y_pred: Sequence[int] | np.ndarray, n_classes: int = len(CLASS_NAMES)
) -> np.ndarray:
    """
    Counts of (true, predicted) pairs: ``cell[i][j]`` is the number of samples of class i predicted as j.

    :raises LengthMismatch: If the inputs differ in length.
    :raises LabelOutOfRange: If a label is outside [0, n_classes).
    """
    truth = _as_labels(y_true, n_classes, "y_true")
    predicted = _as_labels(y_pred, n_classes, "y_pred")
    if truth.shape != predicted.shape:
        raise LengthMismatch(f"y_true has {truth.size} labels, y_pred has {predicted.size}")
    if not truth.size:
        return np.zeros((n_classes, n_classes), dtype=np.int64)
    return metrics.confusion_matrix(truth, predicted, labels=np.arange(n_classes)).astype(np.int64)


def roc_auc(y_true_binary: Sequence[int] | np.ndarray, scores: Sequence[float] | np.ndarray) -> float:
    """
    Area under the ROC curve as the rank statistic P(pos > neg) + P(pos == neg) / 2.

    Tied scores share their average rank.

    :raises DegenerateClass: If the labels are all positive or all negative.
    """
    truth = np.asarray(y_true_binary).astype(bool)
    values = np.asarray(scores, dtype=np.float64)
    if truth.shape != values.shape:
        raise LengthMismatch(f"{truth.size} labels for {values.size} scores")
    n_pos = int(truth.sum())
    n_neg = truth.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DegenerateClass(f"ROC AUC needs both classes, got {n_pos} positive and {n_neg} negative")
    ranks = pd.Series(values).rank(method="average").to_numpy()
    return float((ranks[truth].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


def roc_curve(y_true_binary: Sequence[int] | np.ndarray, scores: Sequence[float] | np.ndarray) -> pd.DataFrame:
    """ROC points with columns fpr, tpr, threshold, in increasing fpr order."""
    fpr, tpr, thresholds = metrics.roc_curve(np.asarray(y_true_binary), np.asarray(scores), drop_intermediate=False)
    return pd.DataFrame({"fpr": fpr, "tpr": tpr, "threshold": thresholds})


def roc_curves_csv(
    y_true: Sequence[int] | np.ndarray,
    y_prob: np.ndarray,
    path: Path | str,
    class_names: Sequence[str] = CLASS_NAMES,
) -> None:
    """One-vs-rest ROC points of every non-degenerate class, in a single long-format CSV."""
    truth = np.asarray(y_true)
    frames = []
    for index, name in enumerate(class_names):
        positives = truth == index
        if positives.all() or not positives.any():
            continue
        curve = roc_curve(positives, y_prob[:, index])
        curve.insert(0, "class", name)
        frames.append(curve)
    frame = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(columns=["class", "fpr", "tpr", "threshold"])
    frame.to_csv(path, index=False, lineterminator="\n")


def classification_report(
    y_true: Sequence[int] | np.ndarray,
    y_pred: Sequence[int] | np.ndarray,
    y_prob: np.ndarray,
    class_names: Sequence[str] = CLASS_NAMES,
) -> EvalReport:
    """
    Per-class precision, recall, F1, support and one-vs-rest ROC AUC, plus macro and weighted averages.

    The macro average covers only classes with at least one true sample.

    Precision, recall and F1 are 0 when their denominator is 0, with a
    warning naming the affected classes. AUC is None for a class with no
    positive or no negative samples.

    :raises LengthMismatch: If inputs disagree in length.
    """
    n_classes = len(class_names)
    truth = _as_labels(y_true, n_classes, "y_true")
    predicted = _as_labels(y_pred, n_classes, "y_pred")
    probabilities = np.asarray(y_prob, dtype=np.float64)
    if not truth.size == predicted.size == probabilities.shape[0]:
        raise LengthMismatch(
            f"y_true ({truth.size}), y_pred ({predicted.size}) and y_prob ({probabilities.shape[0]}) differ in length"
        )
    if probabilities.ndim != 2 or probabilities.shape[1] != n_classes:
        raise ShapeMismatch(f"y_prob must be [n, {n_classes}], got {probabilities.shape}")

    confusion = confusion_matrix(truth, predicted, n_classes)
    tp = np.diag(confusion).astype(np.float64)
    support = confusion.sum(axis=1)
    predicted_count = confusion.sum(axis=0)
    precision = np.divide(tp, predicted_count, out=np.zeros(n_classes), where=predicted_count > 0)
    recall = np.divide(tp, support, out=np.zeros(n_classes), where=support > 0)
    denominator = precision + recall
    f1 = np.divide(2 * precision * recall, denominator, out=np.zeros(n_classes), where=denominator > 0)

    never_predicted = [class_names[i] for i in range(n_classes) if predicted_count[i] == 0 and support[i] > 0]
    if never_predicted:
        logger.warning(f"Precision is ill-defined and set to 0.0 for never-predicted class(es): {', '.join(never_predicted)}")

    classes = []
    for index, name in enumerate(class_names):
        positives = truth == index
        auc = None
        if positives.any() and not positives.all():
            auc = roc_auc(positives, probabilities[:, index])
        classes.append(
            ClassMetrics(
                name=name,
                precision=float(precision[index]),
                recall=float(recall[index]),
                f1=float(f1[index]),
                support=int(support[index]),
                auc=auc,
            )
        )

    total = int(support.sum())
    weights = support / total if total else np.zeros(n_classes)
    present = support > 0
    if present.any():
        macro = AverageMetrics(
            float(precision[present].mean()), float(recall[present].mean()), float(f1[present].mean()), total
        )
    else:
        macro = AverageMetrics(0.0, 0.0, 0.0, total)
    weighted = AverageMetrics(
        float(weights @ precision), float(weights @ recall), float(weights @ f1), total
    )
    accuracy = float(np.trace(confusion) / total) if total else 0.0
    return EvalReport(classes=tuple(classes), macro=macro, weighted=weighted, accuracy=accuracy, confusion=confusion)


def render_report(report: EvalReport) -> str:
    """Fixed-width classification report: one row per class, then accuracy and the two averages."""
    width = max([len("Weighted Avg")] + [len(c.name) for c in report.classes])
    header = f"{'Attack':<{width}}  {'Precision':>9}  {'Recall':>6}  {'F1-Score':>8}  {'Support':>8}  {'AUC':>8}"
    lines = [header]
    for c in report.classes:
        auc = f"{c.auc:.6f}" if c.auc is not None else "n/a"
        lines.append(f"{c.name:<{width}}  {c.precision:>9.2f}  {c.recall:>6.2f}  {c.f1:>8.2f}  {c.support:>8,}  {auc:>8}")
    lines.append("")
    lines.append(f"{'Accuracy':<{width}}  {'':>9}  {'':>6}  {report.accuracy:>8.4f}  {report.macro.support:>8,}")
    for label, avg in (("Macro Avg", report.macro), ("Weighted Avg", report.weighted)):
        lines.append(f"{label:<{width}}  {avg.precision:>9.2f}  {avg.recall:>6.2f}  {avg.f1:>8.2f}  {avg.support:>8,}")
    absent = [c.name for c in report.classes if c.support == 0]
    if absent:
        lines.append("")
        lines.append(f"Macro Avg excludes class(es) with no support: {', '.join(absent)}")
    return "\n".join(lines)


def confusion_csv(confusion: np.ndarray, path: Path | str, class_names: Sequence[str] = CLASS_NAMES) -> None:
    """Confusion matrix with true classes as rows and predicted classes as columns, both labeled."""
    frame = pd.DataFrame(confusion, index=list(class_names), columns=list(class_names))
    frame.index.name = "true\\predicted"
    frame.to_csv(path, lineterminator="\n")


def write_report(report: EvalReport, directory: Path | str, class_names: Sequence[str] = CLASS_NAMES) -> None:
    """Writes the text report, its YAML form and the confusion CSV into ``directory``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    (directory / REPORT_FILENAME).write_text(render_report(report) + "\n", encoding="utf-8")
    with open(directory / REPORT_DATA_FILENAME, "w", encoding="utf-8") as handle:
        yaml.safe_dump(report.to_dict(), handle, sort_keys=False)
    confusion_csv(report.confusion, directory / CONFUSION_FILENAME, class_names)


def hardware_description() -> str:
    processor = platform.processor() or platform.machine()
    return f"{platform.system()} {processor}, {os.cpu_count()} logical CPU(s), torch {torch.__version__}"


@torch.no_grad()
def bench_inference(
    model: ClassifierModel,
    tokenizer: TokenizerModel,
    sample_line: str,
    n_runs: int = DEFAULT_BENCH_RUNS,
    warmup: int = DEFAULT_BENCH_WARMUP,
    max_len: int = DEFAULT_MAX_LEN,
    threads: int = 1,
) -> LatencyReport:
    """
    Times single-sample inference end to end: tokenization, encoding and forward pass.

    Warm-up runs are excluded from the statistics. The timed region runs
    with ``threads`` intra-op threads; the previous setting is restored
    afterwards.
    """
    if n_runs < 1:
        raise ValueError(f"n_runs must be >= 1, got {n_runs}")
    warmup = max(warmup, DEFAULT_BENCH_WARMUP)
    model.eval()

    def run_once() -> None:
        input_ids, attention_mask = as_tensors(encode_lines(tokenizer, [sample_line], max_len))
        model(input_ids, attention_mask)

    previous_threads = torch.get_num_threads()
    torch.set_num_threads(threads)
    try:
        for _ in range(warmup):
            run_once()
        timings = np.empty(n_runs)
        for i in range(n_runs):
            start = time.perf_counter()
            run_once()
            timings[i] = time.perf_counter() - start
    finally:
        torch.set_num_threads(previous_threads)

    report = LatencyReport(
        hardware=hardware_description(),
        n_runs=n_runs,
        warmup=warmup,
        mean=float(timings.mean()),
        p50=float(np.percentile(timings, 50)),
        p95=float(np.percentile(timings, 95)),
        threads=threads,
        parallelism_enabled=threads > 1,
    )
    logger.info(f"Inference latency over {n_runs} runs: mean={report.mean:.6f}s p50={report.p50:.6f}s p95={report.p95:.6f}s")
    return report


def write_latency(report: LatencyReport, path: Path | str) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        yaml.safe_dump(asdict(report), handle, sort_keys=False)
