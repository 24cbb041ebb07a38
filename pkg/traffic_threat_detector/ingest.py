"""
Loading, cleaning and splitting of tabular traffic-feature data.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd
from tenacity import RetryError

from .constants import CLASS_NAMES, DEFAULT_LABEL_COLUMN, MISSING_VALUE
from .errors import ConfigError, DataError, MissingColumn, MissingFile, RaggedRow
from .schema import FeatureSchema, label_index
from .utils import download_file

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FeatureTable:
    schema: FeatureSchema
    rows: tuple[tuple[str, ...], ...]
    labels: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        width = len(self.schema)
        for position, row in enumerate(self.rows):
            if len(row) != width:
                raise RaggedRow(f"Row {position} has {len(row)} values, schema has {width} columns")
        if self.labels is not None and len(self.labels) != len(self.rows):
            raise DataError(f"{len(self.labels)} labels for {len(self.rows)} rows")

    def __len__(self) -> int:
        return len(self.rows)

    def take(self, indices: list[int] | np.ndarray) -> FeatureTable:
        return FeatureTable(
            schema=self.schema,
            rows=tuple(self.rows[i] for i in indices),
            labels=None if self.labels is None else tuple(self.labels[i] for i in indices),
        )

    def column(self, name: str) -> list[str]:
        position = self.schema.index_of(name)
        return [row[position] for row in self.rows]


def load_csv(
    path: Path | str,
    schema: FeatureSchema,
    label_column: str | None = None,
    enforce_labels: bool = False,
) -> FeatureTable:
    """
    Loads a feature CSV into a table in schema column order.

    Every cell is read as text exactly as written. Empty cells become the
    missing-value sentinel ``"0"``. Header columns not in the schema are
    ignored.

    :param path: CSV file with a mandatory header row.
    :param schema: Columns to keep, in output order.
    :param label_column: Optional column to split out as class labels.
    :param enforce_labels: Reject labels outside the 15-class set.
    :return: The loaded table.
    :raises MissingColumn: If a schema column is absent from the header.
    :raises RaggedRow: If a row's arity differs from the header's.
    :raises UnknownLabel: If ``enforce_labels`` and a label is unknown.
    """
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"CSV file not found: {path}")
    try:
        raw = pd.read_csv(
            path,
            header=None,
            dtype=str,
            keep_default_na=False,
            na_filter=False,
            encoding="utf-8",
            skipinitialspace=False,
        )
    except pd.errors.EmptyDataError:
        raise DataError(f"CSV file {path} has no header row") from None
    except pd.errors.ParserError as e:
        raise RaggedRow(f"Malformed row in {path}: {e}") from None

    # A data row longer than the header fails to parse; a shorter one leaves NaN cells.
    frame = raw.iloc[1:].reset_index(drop=True)
    frame.columns = raw.iloc[0].tolist()

    if frame.isna().to_numpy().any():
        first_bad = int(np.flatnonzero(frame.isna().any(axis=1).to_numpy())[0])
        raise RaggedRow(f"Row {first_bad + 1} of {path} has fewer values than the header")

    missing = [name for name in schema.names if name not in frame.columns]
    if missing:
        raise MissingColumn(f"{path} is missing schema column(s): {', '.join(missing)}")
    if label_column is not None and label_column not in frame.columns:
        raise MissingColumn(f"{path} has no label column {label_column!r}")

    features = frame[schema.names].replace("", MISSING_VALUE)
    rows = tuple(tuple(record) for record in features.itertuples(index=False, name=None))
    labels = None
    if label_column is not None:
        labels = tuple(frame[label_column].tolist())
        if enforce_labels:
            for label in set(labels):
                label_index(label)
    logger.debug(f"Loaded {len(rows)} rows x {len(schema)} columns from {path}")
    return FeatureTable(schema=schema, rows=rows, labels=labels)


def write_csv(table: FeatureTable, path: Path | str, label_column: str = DEFAULT_LABEL_COLUMN) -> None:
    """Writes the table as schema-ordered CSV, with labels as the last column when present."""
    frame = pd.DataFrame(list(table.rows), columns=table.schema.names, dtype=str)
    if table.labels is not None:
        frame[label_column] = list(table.labels)
    frame.to_csv(path, index=False, lineterminator="\n", encoding="utf-8")


def drop_excluded(table: FeatureTable) -> FeatureTable:
    if not table.schema.excluded:
        return table
    keep = [i for i, name in enumerate(table.schema.names) if name not in table.schema.excluded]
    return FeatureTable(
        schema=table.schema.retained(),
        rows=tuple(tuple(row[i] for i in keep) for row in table.rows),
        labels=table.labels,
    )


def split_train_eval(table: FeatureTable, ratio: float, seed: int) -> tuple[FeatureTable, FeatureTable]:
    """
    Stratified random split into training and evaluation tables.

    Each class contributes ``round((1 - ratio) * count)`` rows to evaluation
    (at least one, and never all of them). Classes with fewer than two rows
    cannot be stratified; they go entirely to training and a warning is
    logged. Both outputs keep the input's row order.

    :param table: Labeled table.
    :param ratio: Training fraction, strictly between 0 and 1.
    :param seed: Seed for the per-class shuffles.
    :return: (train, eval) tables.
    """
    if not 0.0 < ratio < 1.0:
        raise ConfigError(f"split ratio must be strictly between 0 and 1, got {ratio}")
    if table.labels is None:
        raise DataError("split_train_eval requires a labeled table")

    rng = np.random.default_rng(seed)
    by_class: dict[str, list[int]] = {}
    for position, label in enumerate(table.labels):
        by_class.setdefault(label, []).append(position)

    train_idx: list[int] = []
    eval_idx: list[int] = []
    for label in sorted(by_class):
        positions = np.asarray(by_class[label])
        count = len(positions)
        if count < 2:
            logger.warning(
                f"DegenerateClass: class {label!r} has {count} sample(s); assigning all to training"
            )
            train_idx.extend(positions.tolist())
            continue
        n_eval = min(max(int(round((1.0 - ratio) * count)), 1), count - 1)
        shuffled = rng.permutation(positions)
        eval_idx.extend(shuffled[:n_eval].tolist())
        train_idx.extend(shuffled[n_eval:].tolist())

    return table.take(sorted(train_idx)), table.take(sorted(eval_idx))


def _noise_value(kind: str, rng: np.random.Generator) -> str:
    if kind == "unsigned_int":
        return str(int(rng.integers(0, 65536)))
    if kind == "ipv4":
        return f"192.168.{int(rng.integers(0, 256))}.{int(rng.integers(1, 255))}"
    if kind == "datetime":
        return f"2021 11 {int(rng.integers(1, 29)):02d} {int(rng.integers(0, 24)):02d}:{int(rng.integers(0, 60)):02d}:{int(rng.integers(0, 60)):02d}.{int(rng.integers(0, 10**6)):06d}"
    if kind == "bytes":
        return rng.bytes(6).hex()
    return f"tok{int(rng.integers(0, 40))}"


def _signature_value(kind: str, class_index: int, column_index: int, variant: int) -> str:
    code = 1000 * (class_index + 1) + 10 * column_index + variant
    if kind == "unsigned_int":
        return str(code)
    if kind == "ipv4":
        return f"10.{class_index}.{column_index % 256}.{variant + 1}"
    return f"sig{code}"


def generate_synthetic(n_per_class: int, n_classes: int, schema: FeatureSchema, seed: int) -> FeatureTable:
    """
    Generates a labeled table whose classes are separable by construction.

    A quarter of the retained columns (at least three) are signature columns:
    each class draws them from its own three-value categorical distribution.
    Every other column, excluded ones included, is noise drawn from a pool
    shared by all classes, with one cell in ten left missing.

    :param n_per_class: Rows per class.
    :param n_classes: Number of classes, taken in class-index order.
    :param schema: Output schema.
    :param seed: Generator seed; equal seeds give identical tables.
    """
    if not 1 <= n_classes <= len(CLASS_NAMES):
        raise ConfigError(f"n_classes must be in [1, {len(CLASS_NAMES)}], got {n_classes}")
    retained = [c.name for c in schema.columns if c.name not in schema.excluded]
    if len(retained) < 3:
        raise ConfigError("synthetic generation needs at least 3 retained columns")
    n_signature = max(3, len(retained) // 4)
    signature = set(retained[:n_signature])

    rng = np.random.default_rng(seed)
    variant_probs = np.array([0.6, 0.3, 0.1])
    rows: list[tuple[str, ...]] = []
    labels: list[str] = []
    for class_index in range(n_classes):
        for _ in range(n_per_class):
            row = []
            for column_index, column in enumerate(schema.columns):
                if column.name in signature:
                    variant = int(rng.choice(3, p=variant_probs))
                    row.append(_signature_value(column.kind, class_index, column_index, variant))
                elif rng.random() < 0.1:
                    row.append(MISSING_VALUE)
                else:
                    row.append(_noise_value(column.kind, rng))
            rows.append(tuple(row))
            labels.append(CLASS_NAMES[class_index])

    order = rng.permutation(len(rows))
    return FeatureTable(
        schema=schema,
        rows=tuple(rows[i] for i in order),
        labels=tuple(labels[i] for i in order),
    )


def class_distribution(table: FeatureTable) -> dict[str, int]:
    """Per-class row counts, in class-index order, then any unknown names sorted."""
    if table.labels is None:
        return {}
    counts = Counter(table.labels)
    ordered = {name: counts[name] for name in CLASS_NAMES if name in counts}
    for name in sorted(set(counts) - set(ordered)):
        ordered[name] = counts[name]
    return ordered


def distribution_report(train: FeatureTable, evaluation: FeatureTable) -> str:
    """Per-class sample/train/eval counts as a fixed-width text table."""
    train_counts = class_distribution(train)
    eval_counts = class_distribution(evaluation)
    names = list(dict.fromkeys(list(train_counts) + list(eval_counts)))
    width = max([len("Attack Type")] + [len(n) for n in names])
    lines = [f"{'Attack Type':<{width}}  {'Samples':>10}  {'Train':>10}  {'Eval':>10}"]
    for name in names:
        tr, ev = train_counts.get(name, 0), eval_counts.get(name, 0)
        lines.append(f"{name:<{width}}  {tr + ev:>10,}  {tr:>10,}  {ev:>10,}")
    total_train, total_eval = sum(train_counts.values()), sum(eval_counts.values())
    lines.append(f"{'Total':<{width}}  {total_train + total_eval:>10,}  {total_train:>10,}  {total_eval:>10,}")
    return "\n".join(lines)


def fetch_dataset(url: str, destination: Path | str) -> Path:
    """
    Downloads a dataset CSV, retrying transient failures.

    :raises DataError: If every attempt fails.
    """
    destination = Path(destination)
    logger.info(f"Downloading dataset from {url} to {destination}")
    try:
        return download_file(url, destination)
    except RetryError as e:
        raise DataError(f"Failed to download {url} after multiple retries") from e
