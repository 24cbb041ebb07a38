"""
Privacy-preserving fixed-length encoding.

Each cell becomes ``UPPER(column) + "$" + value``, which is hashed; a row
becomes the space-joined list of its cell digests. Every row of a table
therefore encodes to the same number of equally long digests, and no raw
feature value survives into the corpus.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .constants import CELL_SEPARATOR, DEFAULT_HASH_ALGORITHM, MIN_TRUNCATION
from .errors import ArityMismatch, BadTruncation, ConfigError, CorruptFile, DataError, MissingFile
from .ingest import FeatureTable
from .schema import FeatureSchema

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class HashConfig:
    algorithm: str = DEFAULT_HASH_ALGORITHM
    truncation: int | None = None

    def __post_init__(self) -> None:
        if self.algorithm not in hashlib.algorithms_available:
            raise ConfigError(f"hashing.algorithm {self.algorithm!r} is not available")
        if hashlib.new(self.algorithm).digest_size == 0:
            raise ConfigError(f"hashing.algorithm {self.algorithm!r} has a variable digest size")
        if self.truncation is not None:
            if self.truncation < MIN_TRUNCATION or self.truncation % 2:
                raise BadTruncation(
                    f"hashing.truncation must be even and >= {MIN_TRUNCATION}, got {self.truncation}"
                )
            if self.truncation > self.full_length:
                raise BadTruncation(
                    f"hashing.truncation {self.truncation} exceeds the {self.full_length}-char {self.algorithm} digest"
                )

    @property
    def full_length(self) -> int:
        return 2 * hashlib.new(self.algorithm).digest_size

    @property
    def digest_length(self) -> int:
        return self.truncation if self.truncation is not None else self.full_length


@dataclass(frozen=True)
class CellString:
    text: str

    def __post_init__(self) -> None:
        name, separator, _ = self.text.partition(CELL_SEPARATOR)
        if not separator or not name or CELL_SEPARATOR in name:
            raise DataError(f"Malformed cell string {self.text!r}")

    def __str__(self) -> str:
        return self.text


@dataclass(frozen=True)
class TokenLine:
    digests: tuple[str, ...]

    def render(self) -> str:
        return " ".join(self.digests)

    def __len__(self) -> int:
        return len(self.digests)


@dataclass(frozen=True)
class DataList:
    lines: tuple[TokenLine, ...]
    labels: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        if self.lines:
            width = len(self.lines[0])
            for position, line in enumerate(self.lines):
                if len(line) != width:
                    raise ArityMismatch(f"Line {position} has {len(line)} digests, expected {width}")
        if self.labels is not None and len(self.labels) != len(self.lines):
            raise DataError(f"{len(self.labels)} labels for {len(self.lines)} lines")

    def __len__(self) -> int:
        return len(self.lines)

    def texts(self) -> list[str]:
        return [line.render() for line in self.lines]


def concat_cell(column_name: str, value: str) -> CellString:
    if not column_name:
        raise DataError("Column name must be non-empty")
    return CellString(column_name.upper() + CELL_SEPARATOR + value)


def hash_cell(cell: CellString, config: HashConfig = HashConfig()) -> str:
    digest = hashlib.new(config.algorithm, cell.text.encode("utf-8")).hexdigest()
    return digest[: config.digest_length]


def encode_row(row: Sequence[str], schema: FeatureSchema, config: HashConfig = HashConfig()) -> TokenLine:
    """
    Hashes one record into a token line.

    ``row`` holds one value per retained (non-excluded) schema column, in
    schema order.

    :raises ArityMismatch: If the row length differs from the retained column count.
    """
    names = [c.name for c in schema.columns if c.name not in schema.excluded]
    if len(row) != len(names):
        raise ArityMismatch(f"Row has {len(row)} values, schema retains {len(names)} columns")
    return TokenLine(tuple(hash_cell(concat_cell(name, value), config) for name, value in zip(names, row)))


def encode_table(table: FeatureTable, config: HashConfig = HashConfig()) -> DataList:
    """
    Encodes every row of a table, preserving row order and labels.

    Excluded columns are dropped before hashing. The upper-cased column
    prefixes are computed once per table.
    """
    keep = [i for i, c in enumerate(table.schema.columns) if c.name not in table.schema.excluded]
    prefixes = [table.schema.columns[i].name.upper() + CELL_SEPARATOR for i in keep]
    lines = []
    for row in table.rows:
        digests = tuple(
            hashlib.new(config.algorithm, (prefix + row[i]).encode("utf-8")).hexdigest()[: config.digest_length]
            for prefix, i in zip(prefixes, keep)
        )
        lines.append(TokenLine(digests))
    logger.debug(f"Encoded {len(lines)} rows x {len(keep)} columns with {config.algorithm}")
    return DataList(lines=tuple(lines), labels=table.labels)


def write_corpus(dl: DataList, path: Path | str, labels_path: Path | str | None = None) -> None:
    """
    Writes one space-joined line per token line, newline-terminated, plus an
    optional parallel file with one class name per line.
    """
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        for line in dl.lines:
            handle.write(line.render())
            handle.write("\n")
    if labels_path is not None:
        if dl.labels is None:
            raise DataError("Cannot write a label file for an unlabeled corpus")
        with open(labels_path, "w", encoding="utf-8", newline="\n") as handle:
            for label in dl.labels:
                handle.write(f"{label}\n")


def read_corpus(path: Path | str, labels_path: Path | str | None = None) -> DataList:
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"Corpus file not found: {path}")
    with open(path, "r", encoding="utf-8") as handle:
        lines = tuple(TokenLine(tuple(text.split(" ")) if text else ()) for text in handle.read().splitlines())
    labels = None
    if labels_path is not None:
        labels_path = Path(labels_path)
        if not labels_path.is_file():
            raise MissingFile(f"Label file not found: {labels_path}")
        with open(labels_path, "r", encoding="utf-8") as handle:
            labels = tuple(handle.read().splitlines())
        if len(labels) != len(lines):
            raise CorruptFile(f"{labels_path} has {len(labels)} labels for {len(lines)} corpus lines")
    return DataList(lines=lines, labels=labels)


def leaks_raw_values(corpus_text: str, table: FeatureTable, min_len: int = 4) -> list[str]:
    """Raw feature values of at least ``min_len`` characters that occur in the corpus text."""
    candidates: Iterable[str] = {value for row in table.rows for value in row if len(value) >= min_len}
    return sorted(value for value in candidates if value in corpus_text)
