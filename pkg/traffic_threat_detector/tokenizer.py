"""
Byte-level BPE tokenizer for PPFLE corpora.

Lines are pre-split into words the GPT-2 way (a word keeps its leading
space), words are split into bytes, and learned merges are applied in the
order they were learned. Every byte has its own token, so no input is ever
out of vocabulary.

Token ids: the special tokens take 0..4 in the order
``<s> <pad> </s> <unk> <mask>``, the 256 single bytes follow, then merged
tokens in learning order.

On disk a tokenizer is two files in one directory. ``vocab.json`` is a JSON
object with one ``"token": id`` entry per line, byte tokens written through
the GPT-2 printable byte alphabet (a space byte is ``Ġ``). ``merges.txt``
starts with a ``#version`` header carrying ``vocab_size`` and
``min_frequency``, then holds one ``left right`` pair per line in merge
order.
"""

from __future__ import annotations

import heapq
import json
import logging
import re
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .constants import (
    BOS_ID,
    DEFAULT_CHUNK_SIZE,
    DEFAULT_MAX_LEN,
    DEFAULT_MIN_FREQUENCY,
    DEFAULT_VOCAB_SIZE,
    EOS_ID,
    MERGES_FILENAME,
    MERGES_HEADER,
    PAD_ID,
    SPECIAL_TOKENS,
    VOCAB_FILENAME,
    WORD_CACHE_SIZE,
)
from .errors import ConfigError, CorruptFile, EmptyCorpus, MissingFile
from .logger import Logger

logger = logging.getLogger(__name__)

_WORD_PATTERN = re.compile(rb" ?[^ ]+| +")


@lru_cache(maxsize=1)
def bytes_to_unicode() -> dict[int, str]:
    """
    Maps every byte to a printable unicode character.

    Printable latin-1 bytes map to themselves; the rest are shifted above
    U+0100. This is the GPT-2 byte alphabet.
    """
    printable = (
        list(range(ord("!"), ord("~") + 1))
        + list(range(ord("¡"), ord("¬") + 1))
        + list(range(ord("®"), ord("ÿ") + 1))
    )
    chars = printable[:]
    shift = 0
    for b in range(256):
        if b not in printable:
            printable.append(b)
            chars.append(256 + shift)
            shift += 1
    return {b: chr(c) for b, c in zip(printable, chars)}


def _to_unicode(data: bytes) -> str:
    table = bytes_to_unicode()
    return "".join(table[b] for b in data)


@lru_cache(maxsize=1)
def _unicode_to_bytes() -> dict[str, int]:
    return {c: b for b, c in bytes_to_unicode().items()}


def _from_unicode(token: str) -> bytes:
    inverse = _unicode_to_bytes()
    try:
        return bytes(inverse[c] for c in token)
    except KeyError as e:
        raise CorruptFile(f"Token {token!r} contains a character outside the byte alphabet") from e


def _as_bytes(line: str | bytes) -> bytes:
    return line if isinstance(line, bytes) else line.encode("utf-8")


@dataclass
class TokenizerModel:
    merges: list[tuple[bytes, bytes]]
    vocab_size: int = DEFAULT_VOCAB_SIZE
    min_frequency: int = DEFAULT_MIN_FREQUENCY
    specials: tuple[str, ...] = SPECIAL_TOKENS
    word_cache_size: int = field(default=WORD_CACHE_SIZE, repr=False, compare=False)
    _id_to_bytes: list[bytes] = field(init=False, repr=False)
    _ranks: dict[tuple[int, int], int] = field(init=False, repr=False)
    _merge_targets: list[int] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        base = len(self.specials)
        self._id_to_bytes = [b""] * base + [bytes([b]) for b in range(256)]
        by_bytes = {token: base + b for b, token in enumerate(self._id_to_bytes[base:])}
        self._ranks = {}
        self._merge_targets = []
        for rank, (left, right) in enumerate(self.merges):
            if left not in by_bytes or right not in by_bytes:
                raise CorruptFile(f"Merge {rank} ({left!r}, {right!r}) references an unknown token")
            pair = (by_bytes[left], by_bytes[right])
            if pair in self._ranks:
                raise CorruptFile(f"Merge {rank} ({left!r}, {right!r}) repeats merge {self._ranks[pair]}")
            self._ranks[pair] = rank
            merged = left + right
            if merged not in by_bytes:
                by_bytes[merged] = len(self._id_to_bytes)
                self._id_to_bytes.append(merged)
            self._merge_targets.append(by_bytes[merged])
        if len(self._id_to_bytes) > self.vocab_size:
            raise CorruptFile(f"{len(self._id_to_bytes)} tokens exceed vocab_size {self.vocab_size}")
        self._encode_word = lru_cache(maxsize=self.word_cache_size)(self._merge_word)

    @property
    def vocab(self) -> dict[str, int]:
        """Token string to id, specials first."""
        entries = {special: i for i, special in enumerate(self.specials)}
        base = len(self.specials)
        for token_id in range(base, len(self._id_to_bytes)):
            entries[_to_unicode(self._id_to_bytes[token_id])] = token_id
        return entries

    def __len__(self) -> int:
        return len(self._id_to_bytes)

    def token_bytes(self, token_id: int) -> bytes:
        return self._id_to_bytes[token_id]

    def byte_id(self, b: int) -> int:
        return len(self.specials) + b

    def _merge_word(self, word: bytes) -> tuple[int, ...]:
        """
        Applies the learned merges to one word.

        Pairs sit in a heap keyed by (rank, position) over a linked list of
        positions. All occurrences of the lowest rank merge left to right
        before pairs created by those merges are considered.
        """
        ids = [self.byte_id(b) for b in word]
        if len(ids) < 2 or not self._ranks:
            return tuple(ids)
        nxt = list(range(1, len(ids))) + [-1]
        prv = list(range(-1, len(ids) - 1))
        heap = [(self._ranks[pair], i) for i, pair in enumerate(zip(ids, ids[1:])) if pair in self._ranks]
        heapq.heapify(heap)
        while heap:
            rank = heap[0][0]
            created = []
            while heap and heap[0][0] == rank:
                _, i = heapq.heappop(heap)
                j = nxt[i]
                if ids[i] < 0 or j == -1 or self._ranks.get((ids[i], ids[j])) != rank:
                    continue
                ids[i] = self._merge_targets[rank]
                ids[j] = -1  # merged away
                nxt[i] = nxt[j]
                if nxt[j] != -1:
                    prv[nxt[j]] = i
                created.append(i)
            for i in created:
                if ids[i] < 0:
                    continue
                for left in (prv[i], i):
                    if left == -1 or nxt[left] == -1:
                        continue
                    found = self._ranks.get((ids[left], ids[nxt[left]]))
                    if found is not None:
                        heapq.heappush(heap, (found, left))
        return tuple(token for token in ids if token >= 0)

    def tokenize(self, line: str | bytes, limit: int | None = None) -> list[int]:
        """
        BPE token ids of a line, without framing or truncation.

        With ``limit`` set, encoding stops once that many ids are produced
        and only the first ``limit`` are returned.
        """
        ids: list[int] = []
        for match in _WORD_PATTERN.finditer(_as_bytes(line)):
            ids.extend(self._encode_word(match.group()))
            if limit is not None and len(ids) >= limit:
                return ids[:limit]
        return ids

    def decode(self, ids: Iterable[int]) -> bytes:
        """Bytes of the non-special tokens in ``ids``."""
        base = len(self.specials)
        return b"".join(self._id_to_bytes[i] for i in ids if i >= base)


@dataclass(frozen=True)
class EncodedBatch:
    input_ids: np.ndarray
    attention_masks: np.ndarray

    def __post_init__(self) -> None:
        if self.input_ids.shape != self.attention_masks.shape:
            raise ValueError(
                f"input_ids {self.input_ids.shape} and attention_masks {self.attention_masks.shape} differ"
            )

    def __len__(self) -> int:
        return int(self.input_ids.shape[0])

    def slice(self, start: int, stop: int) -> EncodedBatch:
        return EncodedBatch(self.input_ids[start:stop], self.attention_masks[start:stop])

    def take(self, indices: np.ndarray | Sequence[int]) -> EncodedBatch:
        return EncodedBatch(self.input_ids[indices], self.attention_masks[indices])


def normalize(corpus: list[str]) -> list[str]:
    """Identity: PPFLE lines are already canonical, so normalization is a no-op stage."""
    return list(corpus)


class BpeTrainer:
    """
    Learns byte-level BPE merges from a corpus.

    Training counts adjacent token pairs over unique words weighted by their
    frequency, and repeatedly merges the most frequent pair whose count is at
    least ``min_frequency``. Among equally frequent pairs the lexicographically
    smallest (left bytes, right bytes) wins.

    Pair counts are updated only around each merge site, and the next pair
    comes from a heap with lazily invalidated entries, so the cost of a merge
    is proportional to the number of its occurrences.
    """

    def __init__(
        self,
        vocab_size: int = DEFAULT_VOCAB_SIZE,
        min_frequency: int = DEFAULT_MIN_FREQUENCY,
        specials: Sequence[str] = SPECIAL_TOKENS,
        debug: bool = False,
    ) -> None:
        if min_frequency < 1:
            raise ConfigError(f"tokenizer.min_frequency must be >= 1, got {min_frequency}")
        if vocab_size <= 256 + len(specials):
            raise ConfigError(f"tokenizer.vocab_size must exceed {256 + len(specials)}, got {vocab_size}")
        self.vocab_size = vocab_size
        self.min_frequency = min_frequency
        self.specials = tuple(specials)
        self.log: logging.Logger = Logger(self.__class__.__name__, debug=debug)

    def train(self, corpus: Iterable[str | bytes]) -> TokenizerModel:
        word_counts: Counter[bytes] = Counter()
        for line in normalize(list(corpus)):
            word_counts.update(_WORD_PATTERN.findall(_as_bytes(line)))
        if not word_counts:
            raise EmptyCorpus("Cannot train a tokenizer on an empty corpus")

        base = len(self.specials)
        self.token_bytes: list[bytes] = [b""] * base + [bytes([b]) for b in range(256)]
        by_bytes = {token: i for i, token in enumerate(self.token_bytes) if i >= base}
        self.words = [[base + b for b in word] for word in word_counts]
        self.freqs = list(word_counts.values())

        self.pair_counts: defaultdict[tuple[int, int], int] = defaultdict(int)
        self.where: defaultdict[tuple[int, int], set[int]] = defaultdict(set)
        for index, (word, freq) in enumerate(zip(self.words, self.freqs)):
            for pair in zip(word, word[1:]):
                self.pair_counts[pair] += freq
                self.where[pair].add(index)
        heap = [self._entry(pair, count) for pair, count in self.pair_counts.items() if count >= self.min_frequency]
        heapq.heapify(heap)

        merges: list[tuple[bytes, bytes]] = []
        while len(self.token_bytes) < self.vocab_size:
            best = self._pop_best(heap)
            if best is None:
                break
            left, right = self.token_bytes[best[0]], self.token_bytes[best[1]]
            merges.append((left, right))
            new_id = by_bytes.get(left + right)
            if new_id is None:
                new_id = len(self.token_bytes)
                by_bytes[left + right] = new_id
                self.token_bytes.append(left + right)
            for pair in sorted(self._apply_merge(best, new_id)):
                count = self.pair_counts.get(pair, 0)
                if count >= self.min_frequency:
                    heapq.heappush(heap, self._entry(pair, count))

            if len(merges) % 500 == 0:
                self.log.debug(f"Learned {len(merges)} merges")

        self.log.info(
            f"Trained tokenizer: {len(self.token_bytes)} tokens ({len(merges)} merges) from "
            f"{sum(self.freqs)} words ({len(self.words)} unique)"
        )
        return TokenizerModel(
            merges=merges,
            vocab_size=self.vocab_size,
            min_frequency=self.min_frequency,
            specials=self.specials,
        )

    def _entry(self, pair: tuple[int, int], count: int) -> tuple[int, bytes, bytes, tuple[int, int]]:
        return (-count, self.token_bytes[pair[0]], self.token_bytes[pair[1]], pair)

    def _pop_best(self, heap: list) -> tuple[int, int] | None:
        # An entry is current when its count matches; stale ones are re-queued at their current count.
        while heap:
            negative_count, _, _, pair = heapq.heappop(heap)
            count = self.pair_counts.get(pair, 0)
            if count == -negative_count:
                return pair
            if count >= self.min_frequency:
                heapq.heappush(heap, self._entry(pair, count))
        return None

    def _apply_merge(self, pair: tuple[int, int], new_id: int) -> set[tuple[int, int]]:
        """
        Replaces every occurrence of ``pair`` with ``new_id``, left to right
        without overlap, and adjusts the counts of the neighbouring pairs.

        :return: Pairs whose count grew.
        """
        left, right = pair
        counts, where = self.pair_counts, self.where
        grown: set[tuple[int, int]] = set()
        for index in where.pop(pair, ()):
            word, freq = self.words[index], self.freqs[index]
            n = len(word)

            def drop(p: tuple[int, int]) -> None:
                counts[p] -= freq
                if counts[p] <= 0:
                    del counts[p]

            def add(p: tuple[int, int]) -> None:
                counts[p] += freq
                where[p].add(index)
                grown.add(p)

            merged: list[int] = []
            copied = 0
            search = 0
            while True:
                try:
                    j = word.index(left, search)
                except ValueError:
                    break
                if j + 1 >= n:
                    break
                if word[j + 1] != right:
                    search = j + 1
                    continue
                drop(pair)
                if j > 0 and not (merged and copied == j):
                    drop((word[j - 1], left))
                    add((word[j - 1], new_id))
                if j + 2 < n:
                    drop((right, word[j + 2]))
                    if j + 3 < n and word[j + 2] == left and word[j + 3] == right:
                        add((new_id, new_id))
                    else:
                        add((new_id, word[j + 2]))
                merged.extend(word[copied:j])
                merged.append(new_id)
                copied = search = j + 2
            if not merged:
                continue
            merged.extend(word[copied:])
            self.words[index] = merged
        counts.pop(pair, None)
        return grown


def train_bbpe(
    corpus: Iterable[str | bytes],
    vocab_size: int = DEFAULT_VOCAB_SIZE,
    min_frequency: int = DEFAULT_MIN_FREQUENCY,
    specials: Sequence[str] = SPECIAL_TOKENS,
) -> TokenizerModel:
    return BpeTrainer(vocab_size, min_frequency, specials).train(corpus)


def encode_line(tok: TokenizerModel, line: str | bytes, max_len: int = DEFAULT_MAX_LEN) -> tuple[list[int], list[int]]:
    """
    Frames a line as ``<s> tokens </s>``, truncated to ``max_len`` and right-padded.

    Truncation keeps the head of the line and always ends with ``</s>``.

    :return: (ids, mask), both of length ``max_len``; mask is 1 on non-pad positions.
    """
    if max_len < 2:
        raise ConfigError(f"max_len must be >= 2, got {max_len}")
    body = tok.tokenize(line, limit=max_len - 2)
    ids = [BOS_ID] + body + [EOS_ID]
    mask = [1] * len(ids)
    padding = max_len - len(ids)
    return ids + [PAD_ID] * padding, mask + [0] * padding


def encode_lines(tok: TokenizerModel, lines: Sequence[str | bytes], max_len: int = DEFAULT_MAX_LEN) -> EncodedBatch:
    ids = np.full((len(lines), max_len), PAD_ID, dtype=np.int64)
    masks = np.zeros((len(lines), max_len), dtype=np.int64)
    for row, line in enumerate(lines):
        line_ids, line_mask = encode_line(tok, line, max_len)
        ids[row] = line_ids
        masks[row] = line_mask
    return EncodedBatch(ids, masks)


def encode_chunked(
    tok: TokenizerModel,
    lines: Sequence[str | bytes],
    chunk_size: int = DEFAULT_CHUNK_SIZE,
    max_len: int = DEFAULT_MAX_LEN,
) -> EncodedBatch:
    """
    Encodes lines chunk by chunk and concatenates the blocks along the batch axis.

    The result is identical to encoding all lines at once, whatever the chunk size.
    """
    if chunk_size < 1:
        raise ConfigError(f"chunk_size must be >= 1, got {chunk_size}")
    num_chunks = -(-len(lines) // chunk_size)
    id_blocks, mask_blocks = [], []
    for i in range(num_chunks):
        chunk = encode_lines(tok, lines[i * chunk_size : (i + 1) * chunk_size], max_len)
        id_blocks.append(chunk.input_ids)
        mask_blocks.append(chunk.attention_masks)
    if not id_blocks:
        empty = np.zeros((0, max_len), dtype=np.int64)
        return EncodedBatch(empty, empty.copy())
    logger.debug(f"Encoded {len(lines)} lines in {num_chunks} chunk(s) of {chunk_size}")
    return EncodedBatch(np.concatenate(id_blocks, axis=0), np.concatenate(mask_blocks, axis=0))


def decode(tok: TokenizerModel, ids: Iterable[int]) -> str:
    return tok.decode(ids).decode("utf-8", errors="replace")


def sequence_length_stats(tok: TokenizerModel, lines: Sequence[str | bytes]) -> dict[str, float]:
    """Untruncated framed lengths (tokens + 2) over the lines: min, max, mean."""
    if not lines:
        return {"min": 0, "max": 0, "mean": 0.0}
    lengths = np.array([len(tok.tokenize(line)) + 2 for line in lines])
    return {"min": int(lengths.min()), "max": int(lengths.max()), "mean": float(lengths.mean())}


def save_tokenizer(tok: TokenizerModel, directory: Path | str) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = [f"  {json.dumps(token, ensure_ascii=False)}: {token_id}" for token, token_id in tok.vocab.items()]
    with open(directory / VOCAB_FILENAME, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("{\n" + ",\n".join(entries) + "\n}\n")
    with open(directory / MERGES_FILENAME, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(f"{MERGES_HEADER} vocab_size={tok.vocab_size} min_frequency={tok.min_frequency}\n")
        for left, right in tok.merges:
            handle.write(f"{_to_unicode(left)} {_to_unicode(right)}\n")


def _parse_header(header: str, path: Path) -> dict[str, int]:
    if not header.startswith(MERGES_HEADER):
        raise CorruptFile(f"{path} does not start with {MERGES_HEADER!r}")
    settings = {}
    for item in header[len(MERGES_HEADER) :].split():
        key, _, value = item.partition("=")
        if key not in ("vocab_size", "min_frequency") or not value.isdigit():
            raise CorruptFile(f"{path} header has a malformed setting {item!r}")
        settings[key] = int(value)
    return settings


def load_tokenizer(directory: Path | str) -> TokenizerModel:
    """
    Loads and validates a tokenizer saved by :func:`save_tokenizer`.

    :raises MissingFile: If either file is absent.
    :raises CorruptFile: If the files are malformed or disagree with each other.
    """
    directory = Path(directory)
    vocab_path, merges_path = directory / VOCAB_FILENAME, directory / MERGES_FILENAME
    for path in (vocab_path, merges_path):
        if not path.is_file():
            raise MissingFile(f"Tokenizer file not found: {path}")

    try:
        with open(vocab_path, "r", encoding="utf-8") as handle:
            vocab = json.load(handle)
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise CorruptFile(f"{vocab_path} is not valid JSON: {e}") from e
    if not isinstance(vocab, dict) or not all(isinstance(v, int) for v in vocab.values()):
        raise CorruptFile(f"{vocab_path} must map token strings to integer ids")

    with open(merges_path, "r", encoding="utf-8") as handle:
        lines = handle.read().splitlines()
    if not lines:
        raise CorruptFile(f"{merges_path} is empty")
    settings = _parse_header(lines[0], merges_path)
    merges = []
    for number, line in enumerate(lines[1:], start=2):
        parts = line.split(" ")
        if len(parts) != 2 or not all(parts):
            raise CorruptFile(f"{merges_path}:{number} is not a 'left right' pair: {line!r}")
        merges.append((_from_unicode(parts[0]), _from_unicode(parts[1])))

    specials = tuple(token for token, _ in sorted(((t, i) for t, i in vocab.items() if i < len(SPECIAL_TOKENS)), key=lambda e: e[1]))
    if specials != SPECIAL_TOKENS:
        raise CorruptFile(f"{vocab_path} special tokens {specials} differ from {SPECIAL_TOKENS}")
    tok = TokenizerModel(
        merges=merges,
        vocab_size=settings.get("vocab_size", max(vocab.values()) + 1),
        min_frequency=settings.get("min_frequency", DEFAULT_MIN_FREQUENCY),
    )
    if tok.vocab != vocab:
        raise CorruptFile(f"{vocab_path} and {merges_path} disagree")
    return tok
