import hashlib

import numpy as np
import pytest

from traffic_threat_detector.errors import ArityMismatch, BadTruncation, ConfigError, CorruptFile, DataError, MissingFile
from traffic_threat_detector.ingest import FeatureTable
from traffic_threat_detector.ppfle import (
    DataList,
    HashConfig,
    TokenLine,
    concat_cell,
    encode_row,
    encode_table,
    hash_cell,
    leaks_raw_values,
    read_corpus,
    write_corpus,
)
from traffic_threat_detector.schema import FeatureSchema

TEST_SCHEMA = FeatureSchema.from_names(["tcp.len", "ip.src_host", "mqtt.topic"], excluded=["ip.src_host"])
TEST_VALUE_POOL = ["0", "40", "GET", "sensors/temp", "tok_xyz", "", "Ünïcode", "a b"]


def _oracle(name: str, value: str) -> str:
    return hashlib.sha256(f"{name.upper()}${value}".encode("utf-8")).hexdigest()


def test_concat_cell_uppercases_column_only():
    assert str(concat_cell("tcp.flags", "0x0010")) == "TCP.FLAGS$0x0010"
    assert str(concat_cell("mqtt.topic", "")) == "MQTT.TOPIC$"


def test_hash_cell_matches_sha256():
    cell = concat_cell("tcp.len", "40")
    digest = hash_cell(cell)
    assert digest == _oracle("tcp.len", "40")
    assert len(digest) == 64
    assert digest == digest.lower()


def test_hash_cell_truncation_is_prefix():
    cell = concat_cell("tcp.len", "40")
    assert hash_cell(cell, HashConfig(truncation=16)) == _oracle("tcp.len", "40")[:16]


def test_hash_config_validation():
    with pytest.raises(BadTruncation):
        HashConfig(truncation=7)
    with pytest.raises(BadTruncation):
        HashConfig(truncation=66)
    with pytest.raises(ConfigError):
        HashConfig(algorithm="no-such-hash")
    assert HashConfig(algorithm="md5").digest_length == 32


def test_encode_row_skips_excluded_columns():
    line = encode_row(["40", "sensors/temp"], TEST_SCHEMA)
    assert line.digests == (_oracle("tcp.len", "40"), _oracle("mqtt.topic", "sensors/temp"))
    assert line.render() == " ".join(line.digests)


def test_encode_row_arity():
    with pytest.raises(ArityMismatch):
        encode_row(["40", "10.0.0.1", "sensors/temp"], TEST_SCHEMA)


def test_encode_table_matches_oracle_on_random_tables():
    rng = np.random.default_rng(0)
    for _ in range(100):
        n_rows = int(rng.integers(1, 6))
        rows = tuple(tuple(str(rng.choice(TEST_VALUE_POOL)) for _ in range(3)) for _ in range(n_rows))
        table = FeatureTable(schema=TEST_SCHEMA, rows=rows)
        encoded = encode_table(table)
        assert len(encoded) == n_rows
        for row, line in zip(rows, encoded.lines):
            assert line.digests == (_oracle("tcp.len", row[0]), _oracle("mqtt.topic", row[2]))
            assert len(line.render()) == 2 * 64 + 1


def test_encode_table_keeps_labels():
    table = FeatureTable(schema=TEST_SCHEMA, rows=(("1", "x", "a"), ("2", "y", "b")), labels=("Normal", "XSS"))
    assert encode_table(table).labels == ("Normal", "XSS")


def test_same_value_in_different_columns_hashes_differently():
    schema = FeatureSchema.from_names(["tcp.srcport", "tcp.dstport"], excluded=[])
    line = encode_row(["80", "80"], schema)
    assert line.digests[0] != line.digests[1]


def test_corpus_hides_raw_values():
    rows = (("len-1234567", "10.1.2.3", "sensors/kitchen/temp"), ("len-99999", "10.9.9.9", "plc/unit/run"))
    table = FeatureTable(schema=TEST_SCHEMA, rows=rows)
    text = "\n".join(encode_table(table).texts())
    assert leaks_raw_values(text, table) == []


TEST_CORPUS_ALPHABET = set("0123456789abcdef \n")
TEST_RAW_ALPHABET = list("0123456789abcdefXYZghq./:-_ ")


def _hex_lookalike(value: str) -> bool:
    return set(value) <= TEST_CORPUS_ALPHABET


def test_random_tables_have_fixed_length_lines_and_no_raw_values():
    rng = np.random.default_rng(42)
    for _ in range(1000):
        n_columns = int(rng.integers(2, 7))
        names = [f"col{i}.field" for i in range(n_columns)]
        excluded = [name for name in names[1:] if rng.random() < 0.3]
        schema = FeatureSchema.from_names(names, excluded=excluded)
        rows = tuple(
            tuple("".join(rng.choice(TEST_RAW_ALPHABET, size=int(rng.integers(0, 13)))) for _ in names)
            for _ in range(int(rng.integers(1, 5)))
        )
        table = FeatureTable(schema=schema, rows=rows)
        encoded = encode_table(table, HashConfig(truncation=int(rng.choice([8, 16, 64]))))
        assert {len(line.digests) for line in encoded.lines} == {n_columns - len(excluded)}
        assert len({len(text) for text in encoded.texts()}) == 1
        text = "\n".join(encoded.texts())
        assert all(_hex_lookalike(value) for value in leaks_raw_values(text, table))


def test_hex_lookalike_values_can_match_by_chance():
    digest = _oracle("tcp.len", "40")
    lookalike = digest[10:18]
    table = FeatureTable(schema=TEST_SCHEMA, rows=(("40", "10.0.0.1", lookalike),))
    text = "\n".join(encode_table(table).texts())
    assert _hex_lookalike(lookalike)
    assert leaks_raw_values(text, table) == [lookalike]


def test_data_list_rejects_ragged_lines():
    with pytest.raises(ArityMismatch):
        DataList(lines=(TokenLine(("aa", "bb")), TokenLine(("aa",))))


def test_write_and_read_corpus(tmp_path):
    table = FeatureTable(schema=TEST_SCHEMA, rows=(("1", "x", "a"), ("2", "y", "b")), labels=("Normal", "XSS"))
    encoded = encode_table(table)
    corpus, labels = tmp_path / "train.corpus.txt", tmp_path / "train.labels.txt"
    write_corpus(encoded, corpus, labels)
    text = corpus.read_text()
    assert text.endswith("\n")
    assert text.count("\n") == 2
    assert labels.read_text() == "Normal\nXSS\n"
    assert read_corpus(corpus, labels) == encoded


def test_write_labels_for_unlabeled_corpus(tmp_path):
    encoded = encode_table(FeatureTable(schema=TEST_SCHEMA, rows=(("1", "x", "a"),)))
    with pytest.raises(DataError):
        write_corpus(encoded, tmp_path / "c.txt", tmp_path / "l.txt")


def test_read_corpus_errors(tmp_path):
    with pytest.raises(MissingFile):
        read_corpus(tmp_path / "absent.txt")
    corpus = tmp_path / "c.txt"
    corpus.write_text("aa bb\ncc dd\n")
    labels = tmp_path / "l.txt"
    labels.write_text("Normal\n")
    with pytest.raises(CorruptFile):
        read_corpus(corpus, labels)
