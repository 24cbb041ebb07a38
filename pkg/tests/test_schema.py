import pytest

from traffic_threat_detector.constants import CLASS_NAMES, DEFAULT_EXCLUDED_COLUMNS
from traffic_threat_detector.errors import ConfigError, MissingFile, UnknownLabel
from traffic_threat_detector.schema import (
    CLASS_LABELS,
    ColumnSpec,
    FeatureSchema,
    default_schema,
    label_index,
    label_name,
    load_schema,
    save_schema,
)


def test_default_schema_shape():
    schema = default_schema()
    assert len(schema) == 61
    assert schema.names[0] == "frame.time"
    assert schema.names[-1] == "mbtcp.unit_id"
    assert schema.excluded == frozenset(DEFAULT_EXCLUDED_COLUMNS)
    assert len(schema.retained()) == 61 - len(DEFAULT_EXCLUDED_COLUMNS)


def test_retained_keeps_order_and_clears_exclusions():
    schema = FeatureSchema.from_names(["a", "b", "c", "d"], excluded=["b"])
    retained = schema.retained()
    assert retained.names == ["a", "c", "d"]
    assert retained.excluded == frozenset()


def test_subset_reorders_and_keeps_exclusions():
    schema = FeatureSchema.from_names(["a", "b", "c", "d"], excluded=["b", "d"])
    subset = schema.subset(["d", "a"])
    assert subset.names == ["d", "a"]
    assert subset.excluded == frozenset({"d"})
    with pytest.raises(ConfigError, match="zz"):
        schema.subset(["a", "zz"])


def test_from_names_applies_default_exclusions():
    schema = FeatureSchema.from_names(["frame.time", "tcp.len"])
    assert schema.excluded == frozenset({"frame.time"})


def test_duplicate_columns_rejected():
    with pytest.raises(ConfigError):
        FeatureSchema.from_names(["a", "a"], excluded=[])


def test_unknown_kind_rejected():
    with pytest.raises(ConfigError):
        ColumnSpec(name="x", layer="X", kind="float")


def test_class_labels_fixed_order():
    assert len(CLASS_LABELS) == 15
    assert label_index("Normal") == 0
    assert label_index("Fingerprinting") == 14
    assert label_name(3) == "SQL_injection"
    assert [label_name(i) for i in range(15)] == list(CLASS_NAMES)


def test_unknown_label():
    with pytest.raises(UnknownLabel):
        label_index("normal")


def test_schema_yaml_roundtrip(tmp_path):
    path = tmp_path / "schema.yaml"
    save_schema(default_schema(), path)
    assert load_schema(path) == default_schema()


def test_load_schema_errors(tmp_path):
    with pytest.raises(MissingFile):
        load_schema(tmp_path / "absent.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("columns:\n  - name: a\n    colour: red\n")
    with pytest.raises(ConfigError):
        load_schema(bad)
