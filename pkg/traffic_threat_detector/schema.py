"""
Feature schema and traffic class definitions.

The built-in schema is the 61-column Edge-IIoTset feature set. Schema
documents are YAML with a single ``columns`` list::

    columns:
      - name: tcp.dstport        # required, unique
        layer: TCP               # protocol layer, free text
        kind: unsigned_int       # string | unsigned_int | ipv4 | bytes | datetime
        excluded: false          # optional, default false

Column order in the document is the schema order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable

import yaml

from .constants import CLASS_NAMES, DEFAULT_EXCLUDED_COLUMNS
from .errors import ConfigError, MissingFile, UnknownLabel

VALUE_KINDS = ("string", "unsigned_int", "ipv4", "bytes", "datetime")


@dataclass(frozen=True)
class ColumnSpec:
    name: str
    layer: str
    kind: str

    def __post_init__(self) -> None:
        if not self.name:
            raise ConfigError("Schema column names must be non-empty")
        if self.kind not in VALUE_KINDS:
            raise ConfigError(f"Column {self.name!r} has unknown kind {self.kind!r}")


@dataclass(frozen=True)
class FeatureSchema:
    columns: tuple[ColumnSpec, ...]
    excluded: frozenset[str] = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        names = [column.name for column in self.columns]
        duplicates = sorted({name for name in names if names.count(name) > 1})
        if duplicates:
            raise ConfigError(f"Duplicate schema columns: {', '.join(duplicates)}")
        unknown = sorted(set(self.excluded) - set(names))
        if unknown:
            raise ConfigError(f"Excluded columns not in schema: {', '.join(unknown)}")

    @property
    def names(self) -> list[str]:
        return [column.name for column in self.columns]

    def __len__(self) -> int:
        return len(self.columns)

    def index_of(self, name: str) -> int:
        return self.names.index(name)

    def retained(self) -> FeatureSchema:
        """Schema of the columns that survive exclusion, with an empty exclusion set."""
        return self.subset(c.name for c in self.columns if c.name not in self.excluded)

    def with_excluded(self, excluded: Iterable[str]) -> FeatureSchema:
        names = set(self.names)
        return FeatureSchema(columns=self.columns, excluded=frozenset(e for e in excluded if e in names))

    def subset(self, names: Iterable[str]) -> FeatureSchema:
        """Schema of the named columns in the given order, keeping their exclusions."""
        wanted = list(names)
        by_name = {c.name: c for c in self.columns}
        unknown = [n for n in wanted if n not in by_name]
        if unknown:
            raise ConfigError(f"Columns not in schema: {', '.join(unknown)}")
        return FeatureSchema(
            columns=tuple(by_name[n] for n in wanted),
            excluded=frozenset(e for e in self.excluded if e in wanted),
        )

    @classmethod
    def from_names(cls, names: Iterable[str], excluded: Iterable[str] | None = None) -> FeatureSchema:
        """
        Builds a string-kind schema from bare column names.

        With ``excluded`` left as None, the default exclusion set applies to
        whichever of its columns are present.
        """
        columns = tuple(ColumnSpec(name=n, layer=n.split(".")[0].upper(), kind="string") for n in names)
        schema = cls(columns=columns)
        return schema.with_excluded(DEFAULT_EXCLUDED_COLUMNS if excluded is None else excluded)


@dataclass(frozen=True)
class ClassLabel:
    name: str
    index: int


CLASS_LABELS: tuple[ClassLabel, ...] = tuple(ClassLabel(name, i) for i, name in enumerate(CLASS_NAMES))
_LABEL_INDEX = {label.name: label.index for label in CLASS_LABELS}


def label_index(name: str) -> int:
    """
    Maps a class name to its fixed index.

    :param name: Class name as it appears in the dataset label column.
    :type name: str
    :return: Index in [0, 14].
    :rtype: int
    :raises UnknownLabel: If the name is outside the 15-class set.
    """
    try:
        return _LABEL_INDEX[name]
    except KeyError:
        raise UnknownLabel(f"Unknown traffic class {name!r}") from None


def label_name(index: int) -> str:
    return CLASS_NAMES[index]


# name, protocol layer, value kind
_EDGE_IIOT_COLUMNS: tuple[tuple[str, str, str], ...] = (
    ("frame.time", "Frame", "datetime"),
    ("ip.src_host", "IP", "string"),
    ("ip.dst_host", "IP", "string"),
    ("arp.dst.proto_ipv4", "ARP", "ipv4"),
    ("arp.opcode", "ARP", "unsigned_int"),
    ("arp.hw.size", "ARP", "unsigned_int"),
    ("arp.src.proto_ipv4", "ARP", "ipv4"),
    ("icmp.checksum", "ICMP", "unsigned_int"),
    ("icmp.seq_le", "ICMP", "unsigned_int"),
    ("icmp.transmit_timestamp", "ICMP", "unsigned_int"),
    ("icmp.unused", "ICMP", "bytes"),
    ("http.file_data", "HTTP", "string"),
    ("http.content_length", "HTTP", "unsigned_int"),
    ("http.request.uri.query", "HTTP", "string"),
    ("http.request.method", "HTTP", "string"),
    ("http.referer", "HTTP", "string"),
    ("http.request.full_uri", "HTTP", "string"),
    ("http.request.version", "HTTP", "string"),
    ("http.response", "HTTP", "unsigned_int"),
    ("http.tls_port", "HTTP", "unsigned_int"),
    ("tcp.ack", "TCP", "unsigned_int"),
    ("tcp.ack_raw", "TCP", "unsigned_int"),
    ("tcp.checksum", "TCP", "unsigned_int"),
    ("tcp.connection.fin", "TCP", "unsigned_int"),
    ("tcp.connection.rst", "TCP", "unsigned_int"),
    ("tcp.connection.syn", "TCP", "unsigned_int"),
    ("tcp.connection.synack", "TCP", "unsigned_int"),
    ("tcp.dstport", "TCP", "unsigned_int"),
    ("tcp.flags", "TCP", "unsigned_int"),
    ("tcp.flags.ack", "TCP", "unsigned_int"),
    ("tcp.len", "TCP", "unsigned_int"),
    ("tcp.options", "TCP", "bytes"),
    ("tcp.payload", "TCP", "bytes"),
    ("tcp.seq", "TCP", "unsigned_int"),
    ("tcp.srcport", "TCP", "unsigned_int"),
    ("udp.port", "UDP", "unsigned_int"),
    ("udp.stream", "UDP", "unsigned_int"),
    ("udp.time_delta", "UDP", "string"),
    ("dns.qry.name", "DNS", "string"),
    ("dns.qry.name.len", "DNS", "unsigned_int"),
    ("dns.qry.qu", "DNS", "unsigned_int"),
    ("dns.qry.type", "DNS", "unsigned_int"),
    ("dns.retransmission", "DNS", "unsigned_int"),
    ("dns.retransmit_request", "DNS", "unsigned_int"),
    ("dns.retransmit_request_in", "DNS", "unsigned_int"),
    ("mqtt.conack.flags", "MQTT", "string"),
    ("mqtt.conflag.cleansess", "MQTT", "unsigned_int"),
    ("mqtt.conflags", "MQTT", "string"),
    ("mqtt.hdrflags", "MQTT", "string"),
    ("mqtt.len", "MQTT", "unsigned_int"),
    ("mqtt.msg_decoded_as", "MQTT", "string"),
    ("mqtt.msg", "MQTT", "string"),
    ("mqtt.msgtype", "MQTT", "unsigned_int"),
    ("mqtt.proto_len", "MQTT", "unsigned_int"),
    ("mqtt.protoname", "MQTT", "string"),
    ("mqtt.topic", "MQTT", "string"),
    ("mqtt.topic_len", "MQTT", "unsigned_int"),
    ("mqtt.ver", "MQTT", "unsigned_int"),
    ("mbtcp.len", "Modbus/TCP", "unsigned_int"),
    ("mbtcp.trans_id", "Modbus/TCP", "unsigned_int"),
    ("mbtcp.unit_id", "Modbus/TCP", "unsigned_int"),
)


def default_schema() -> FeatureSchema:
    """The 61-column Edge-IIoTset schema with the default exclusion set."""
    return FeatureSchema(
        columns=tuple(ColumnSpec(name, layer, kind) for name, layer, kind in _EDGE_IIOT_COLUMNS),
        excluded=frozenset(DEFAULT_EXCLUDED_COLUMNS),
    )


def load_schema(path: Path | str) -> FeatureSchema:
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"Schema file not found: {path}")
    with open(path, "r", encoding="utf-8") as handle:
        document = yaml.safe_load(handle)
    if not isinstance(document, dict) or not isinstance(document.get("columns"), list):
        raise ConfigError(f"Schema file {path} must contain a 'columns' list")
    columns: list[ColumnSpec] = []
    excluded: list[str] = []
    for position, entry in enumerate(document["columns"]):
        if not isinstance(entry, dict) or "name" not in entry:
            raise ConfigError(f"schema.columns[{position}] must be a mapping with a 'name'")
        unknown = set(entry) - {"name", "layer", "kind", "excluded"}
        if unknown:
            raise ConfigError(f"schema.columns[{position}].{sorted(unknown)[0]} is not a recognized key")
        name = str(entry["name"])
        columns.append(ColumnSpec(name=name, layer=str(entry.get("layer", "")), kind=str(entry.get("kind", "string"))))
        if entry.get("excluded", False):
            excluded.append(name)
    return FeatureSchema(columns=tuple(columns), excluded=frozenset(excluded))


def save_schema(schema: FeatureSchema, path: Path | str) -> None:
    entries: list[dict[str, Any]] = [
        {
            "name": column.name,
            "layer": column.layer,
            "kind": column.kind,
            "excluded": column.name in schema.excluded,
        }
        for column in schema.columns
    ]
    with open(path, "w", encoding="utf-8") as handle:
        yaml.safe_dump({"columns": entries}, handle, sort_keys=False)
