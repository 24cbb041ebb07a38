"""
Best-effort flow feature extraction from classic libpcap captures.

Packets are grouped by (src IP, dst IP, src port, dst port, protocol) within
consecutive time windows. Each flow becomes one row filled from the
following subset of the schema; every other schema column is "0":

    frame.time, ip.src_host, ip.dst_host,
    arp.opcode, arp.hw.size, arp.src.proto_ipv4, arp.dst.proto_ipv4,
    icmp.checksum, icmp.seq_le,
    tcp.srcport, tcp.dstport, tcp.seq, tcp.ack, tcp.ack_raw, tcp.checksum,
    tcp.flags, tcp.flags.ack, tcp.len, tcp.payload,
    tcp.connection.syn, tcp.connection.synack, tcp.connection.fin, tcp.connection.rst,
    udp.port, udp.stream,
    http.request.method, http.request.uri.query, http.request.version,
    http.request.full_uri, http.referer, http.content_length, http.response,
    http.file_data,
    dns.qry.name, dns.qry.name.len, dns.qry.type, dns.qry.qu

Per-field values come from the first packet in the flow that carries the
field, packets being ordered by (timestamp, raw bytes) so that reordering
packets with equal timestamps never changes the row. Connection flags are
"1" when any packet in the flow sets them.
"""

from __future__ import annotations

import logging
import socket
import struct
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any
from urllib.parse import urlsplit

import dpkt

from .constants import MISSING_VALUE, PCAP_MAGIC_MICRO, PCAP_MAGIC_NANO
from .errors import BadConfig, MalformedCapture, MissingFile
from .ingest import FeatureTable
from .logger import Logger
from .schema import FeatureSchema

PCAPNG_MAGIC = 0x0A0D0D0A
_CLASSIC_MAGICS = {
    PCAP_MAGIC_MICRO,
    PCAP_MAGIC_NANO,
    int.from_bytes(PCAP_MAGIC_MICRO.to_bytes(4, "big"), "little"),
    int.from_bytes(PCAP_MAGIC_NANO.to_bytes(4, "big"), "little"),
}
_PROTO_ARP = 0x0806
_LINKTYPE_RAW = 101

FlowKey = tuple[int, str, str, int, int, int]


@dataclass
class _Flow:
    key: FlowKey
    packets: list[tuple[float, bytes, Any]] = field(default_factory=list)

    @property
    def first_seen(self) -> float:
        return min(ts for ts, _, _ in self.packets)


def _ip(raw: bytes) -> str:
    return socket.inet_ntoa(raw)


class FlowExtractor:
    """
    Reads a capture and produces one feature row per flow.
    """

    def __init__(self, schema: FeatureSchema, window: float | None = None, debug: bool = False) -> None:
        """
        :param schema: Output schema; unsupported columns are filled with "0".
        :type schema: FeatureSchema
        :param window: Window length in seconds; None treats the whole capture as one window.
        :type window: float | None
        :param debug: Enable debug logging.
        :type debug: bool
        """
        if window is not None and window <= 0:
            raise BadConfig(f"window must be positive, got {window}")
        self.schema = schema
        self.window = window
        self.debug = debug
        self.log: logging.Logger = Logger(self.__class__.__name__, debug=debug)
        self.skipped = 0

    def extract(self, pcap_path: Path | str) -> FeatureTable:
        pcap_path = Path(pcap_path)
        packets = self._read_packets(pcap_path)
        if not packets:
            self.log.info(f"{pcap_path} contains no packets")
            return FeatureTable(schema=self.schema, rows=())

        start = min(ts for ts, _, _ in packets)
        flows: dict[FlowKey, _Flow] = {}
        for ts, raw, parsed in packets:
            key = self._flow_key(ts, start, parsed)
            if key is None:
                self.skipped += 1
                continue
            flows.setdefault(key, _Flow(key)).packets.append((ts, raw, parsed))

        ordered = sorted(flows.values(), key=lambda f: (f.first_seen, f.key))
        udp_streams: dict[FlowKey, int] = {}
        rows = []
        for flow in ordered:
            if flow.key[5] == dpkt.ip.IP_PROTO_UDP:
                udp_streams[flow.key] = len(udp_streams)
            features = self._flow_features(flow, udp_streams.get(flow.key))
            rows.append(tuple(features.get(name, MISSING_VALUE) for name in self.schema.names))
        self.log.info(
            f"Extracted {len(rows)} flows from {len(packets)} packets in {pcap_path} "
            f"({self.skipped} non-IPv4/ARP packets skipped)"
        )
        return FeatureTable(schema=self.schema, rows=tuple(rows))

    def _read_packets(self, pcap_path: Path) -> list[tuple[float, bytes, Any]]:
        if not pcap_path.is_file():
            raise MissingFile(f"Capture file not found: {pcap_path}")
        with open(pcap_path, "rb") as handle:
            head = handle.read(4)
            if len(head) < 4:
                raise MalformedCapture(f"{pcap_path} is too short to be a capture file")
            magic = struct.unpack(">I", head)[0]
            if magic == PCAPNG_MAGIC:
                raise MalformedCapture(f"{pcap_path} is pcapng; only classic libpcap captures are supported")
            if magic not in _CLASSIC_MAGICS:
                raise MalformedCapture(f"{pcap_path} has unknown capture magic 0x{magic:08x}")
            handle.seek(0)
            try:
                reader = dpkt.pcap.Reader(handle)
                datalink = reader.datalink()
                packets = []
                for ts, buf in reader:
                    packets.append((float(ts), bytes(buf), self._decode_link(datalink, buf)))
            except (ValueError, dpkt.dpkt.Error, struct.error) as e:
                raise MalformedCapture(f"Failed to read {pcap_path}: {e}") from e
        return packets

    def _decode_link(self, datalink: int, buf: bytes) -> Any:
        try:
            if datalink == dpkt.pcap.DLT_EN10MB:
                return dpkt.ethernet.Ethernet(buf).data
            if datalink == dpkt.pcap.DLT_LINUX_SLL:
                return dpkt.sll.SLL(buf).data
            if datalink in (dpkt.pcap.DLT_RAW, _LINKTYPE_RAW):
                return dpkt.ip.IP(buf)
        except (dpkt.dpkt.UnpackError, dpkt.dpkt.NeedData):
            return None
        raise MalformedCapture(f"Unsupported link type {datalink}")

    def _flow_key(self, ts: float, start: float, parsed: Any) -> FlowKey | None:
        window_index = 0 if self.window is None else int((ts - start) // self.window)
        if isinstance(parsed, dpkt.arp.ARP):
            return (window_index, _ip(parsed.spa), _ip(parsed.tpa), 0, 0, _PROTO_ARP)
        if not isinstance(parsed, dpkt.ip.IP):
            return None
        transport = parsed.data
        sport = getattr(transport, "sport", 0) if isinstance(transport, (dpkt.tcp.TCP, dpkt.udp.UDP)) else 0
        dport = getattr(transport, "dport", 0) if isinstance(transport, (dpkt.tcp.TCP, dpkt.udp.UDP)) else 0
        return (window_index, _ip(parsed.src), _ip(parsed.dst), sport, dport, parsed.p)

    def _flow_features(self, flow: _Flow, udp_stream: int | None) -> dict[str, str]:
        features: dict[str, str] = {}
        sticky_flags = {
            "tcp.connection.syn": False,
            "tcp.connection.synack": False,
            "tcp.connection.fin": False,
            "tcp.connection.rst": False,
        }

        def first(name: str, value: Any) -> None:
            if name not in features and value is not None:
                features[name] = str(value)

        packets = sorted(flow.packets, key=lambda p: (p[0], p[1]))
        first("frame.time", datetime.fromtimestamp(packets[0][0], tz=timezone.utc).isoformat())
        for _, _, parsed in packets:
            if isinstance(parsed, dpkt.arp.ARP):
                first("arp.opcode", parsed.op)
                first("arp.hw.size", parsed.hln)
                first("arp.src.proto_ipv4", _ip(parsed.spa))
                first("arp.dst.proto_ipv4", _ip(parsed.tpa))
                continue
            first("ip.src_host", _ip(parsed.src))
            first("ip.dst_host", _ip(parsed.dst))
            transport = parsed.data
            if isinstance(transport, dpkt.icmp.ICMP):
                first("icmp.checksum", transport.sum)
                echo = transport.data
                if isinstance(echo, dpkt.icmp.ICMP.Echo):
                    first("icmp.seq_le", struct.unpack("<H", struct.pack(">H", echo.seq))[0])
            elif isinstance(transport, dpkt.tcp.TCP):
                flags = transport.flags
                syn, ack = bool(flags & dpkt.tcp.TH_SYN), bool(flags & dpkt.tcp.TH_ACK)
                sticky_flags["tcp.connection.syn"] |= syn and not ack
                sticky_flags["tcp.connection.synack"] |= syn and ack
                sticky_flags["tcp.connection.fin"] |= bool(flags & dpkt.tcp.TH_FIN)
                sticky_flags["tcp.connection.rst"] |= bool(flags & dpkt.tcp.TH_RST)
                first("tcp.srcport", transport.sport)
                first("tcp.dstport", transport.dport)
                first("tcp.seq", transport.seq)
                first("tcp.ack", transport.ack if ack else 0)
                first("tcp.ack_raw", transport.ack)
                first("tcp.checksum", transport.sum)
                first("tcp.flags", flags)
                first("tcp.flags.ack", int(ack))
                first("tcp.len", len(transport.data))
                if transport.data:
                    first("tcp.payload", bytes(transport.data).hex())
                    self._http_features(bytes(transport.data), first)
            elif isinstance(transport, dpkt.udp.UDP):
                first("udp.port", transport.dport)
                first("udp.stream", udp_stream)
                if 53 in (transport.sport, transport.dport):
                    self._dns_features(bytes(transport.data), first)

        for name, value in sticky_flags.items():
            if flow.key[5] == dpkt.ip.IP_PROTO_TCP:
                features[name] = "1" if value else "0"
        return features

    def _http_features(self, payload: bytes, first: Any) -> None:
        try:
            request = dpkt.http.Request(payload)
        except (dpkt.dpkt.UnpackError, dpkt.dpkt.NeedData, ValueError):
            request = None
        if request is not None:
            first("http.request.method", request.method)
            first("http.request.version", f"HTTP/{request.version}")
            query = urlsplit(request.uri).query
            if query:
                first("http.request.uri.query", "?" + query)
            host = request.headers.get("host")
            first("http.request.full_uri", f"http://{host}{request.uri}" if host else request.uri)
            first("http.referer", request.headers.get("referer"))
            first("http.content_length", request.headers.get("content-length"))
            if request.body:
                first("http.file_data", request.body.decode("utf-8", errors="replace"))
            return
        try:
            response = dpkt.http.Response(payload)
        except (dpkt.dpkt.UnpackError, dpkt.dpkt.NeedData, ValueError):
            return
        first("http.response", 1)
        first("http.content_length", response.headers.get("content-length"))

    def _dns_features(self, payload: bytes, first: Any) -> None:
        try:
            message = dpkt.dns.DNS(payload)
        except (dpkt.dpkt.UnpackError, dpkt.dpkt.NeedData):
            return
        if message.qd:
            question = message.qd[0]
            first("dns.qry.name", question.name)
            first("dns.qry.name.len", len(question.name))
            first("dns.qry.type", question.type)
            first("dns.qry.qu", int(bool(question.cls & 0x8000)))


def extract_flows(pcap_path: Path | str, window: float | None, schema: FeatureSchema, debug: bool = False) -> FeatureTable:
    """
    Extracts one feature row per flow from a classic libpcap capture.

    :param pcap_path: Capture file (micro- or nanosecond, either byte order).
    :param window: Window length in seconds, or None for the whole capture.
    :param schema: Output schema.
    :return: Unlabeled table in first-packet timestamp order.
    :raises MalformedCapture: If the file is not a readable classic capture.
    """
    return FlowExtractor(schema, window=window, debug=debug).extract(pcap_path)
