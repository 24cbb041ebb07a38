import socket

import dpkt
import pytest

from traffic_threat_detector.constants import MISSING_VALUE
from traffic_threat_detector.errors import BadConfig, MalformedCapture, MissingFile
from traffic_threat_detector.flows import FlowExtractor, extract_flows
from traffic_threat_detector.schema import default_schema

TEST_CLIENT = "10.0.0.1"
TEST_SERVER = "10.0.0.2"
TEST_HTTP_REQUEST = b"GET /login?user=admin HTTP/1.1\r\nHost: plc.local\r\n\r\n"


def _ethernet(ip: dpkt.ip.IP) -> bytes:
    return bytes(
        dpkt.ethernet.Ethernet(
            src=b"\x02\x00\x00\x00\x00\x01",
            dst=b"\x02\x00\x00\x00\x00\x02",
            type=dpkt.ethernet.ETH_TYPE_IP,
            data=ip,
        )
    )


def _tcp(sport: int, dport: int, flags: int, payload: bytes = b"", seq: int = 100) -> bytes:
    segment = dpkt.tcp.TCP(sport=sport, dport=dport, seq=seq, ack=0, flags=flags, data=payload)
    ip = dpkt.ip.IP(
        src=socket.inet_aton(TEST_CLIENT), dst=socket.inet_aton(TEST_SERVER), p=dpkt.ip.IP_PROTO_TCP, data=segment
    )
    return _ethernet(ip)


def _udp(sport: int, dport: int, payload: bytes = b"ping") -> bytes:
    datagram = dpkt.udp.UDP(sport=sport, dport=dport, data=payload)
    datagram.ulen = len(datagram)
    ip = dpkt.ip.IP(
        src=socket.inet_aton(TEST_CLIENT), dst=socket.inet_aton(TEST_SERVER), p=dpkt.ip.IP_PROTO_UDP, data=datagram
    )
    return _ethernet(ip)


def _write_pcap(path, packets):
    with open(path, "wb") as handle:
        writer = dpkt.pcap.Writer(handle)
        for ts, buf in packets:
            writer.writepkt(buf, ts=ts)
    return path


def _row(table, index):
    return dict(zip(table.schema.names, table.rows[index]))


# --- extraction ---


def test_one_row_per_flow_in_first_seen_order(tmp_path):
    capture = _write_pcap(
        tmp_path / "flows.pcap",
        [
            (1.0, _tcp(40000, 80, dpkt.tcp.TH_SYN)),
            (2.0, _udp(5000, 9999)),
            (3.0, _tcp(40000, 80, dpkt.tcp.TH_ACK | dpkt.tcp.TH_FIN, seq=101)),
        ],
    )
    table = extract_flows(capture, None, default_schema())
    assert len(table) == 2
    assert table.labels is None
    assert all(len(row) == 61 for row in table.rows)

    tcp_row = _row(table, 0)
    assert tcp_row["ip.src_host"] == TEST_CLIENT
    assert tcp_row["ip.dst_host"] == TEST_SERVER
    assert tcp_row["tcp.srcport"] == "40000"
    assert tcp_row["tcp.dstport"] == "80"
    assert tcp_row["tcp.seq"] == "100"
    assert tcp_row["tcp.connection.syn"] == "1"
    assert tcp_row["tcp.connection.fin"] == "1"
    assert tcp_row["tcp.connection.rst"] == "0"
    assert tcp_row["udp.port"] == MISSING_VALUE
    assert tcp_row["mqtt.topic"] == MISSING_VALUE

    udp_row = _row(table, 1)
    assert udp_row["udp.port"] == "9999"
    assert udp_row["udp.stream"] == "0"
    assert udp_row["tcp.dstport"] == MISSING_VALUE


def test_window_splits_flows(tmp_path):
    capture = _write_pcap(
        tmp_path / "window.pcap",
        [(0.0, _udp(5000, 9999)), (100.0, _udp(5000, 9999))],
    )
    assert len(extract_flows(capture, None, default_schema())) == 1
    assert len(extract_flows(capture, 60.0, default_schema())) == 2


def test_equal_timestamp_reordering_is_stable(tmp_path):
    first = _tcp(40000, 80, dpkt.tcp.TH_SYN, seq=1)
    second = _tcp(40000, 80, dpkt.tcp.TH_ACK, seq=2)
    forward = _write_pcap(tmp_path / "forward.pcap", [(5.0, first), (5.0, second)])
    backward = _write_pcap(tmp_path / "backward.pcap", [(5.0, second), (5.0, first)])
    assert extract_flows(forward, None, default_schema()) == extract_flows(backward, None, default_schema())


def test_http_request_fields(tmp_path):
    capture = _write_pcap(
        tmp_path / "http.pcap",
        [(1.0, _tcp(40001, 80, dpkt.tcp.TH_ACK | dpkt.tcp.TH_PUSH, payload=TEST_HTTP_REQUEST))],
    )
    row = _row(extract_flows(capture, None, default_schema()), 0)
    assert row["http.request.method"] == "GET"
    assert row["http.request.version"] == "HTTP/1.1"
    assert row["http.request.uri.query"] == "?user=admin"
    assert row["http.request.full_uri"] == "http://plc.local/login?user=admin"
    assert row["tcp.len"] == str(len(TEST_HTTP_REQUEST))
    assert row["tcp.payload"] == TEST_HTTP_REQUEST.hex()


def test_empty_capture(tmp_path):
    capture = _write_pcap(tmp_path / "empty.pcap", [])
    table = extract_flows(capture, None, default_schema())
    assert len(table) == 0


# --- errors ---


def test_missing_capture(tmp_path):
    with pytest.raises(MissingFile):
        extract_flows(tmp_path / "absent.pcap", None, default_schema())


def test_pcapng_rejected(tmp_path):
    path = tmp_path / "capture.pcapng"
    path.write_bytes(bytes.fromhex("0a0d0d0a") + b"\x00" * 28)
    with pytest.raises(MalformedCapture):
        extract_flows(path, None, default_schema())


def test_garbage_rejected(tmp_path):
    path = tmp_path / "garbage.pcap"
    path.write_bytes(b"not a capture at all")
    with pytest.raises(MalformedCapture):
        extract_flows(path, None, default_schema())


def test_non_positive_window_rejected():
    with pytest.raises(BadConfig):
        FlowExtractor(default_schema(), window=0)
