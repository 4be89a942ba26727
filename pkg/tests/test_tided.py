import json
import math
import os
from collections import Counter

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from features.errors import EmptyCapture, EmptyInput, UnknownField
from features.pcap_io.packets import ACK, SYN, decode_frame
from features.stats_core.stats_core import TimeWindowSeries, compute_statistics
from features.tided.report import REPORT_FILE, SUMMARY_FILE, emit_report, summary_text
from features.tided.tided import (
    DEFAULT_FEATURES,
    ChecksumResult,
    PortResult,
    TidedReport,
    build_report,
    checksum_validity,
    cumulative_entropy_series,
    entropy,
    entropy_series,
    normalized_entropy,
    novelty_distribution,
    novelty_normalized_entropy,
    payload_availability,
    port_validity,
    samples_from_packets,
)
from tests.builders import (
    BASE_US,
    CLIENT,
    SERVER,
    corrupt_tcp_checksum,
    random_traffic,
    tcp_frame,
    udp_frame,
    write_capture,
)

FROZEN_IPS = ("10.1.0.1", "10.1.0.2", "10.1.0.3", "10.1.0.4")


def frozen_frames():
    """Ten 1 s windows: addresses 1, 2 and 3+4 appear first in windows 0-2, then every window repeats all four."""
    plan = [[0], [1], [2, 3]] + [[0, 1, 2, 3]] * 7
    timed = []
    for w, picks in enumerate(plan):
        for i in picks:
            timed.append((BASE_US + w * 1_000_000 + 500_000, udp_frame(FROZEN_IPS[i], SERVER, 5000, 6000)))
    return timed


def frozen_packets():
    return [(ts / 1e6, decode_frame(frame)) for ts, frame in frozen_frames()]


# --- Entropy ---

def test_entropy_of_three_to_one():
    assert entropy({"a": 3, "b": 1}) == pytest.approx(0.811278, abs=1e-6)
    assert normalized_entropy({"a": 3, "b": 1}) == pytest.approx(0.811278, abs=1e-6)


@pytest.mark.parametrize("n", [2, 4, 8, 16, 1024])
def test_uniform_entropy_is_log2_n(n):
    assert abs(entropy({i: 5 for i in range(n)}) - math.log2(n)) < 1e-9


def test_normalized_entropy_edge_cases():
    assert normalized_entropy({"only": 9}) == 0.0
    assert normalized_entropy({"a": 2, "b": 0}) == 0.0
    with pytest.raises(EmptyInput):
        normalized_entropy({})


@given(st.dictionaries(st.integers(0, 500), st.integers(1, 10_000), min_size=1, max_size=50))
def test_normalized_entropy_is_bounded(counts):
    assert 0.0 <= normalized_entropy(counts) <= 1.0


def test_novelty_normalized_entropy():
    series = TimeWindowSeries("src_ip", 1.0, (0.0, 1.0, 2.0), (2.0, 1.0, 1.0))
    assert novelty_normalized_entropy(series) == pytest.approx(0.946395, abs=1e-6)


# --- Diversity series ---

def test_frozen_capture_series():
    packets = frozen_packets()
    novelty = novelty_distribution(packets, "src_ip", n_windows=10)
    assert novelty.values == (1.0, 1.0, 2.0) + (0.0,) * 7
    per_window = entropy_series(packets, "src_ip", n_windows=10)
    assert per_window.values[:3] == (0.0, 0.0, 1.0)
    assert per_window.values[3:] == pytest.approx([2.0] * 7)
    cumulative = cumulative_entropy_series(packets, "src_ip", n_windows=10)
    assert cumulative.values[:2] == pytest.approx([0.0, 1.0])
    assert cumulative.values[2:] == pytest.approx([2.0] * 8)


def brute_force_windows(samples, start, end, n_windows):
    """(entropy, novelty, cumulative entropy) per window from (timestamp, value) pairs."""
    length = (end - start) / n_windows
    windows = [Counter() for _ in range(n_windows)]
    for ts, value in samples:
        w = int(math.floor((ts - start) / length)) if length > 0 else 0
        windows[min(max(w, 0), n_windows - 1)][value] += 1
    seen, cumulative, novelty, cum_entropy = set(), Counter(), [], []
    for counter in windows:
        novelty.append(len(set(counter) - seen))
        seen |= set(counter)
        cumulative.update(counter)
        cum_entropy.append(entropy(cumulative))
    return [entropy(c) for c in windows], novelty, cum_entropy


def brute_force_series(packets, feature, n_windows):
    times = [ts for ts, _ in packets]
    samples = [(ts, getattr(pkt.ip, feature)) for ts, pkt in packets]
    return brute_force_windows(samples, min(times), max(times), n_windows)


def test_series_match_brute_force():
    rng = np.random.default_rng(3)
    packets = []
    for _ in range(300):
        ts = BASE_US / 1e6 + float(rng.integers(0, 50_000)) / 1000
        src = f"10.2.{int(rng.integers(0, 4))}.{int(rng.integers(1, 30))}"
        packets.append((ts, decode_frame(udp_frame(src, SERVER, 1, 2, ttl=int(rng.choice([32, 64, 128]))))))
    packets.sort(key=lambda item: item[0])
    for feature in ("src_ip", "ttl"):
        expected = brute_force_series(packets, feature, 20)
        assert list(entropy_series(packets, feature, 20).values) == pytest.approx(expected[0], abs=1e-9)
        assert list(novelty_distribution(packets, feature, 20).values) == expected[1]
        assert list(cumulative_entropy_series(packets, feature, 20).values) == pytest.approx(expected[2], abs=1e-9)


def test_unknown_feature():
    with pytest.raises(UnknownField):
        samples_from_packets(frozen_packets(), ("colour",))


# --- Availability and validity ---

def test_payload_availability(db):
    assert payload_availability(db) == 0.5


def test_payload_availability_of_empty_capture(tmp_path):
    db = compute_statistics(write_capture(tmp_path / "e.pcap", []))
    with pytest.raises(EmptyCapture):
        payload_availability(db)


def test_checksum_validity_counts_bad_segments(tmp_path):
    good = tcp_frame(CLIENT, SERVER, 1, 80, SYN)
    bad = bytearray(tcp_frame(CLIENT, SERVER, 2, 80, ACK))
    bad[51] ^= 0xFF  # TCP checksum low byte
    cut = tcp_frame(CLIENT, SERVER, 3, 80, ACK, payload=b"z" * 30)[:-8]
    path = write_capture(tmp_path / "c.pcap", [(BASE_US, good), (BASE_US + 1, bytes(bad)), (BASE_US + 2, cut)])
    result = checksum_validity(path)
    assert result == ChecksumResult(correct_count=1, incorrect_count=1, incorrect_ratio=0.5, unverifiable_count=1)


def test_port_validity(db):
    result = port_validity(db)
    assert result == PortResult(well_known_count=80, registered_count=40, dynamic_count=0,
                                unassigned_count=40, port_zero_count=0)


def test_seven_of_a_hundred_corrupted_checksums(tmp_path):
    timed = []
    for i in range(100):
        frame = tcp_frame(CLIENT, SERVER, 40000 + i, 80, ACK, seq=i, payload=b"data")
        timed.append((BASE_US + i * 1000, corrupt_tcp_checksum(frame) if i < 7 else frame))
    result = checksum_validity(write_capture(tmp_path / "c.pcap", timed))
    assert result == ChecksumResult(correct_count=93, incorrect_count=7, incorrect_ratio=0.07, unverifiable_count=0)


# --- Recount on generated captures ---

def iana_assigned_ports():
    with open(os.path.join("database", "iana_ports.csv")) as f:
        rows = [line.strip() for line in f if line.strip() and not line.startswith("#")]
    return {int(row.split(",")[0]) for row in rows[1:]}


def recount_ports(dst_ports, assigned):
    well_known = registered = dynamic = unassigned = zero = 0
    for port in dst_ports:
        if port == 0:
            zero += 1
            continue
        if port < 1024:
            well_known += 1
        elif port < 49152:
            registered += 1
        else:
            dynamic += 1
        if port < 49152 and port not in assigned:
            unassigned += 1
    return PortResult(well_known, registered, dynamic, unassigned, zero)


@pytest.mark.parametrize("seed", range(50))
def test_report_matches_recount(tmp_path, seed):
    timed, facts = random_traffic(seed, 200, corrupt_rate=0.1)
    path = write_capture(tmp_path / "g.pcap", timed)
    report = build_report(path, compute_statistics(path), DEFAULT_FEATURES, n_windows=10)
    ipv4 = [f for f in facts if f.kind != "other"]
    tcp = [f for f in ipv4 if f.kind == "tcp"]

    assert report.payload_ratio == pytest.approx(sum(1 for f in ipv4 if f.payload_len) / len(facts))

    bad = sum(1 for f in tcp if f.corrupt)
    assert report.checksum_result == ChecksumResult(len(tcp) - bad, bad, bad / len(tcp), 0)

    assert report.port_result == recount_ports([f.dst_port for f in ipv4], iana_assigned_ports())

    times = [f.seconds for f in facts]
    bearing = {
        "src_ip": ipv4, "dst_ip": ipv4, "ttl": ipv4, "tos": ipv4,
        "window_size": tcp, "mss": [f for f in tcp if f.mss is not None],
    }
    for feature in DEFAULT_FEATURES:
        samples = [(f.seconds, getattr(f, feature)) for f in bearing[feature]]
        per_window, novelty, cumulative = brute_force_windows(samples, min(times), max(times), 10)
        result = report.diversity[feature]
        assert list(result.entropy_series.values) == pytest.approx(per_window, abs=1e-9)
        assert list(result.novelty_series.values) == novelty
        assert list(result.cumulative_entropy_series.values) == pytest.approx(cumulative, abs=1e-9)
        assert sum(novelty) == result.distinct_count == len({value for _, value in samples})


# --- Report ---

def test_clean_capture_warns(tmp_path):
    frame = tcp_frame(CLIENT, SERVER, 40000, 80, SYN)
    path = write_capture(tmp_path / "clean.pcap", [(BASE_US + i * 1000, frame) for i in range(1000)])
    report = build_report(path, compute_statistics(path), ("ttl",))
    assert report.checksum_result.correct_count == 1000
    assert any("unrealistic cleanness" in w for w in report.warnings)


def test_port_zero_warns(tmp_path):
    path = write_capture(tmp_path / "z.pcap", [(BASE_US, udp_frame(CLIENT, SERVER, 1234, 0))])
    report = build_report(path, compute_statistics(path), ("ttl",))
    assert report.port_result.port_zero_count == 1
    assert any("port 0" in w for w in report.warnings)


def test_frozen_diversity_warns(tmp_path):
    path = write_capture(tmp_path / "f.pcap", frozen_frames())
    report = build_report(path, compute_statistics(path), ("src_ip", "mss"), n_windows=10)
    assert "no new 'src_ip' values after window 2" in report.warnings
    assert any("no 'mss' values observed" in w for w in report.warnings)
    assert report.diversity["mss"].normalized_entropy is None


def test_empty_capture_report(tmp_path):
    path = write_capture(tmp_path / "e.pcap", [])
    report = build_report(path, compute_statistics(path), ("ttl",))
    assert report.payload_ratio is None
    assert report.warnings[0].startswith("EMPTY_CAPTURE")


def test_emit_report_files(background_path, db, tmp_path):
    report = build_report(background_path, db)
    out = tmp_path / "report"
    written = emit_report(report, str(out))
    assert len(written) == 2 + 3 * 6
    document = json.loads((out / REPORT_FILE).read_text())
    assert document["packet_count"] == 120
    assert document["payload_ratio"] == 0.5
    assert document["checksum"]["correct_count"] == 100
    lines = (out / "ttl_entropy.csv").read_text().splitlines()
    assert lines[0] == "window_start,value"
    assert len(lines) == 101
    assert report.content_hash in (out / SUMMARY_FILE).read_text()
    assert sorted(os.listdir(out)) == sorted(os.path.basename(p) for p in written)


def test_summary_without_warnings():
    report = TidedReport(payload_ratio=0.25, checksum_result=ChecksumResult(), port_result=PortResult(),
                         diversity={})
    text = summary_text(report)
    assert "warnings: none" in text
    assert "0.250000" in text
