# features/tided/tided.py

"""Dataset-quality tests: payload availability, checksum and port validity, and
per-feature diversity (entropy, novelty and cumulative entropy over time windows).
"""

import logging
import os
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import pandas as pd

from features.errors import EmptyCapture, EmptyInput, TruncatedHeader, UnknownField
from features.pcap_io.packets import decode_frame, verify_tcp_checksum
from features.pcap_io.pcap_io import read_pcap, record_seconds
from features.stats_core.stats_core import (
    DATABASE_DIR,
    DEFAULT_WINDOWS,
    TimeWindowSeries,
    partition,
    window_indices,
    window_starts,
)

logger = logging.getLogger(__name__)

# --- Configuration ---

DEFAULT_FEATURES = ("src_ip", "dst_ip", "ttl", "mss", "window_size", "tos")
SAMPLE_FEATURES = DEFAULT_FEATURES + ("protocol", "src_port", "dst_port")
CLEANNESS_THRESHOLD = 1000
IANA_TABLE = os.path.join(DATABASE_DIR, "iana_ports.csv")

WELL_KNOWN_PORTS = range(1, 1024)
REGISTERED_PORTS = range(1024, 49152)
DYNAMIC_PORTS = range(49152, 65536)


# --- Domain Types ---

@dataclass(frozen=True)
class ChecksumResult:
    correct_count: int = 0
    incorrect_count: int = 0
    incorrect_ratio: float = 0.0
    unverifiable_count: int = 0

    @property
    def tcp_count(self):
        return self.correct_count + self.incorrect_count


@dataclass(frozen=True)
class PortResult:
    well_known_count: int = 0
    registered_count: int = 0
    dynamic_count: int = 0
    unassigned_count: int = 0
    port_zero_count: int = 0


@dataclass(frozen=True)
class DiversityResult:
    feature_name: str
    entropy_series: TimeWindowSeries
    normalized_entropy: float | None
    novelty_series: TimeWindowSeries
    novelty_normalized_entropy: float | None
    cumulative_entropy_series: TimeWindowSeries
    distinct_count: int = 0


@dataclass
class TidedReport:
    payload_ratio: float | None
    checksum_result: ChecksumResult
    port_result: PortResult
    diversity: dict
    warnings: list = field(default_factory=list)
    content_hash: str = ""
    packet_count: int = 0


@dataclass(frozen=True)
class CaptureSamples:
    """Per-feature (timestamp, value) columns collected in one pass over a capture."""
    start: float
    end: float
    columns: dict  # feature -> (times array, values list)

    def column(self, feature):
        try:
            return self.columns[feature]
        except KeyError:
            raise UnknownField(f"feature '{feature}' was not collected") from None


# --- Entropy ---

def entropy(counts):
    """Shannon entropy in bits of a value->count map."""
    masses = np.fromiter((c for c in counts.values() if c > 0), dtype=np.float64)
    total = masses.sum()
    if total == 0:
        return 0.0
    p = masses / total
    return max(0.0, float(-(p * np.log2(p)).sum()))


def normalized_entropy(counts):
    """Entropy divided by log2 of the number of distinct values, clamped to [0, 1]."""
    n = sum(1 for c in counts.values() if c > 0)
    if n == 0:
        raise EmptyInput("normalized entropy needs at least one non-zero count")
    if n == 1:
        return 0.0
    return min(1.0, max(0.0, entropy(counts) / np.log2(n)))


def _row_entropy(matrix):
    totals = matrix.sum(axis=1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        p = np.where(totals > 0, matrix / np.where(totals > 0, totals, 1), 0.0)
        terms = np.where(p > 0, p * np.log2(p), 0.0)
    return np.maximum(0.0, -terms.sum(axis=1))


# --- Samples ---

def feature_value(pkt, feature):
    """Value of ``feature`` carried by a parsed packet, or None."""
    ip = pkt.ip
    if ip is None:
        return None
    if feature in ("src_ip", "dst_ip", "ttl", "tos", "protocol"):
        return getattr(ip, feature)
    if feature in ("window_size", "mss"):
        return getattr(pkt.tcp, feature) if pkt.tcp is not None else None
    if feature in ("src_port", "dst_port"):
        return getattr(pkt, feature)
    raise UnknownField(f"unknown diversity feature '{feature}'")


class _SampleCollector:
    def __init__(self, features):
        for feature in features:
            if feature not in SAMPLE_FEATURES:
                raise UnknownField(f"unknown diversity feature '{feature}'")
        self.features = tuple(features)
        self.times = {f: [] for f in self.features}
        self.values = {f: [] for f in self.features}
        self.start = None
        self.end = None

    def add(self, ts, pkt):
        self.start = ts if self.start is None else min(self.start, ts)
        self.end = ts if self.end is None else max(self.end, ts)
        if pkt is None:
            return
        for feature in self.features:
            value = feature_value(pkt, feature)
            if value is not None:
                self.times[feature].append(ts)
                self.values[feature].append(value)

    def finish(self):
        columns = {
            f: (np.asarray(self.times[f], dtype=np.float64), self.values[f]) for f in self.features
        }
        return CaptureSamples(self.start or 0.0, self.end or 0.0, columns)


def samples_from_packets(packets, features=SAMPLE_FEATURES):
    """CaptureSamples from an iterable of (timestamp seconds, ParsedPacket) pairs."""
    collector = _SampleCollector(features)
    for ts, pkt in packets:
        collector.add(ts, pkt)
    return collector.finish()


def scan_capture(path, features=DEFAULT_FEATURES):
    """One pass over ``path``: diversity samples plus the TCP checksum tally."""
    collector = _SampleCollector(features)
    correct = incorrect = unverifiable = 0
    meta, records = read_pcap(path)
    for record in records:
        ts = record_seconds(record, meta)
        try:
            pkt = decode_frame(record.data)
        except TruncatedHeader:
            collector.add(ts, None)
            continue
        collector.add(ts, pkt)
        if pkt.tcp is None:
            continue
        if pkt.truncated:
            unverifiable += 1
        elif verify_tcp_checksum(pkt):
            correct += 1
        else:
            incorrect += 1
    if unverifiable:
        logger.warning("%d truncated TCP frames skipped by the checksum test", unverifiable)
    verified = correct + incorrect
    result = ChecksumResult(correct, incorrect, incorrect / verified if verified else 0.0, unverifiable)
    return collector.finish(), result


def _as_samples(packets, feature):
    if isinstance(packets, CaptureSamples):
        return packets
    return samples_from_packets(packets, (feature,))


# --- Diversity Series ---

def _window_counts(samples, feature, n_windows, window_length):
    """(window length, window count, windows x distinct-values count matrix, window index per sample)."""
    times, values = samples.column(feature)
    length, n = partition(samples.start, samples.end, n_windows=n_windows, window_length=window_length)
    codes, uniques = pd.factorize(pd.Series(values, dtype=object))
    k = len(uniques)
    idx = window_indices(times, samples.start, length, n)
    matrix = np.bincount(idx * k + codes, minlength=n * k).reshape(n, k) if k else np.zeros((n, 0), np.int64)
    return length, n, matrix, idx, codes


def _series(samples, feature, length, n, values):
    return TimeWindowSeries(feature, length, window_starts(samples.start, length, n), tuple(float(v) for v in values))


def entropy_series(packets, feature, n_windows=DEFAULT_WINDOWS, window_length=None):
    samples = _as_samples(packets, feature)
    length, n, matrix, _, _ = _window_counts(samples, feature, n_windows, window_length)
    return _series(samples, feature, length, n, _row_entropy(matrix))


def novelty_distribution(packets, feature, n_windows=DEFAULT_WINDOWS, window_length=None):
    """Per window, how many distinct values appear there for the first time."""
    samples = _as_samples(packets, feature)
    length, n, matrix, idx, codes = _window_counts(samples, feature, n_windows, window_length)
    first_seen = np.full(matrix.shape[1], n, dtype=np.int64)
    np.minimum.at(first_seen, codes, idx)
    return _series(samples, feature, length, n, np.bincount(first_seen, minlength=n)[:n])


def novelty_normalized_entropy(series):
    counts = {w: v for w, v in enumerate(series.values) if v > 0}
    if not counts:
        raise EmptyInput(f"no novel '{series.feature_name}' values in any window")
    return normalized_entropy(counts)


def cumulative_entropy_series(packets, feature, n_windows=DEFAULT_WINDOWS, window_length=None):
    """Entropy over every value seen up to and including each window."""
    samples = _as_samples(packets, feature)
    length, n, matrix, _, _ = _window_counts(samples, feature, n_windows, window_length)
    return _series(samples, feature, length, n, _row_entropy(np.cumsum(matrix, axis=0)))


def diversity(samples, feature, n_windows=DEFAULT_WINDOWS, window_length=None):
    _, values = samples.column(feature)
    counts = pd.Series(values, dtype=object).value_counts().to_dict()
    novelty = novelty_distribution(samples, feature, n_windows, window_length)
    return DiversityResult(
        feature_name=feature,
        entropy_series=entropy_series(samples, feature, n_windows, window_length),
        normalized_entropy=normalized_entropy(counts) if counts else None,
        novelty_series=novelty,
        novelty_normalized_entropy=novelty_normalized_entropy(novelty) if counts else None,
        cumulative_entropy_series=cumulative_entropy_series(samples, feature, n_windows, window_length),
        distinct_count=len(counts),
    )


def novelty_freeze_window(result):
    """Last window with a novel value when none appear in the second half, else None."""
    values = result.novelty_series.values
    if result.distinct_count < 2 or len(values) < 2:
        return None
    novel = [w for w, v in enumerate(values) if v > 0]
    last = novel[-1]
    return last if last < len(values) // 2 else None


# --- Availability and Validity ---

def payload_availability(db):
    packet_count = db.file_stats.packet_count
    if packet_count == 0:
        raise EmptyCapture("the capture holds no packets")
    return db.file_stats.payload_packet_count / packet_count


def checksum_validity(path):
    return scan_capture(path, ())[1]


@lru_cache(maxsize=4)
def assigned_ports(table=IANA_TABLE):
    """Port numbers with an assignment in the bundled snapshot."""
    frame = pd.read_csv(table, comment="#")
    return frozenset(int(p) for p in frame["port"])


def port_validity(db, table=IANA_TABLE):
    counts = db.distributions["dst_port"].counts
    assigned = assigned_ports(table)
    well_known = registered = dynamic = unassigned = zero = 0
    for port, count in counts.items():
        if port == 0:
            zero += count
            continue
        if port in WELL_KNOWN_PORTS:
            well_known += count
        elif port in REGISTERED_PORTS:
            registered += count
        else:
            dynamic += count
        if port < DYNAMIC_PORTS.start and port not in assigned:
            unassigned += count
    return PortResult(well_known, registered, dynamic, unassigned, zero)


# --- Report ---

def build_report(path, db, features=DEFAULT_FEATURES, n_windows=DEFAULT_WINDOWS, window_length=None):
    """Runs every test over ``path`` (whose statistics are ``db``)."""
    warnings = []
    try:
        payload_ratio = payload_availability(db)
    except EmptyCapture as e:
        payload_ratio = None
        warnings.append(f"{e.code}: {e}")

    samples, checksum_result = scan_capture(path, features)
    if checksum_result.incorrect_count == 0 and checksum_result.tcp_count >= CLEANNESS_THRESHOLD:
        warnings.append(
            f"none of {checksum_result.tcp_count} TCP checksums is wrong; "
            "real traffic almost always carries some (unrealistic cleanness)"
        )
    if checksum_result.unverifiable_count:
        warnings.append(f"{checksum_result.unverifiable_count} truncated TCP frames could not be verified")

    port_result = port_validity(db)
    if port_result.port_zero_count:
        warnings.append(
            f"{port_result.port_zero_count} packets target port 0; real networks seldom observe this"
        )

    results = {}
    for feature in features:
        result = diversity(samples, feature, n_windows, window_length)
        results[feature] = result
        if result.distinct_count == 0:
            warnings.append(f"no '{feature}' values observed; diversity metrics unavailable")
            continue
        frozen_after = novelty_freeze_window(result)
        if frozen_after is not None:
            warnings.append(f"no new '{feature}' values after window {frozen_after}")

    logger.info("TIDED report for %s: %d warnings", path, len(warnings))
    return TidedReport(
        payload_ratio=payload_ratio,
        checksum_result=checksum_result,
        port_result=port_result,
        diversity=results,
        warnings=warnings,
        content_hash=db.content_hash,
        packet_count=db.file_stats.packet_count,
    )
