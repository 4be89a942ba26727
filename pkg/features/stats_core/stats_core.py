# features/stats_core/stats_core.py

import hashlib
import ipaddress
import json
import logging
import math
import os
import tempfile
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from features.errors import (
    EmptyInput,
    InvalidValue,
    PcapIoError,
    TruncatedHeader,
    UnknownField,
    UnknownHost,
)
from features.pcap_io.packets import ACK, SYN, decode_frame
from features.pcap_io.pcap_io import read_pcap, record_seconds

logger = logging.getLogger(__name__)

# --- Configuration ---

DEFAULT_WINDOWS = 100
CACHE_FORMAT_VERSION = 1
CACHE_DIR_ENV = "PCAP_INJECTOR_CACHE_DIR"
DATABASE_DIR = "database"
DEFAULT_CACHE_DIR = os.path.join(DATABASE_DIR, "cache")
HASH_CHUNK = 1 << 20

DISTRIBUTION_FIELDS = ("ttl", "mss", "window_size", "tos", "protocol", "src_port", "dst_port", "src_ip", "dst_ip")
IP_FIELDS = ("src_ip", "dst_ip")


# --- Domain Types ---

@dataclass(frozen=True)
class FileStats:
    packet_count: int = 0
    capture_start: float = 0.0
    capture_end: float = 0.0
    duration: float = 0.0
    avg_packet_size: float = 0.0
    total_bytes: int = 0
    avg_packet_rate: float = 0.0
    payload_packet_count: int = 0
    ipv4_packet_count: int = 0
    non_ipv4_count: int = 0
    out_of_order_count: int = 0


@dataclass(frozen=True)
class HostStats:
    ip: str
    pkts_sent: int = 0
    pkts_received: int = 0
    bytes_sent: int = 0
    bytes_received: int = 0
    ports_open: dict = field(default_factory=dict)  # port -> SYN+ACK count
    ttl_dist: dict = field(default_factory=dict)
    window_dist: dict = field(default_factory=dict)
    mss_dist: dict = field(default_factory=dict)
    mac: str | None = None


@dataclass(frozen=True)
class FieldDistribution:
    field_name: str
    counts: dict

    @property
    def total(self):
        return sum(self.counts.values())


@dataclass(frozen=True)
class ConnStats:
    five_tuple: tuple
    packet_count: int
    avg_packet_rate: float
    mean_interarrival: float
    interarrival_stddev: float


@dataclass(frozen=True)
class TimeWindowSeries:
    feature_name: str
    window_length: float
    window_start_times: tuple
    values: tuple


@dataclass(frozen=True)
class StatsDb:
    """Statistics of one capture. Read-only once built."""
    content_hash: str
    window_length: float | None
    file_stats: FileStats
    hosts: dict
    distributions: dict
    connections: dict
    interval_tables: dict
    packet_times: np.ndarray = field(compare=False, repr=False, default=None)


# --- Hashing ---

def content_hash(path):
    """SHA-224 hex digest of the exact file bytes."""
    digest = hashlib.sha224()
    try:
        with open(path, "rb") as f:
            for chunk in iter(lambda: f.read(HASH_CHUNK), b""):
                digest.update(chunk)
    except OSError as e:
        raise PcapIoError(f"cannot read '{path}': {e}") from e
    return digest.hexdigest()


# --- Windows ---

def partition(start, end, n_windows=None, window_length=None):
    """Returns (window_length, n_windows) covering [start, end]."""
    duration = max(0.0, end - start)
    if window_length is not None:
        if window_length <= 0:
            raise InvalidValue(f"window length must be positive, got {window_length}")
        return float(window_length), max(1, math.ceil(duration / window_length))
    n = DEFAULT_WINDOWS if n_windows is None else n_windows
    if n < 1:
        raise InvalidValue(f"window count must be at least 1, got {n}")
    return duration / n, n


def window_indices(times, start, window_length, n_windows):
    """Window index of every timestamp; the capture end falls into the last window."""
    times = np.asarray(times, dtype=np.float64)
    if window_length <= 0:
        return np.zeros(len(times), dtype=np.int64)
    idx = np.floor((times - start) / window_length).astype(np.int64)
    return np.clip(idx, 0, n_windows - 1)


def window_starts(start, window_length, n_windows):
    return tuple(start + i * window_length for i in range(n_windows))


def rate_series(times, start, end, n_windows=None, window_length=None, feature_name="packet_rate"):
    length, n = partition(start, end, n_windows, window_length)
    counts = np.bincount(window_indices(times, start, length, n), minlength=n).astype(np.float64)
    values = counts / length if length > 0 else np.zeros(n)
    return TimeWindowSeries(feature_name, length, window_starts(start, length, n), tuple(values.tolist()))


# --- Computation ---

class _Accumulator:
    """Single-pass counters over the records of one capture."""

    def __init__(self):
        self.times = []
        self.packet_count = 0
        self.total_bytes = 0
        self.payload_packets = 0
        self.ipv4_packets = 0
        self.non_ipv4 = 0
        self.out_of_order = 0
        self.last_ts = None
        self.hosts = {}
        self.dists = {name: Counter() for name in DISTRIBUTION_FIELDS}
        self.conns = {}

    def _host(self, ip):
        host = self.hosts.get(ip)
        if host is None:
            host = self.hosts[ip] = {
                "sent": 0, "received": 0, "bytes_sent": 0, "bytes_received": 0,
                "ports_open": Counter(), "ttl": Counter(), "window": Counter(), "mss": Counter(), "mac": None,
            }
        return host

    def add(self, ts, record):
        self.packet_count += 1
        self.total_bytes += record.original_len
        self.times.append(ts)
        if self.last_ts is not None and ts < self.last_ts:
            self.out_of_order += 1
        self.last_ts = ts

        try:
            pkt = decode_frame(record.data)
        except TruncatedHeader:
            logger.debug("record %d is too short to decode; counted as non-IPv4", self.packet_count - 1)
            self.non_ipv4 += 1
            return
        ip = pkt.ip
        if ip is None:
            self.non_ipv4 += 1
            return

        self.ipv4_packets += 1
        if pkt.payload:
            self.payload_packets += 1
        dists = self.dists
        dists["ttl"][ip.ttl] += 1
        dists["tos"][ip.tos] += 1
        dists["protocol"][ip.protocol] += 1
        dists["src_ip"][ip.src_ip] += 1
        dists["dst_ip"][ip.dst_ip] += 1

        sender = self._host(ip.src_ip)
        sender["sent"] += 1
        sender["bytes_sent"] += record.original_len
        sender["ttl"][ip.ttl] += 1
        sender["mac"] = pkt.eth_src
        receiver = self._host(ip.dst_ip)
        receiver["received"] += 1
        receiver["bytes_received"] += record.original_len

        layer = pkt.tcp or pkt.udp
        if pkt.tcp is not None:
            tcp = pkt.tcp
            dists["window_size"][tcp.window_size] += 1
            sender["window"][tcp.window_size] += 1
            if tcp.mss is not None:
                dists["mss"][tcp.mss] += 1
                sender["mss"][tcp.mss] += 1
            if tcp.flags & (SYN | ACK) == SYN | ACK:
                sender["ports_open"][tcp.src_port] += 1
        if layer is not None:
            dists["src_port"][layer.src_port] += 1
            dists["dst_port"][layer.dst_port] += 1
            self._add_connection(ts, ip, layer)

    def _add_connection(self, ts, ip, layer):
        key = connection_key((ip.src_ip, layer.src_port, ip.dst_ip, layer.dst_port, ip.protocol))
        conn = self.conns.get(key)
        if conn is None:
            # count, first, last, mean gap, M2 of gaps
            self.conns[key] = [1, ts, ts, 0.0, 0.0]
            return
        gap = max(0.0, ts - conn[2])
        conn[0] += 1
        conn[2] = ts
        n_gaps = conn[0] - 1
        delta = gap - conn[3]
        conn[3] += delta / n_gaps
        conn[4] += delta * (gap - conn[3])

    def finish(self, digest, window_length):
        times = np.asarray(self.times, dtype=np.float64)
        times.flags.writeable = False
        start = float(times.min()) if len(times) else 0.0
        end = float(times.max()) if len(times) else 0.0
        duration = end - start
        file_stats = FileStats(
            packet_count=self.packet_count,
            capture_start=start,
            capture_end=end,
            duration=duration,
            avg_packet_size=self.total_bytes / self.packet_count if self.packet_count else 0.0,
            total_bytes=self.total_bytes,
            avg_packet_rate=self.packet_count / duration if duration > 0 else 0.0,
            payload_packet_count=self.payload_packets,
            ipv4_packet_count=self.ipv4_packets,
            non_ipv4_count=self.non_ipv4,
            out_of_order_count=self.out_of_order,
        )
        if self.out_of_order:
            logger.warning("%d records are earlier than their predecessor", self.out_of_order)

        hosts = {
            ip: HostStats(
                ip=ip,
                pkts_sent=h["sent"],
                pkts_received=h["received"],
                bytes_sent=h["bytes_sent"],
                bytes_received=h["bytes_received"],
                ports_open=_sorted_map(h["ports_open"]),
                ttl_dist=_sorted_map(h["ttl"]),
                window_dist=_sorted_map(h["window"]),
                mss_dist=_sorted_map(h["mss"]),
                mac=h["mac"],
            )
            for ip, h in sorted(self.hosts.items(), key=lambda item: ip_sort_key(item[0]))
        }
        distributions = {
            name: FieldDistribution(name, _sorted_map(counter)) for name, counter in self.dists.items()
        }
        connections = {}
        for key in sorted(self.conns, key=_connection_sort_key):
            count, first, last, mean, m2 = self.conns[key]
            span = last - first
            connections[key] = ConnStats(
                five_tuple=key,
                packet_count=count,
                avg_packet_rate=count / span if span > 0 else 0.0,
                mean_interarrival=mean,
                interarrival_stddev=math.sqrt(m2 / (count - 1)) if count > 1 else 0.0,
            )
        interval_tables = {"packet_rate": rate_series(times, start, end, window_length=window_length)}
        return StatsDb(digest, window_length, file_stats, hosts, distributions, connections, interval_tables, times)


def compute_statistics(path, window_length=None, cache_dir=None, digest=None):
    """One streaming pass over the capture; persisted under ``cache_dir`` when given."""
    digest = digest or content_hash(path)
    meta, records = read_pcap(path)
    acc = _Accumulator()
    for record in records:
        acc.add(record_seconds(record, meta), record)
    db = acc.finish(digest, window_length)
    logger.info("computed statistics for %s: %d packets", path, db.file_stats.packet_count)
    if cache_dir is not None:
        _save_cache(db, cache_path(cache_dir, digest, window_length))
    return db


def load_or_compute(path, window_length=None, cache_dir=None, use_cache=True):
    """Cached statistics for ``path``; recomputes on a miss or a corrupt entry."""
    if not use_cache:
        return compute_statistics(path, window_length)
    cache_dir = resolve_cache_dir(cache_dir)
    digest = content_hash(path)
    entry = cache_path(cache_dir, digest, window_length)
    if os.path.exists(entry):
        try:
            db = _load_cache(entry)
            if db.content_hash == digest and db.window_length == window_length:
                logger.debug("statistics cache hit: %s", entry)
                return db
            logger.warning("cache entry %s does not match %s; recomputing", entry, path)
        except Exception as e:
            logger.warning("cache entry %s is unreadable (%s); recomputing", entry, e)
    return compute_statistics(path, window_length, cache_dir=cache_dir, digest=digest)


# --- Cache ---

def resolve_cache_dir(cache_dir=None):
    return cache_dir or os.environ.get(CACHE_DIR_ENV) or DEFAULT_CACHE_DIR


def cache_path(cache_dir, digest, window_length):
    window_ms = 0 if window_length is None else int(round(window_length * 1000))
    return os.path.join(cache_dir, f"{digest}-{window_ms}.stats")


def _save_cache(db, entry):
    document = json.dumps(_to_document(db), sort_keys=True)
    try:
        os.makedirs(os.path.dirname(entry) or ".", exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=os.path.dirname(entry) or ".", suffix=".tmp")
        with os.fdopen(fd, "wb") as f:
            np.savez_compressed(f, packet_times=db.packet_times, document=np.array(document))
        os.replace(tmp, entry)
    except OSError as e:
        logger.warning("could not write statistics cache %s: %s", entry, e)


def _load_cache(entry):
    with open(entry, "rb") as f, np.load(f, allow_pickle=False) as archive:
        document = json.loads(str(archive["document"]))
        times = np.array(archive["packet_times"], dtype=np.float64)
    if document.get("format_version") != CACHE_FORMAT_VERSION:
        raise ValueError(f"unsupported cache format {document.get('format_version')}")
    times.flags.writeable = False
    return _from_document(document, times)


def _to_document(db):
    return {
        "format_version": CACHE_FORMAT_VERSION,
        "content_hash": db.content_hash,
        "window_length": db.window_length,
        "file_stats": vars(db.file_stats),
        "hosts": [
            {
                "ip": h.ip,
                "pkts_sent": h.pkts_sent,
                "pkts_received": h.pkts_received,
                "bytes_sent": h.bytes_sent,
                "bytes_received": h.bytes_received,
                "ports_open": list(h.ports_open.items()),
                "ttl_dist": list(h.ttl_dist.items()),
                "window_dist": list(h.window_dist.items()),
                "mss_dist": list(h.mss_dist.items()),
                "mac": h.mac,
            }
            for h in db.hosts.values()
        ],
        "distributions": {name: list(d.counts.items()) for name, d in db.distributions.items()},
        "connections": [
            [list(c.five_tuple), c.packet_count, c.avg_packet_rate, c.mean_interarrival, c.interarrival_stddev]
            for c in db.connections.values()
        ],
        "interval_tables": {
            name: [s.window_length, list(s.window_start_times), list(s.values)]
            for name, s in db.interval_tables.items()
        },
    }


def _from_document(doc, times):
    hosts = {}
    for h in doc["hosts"]:
        hosts[h["ip"]] = HostStats(
            ip=h["ip"],
            pkts_sent=h["pkts_sent"],
            pkts_received=h["pkts_received"],
            bytes_sent=h["bytes_sent"],
            bytes_received=h["bytes_received"],
            ports_open=dict(map(tuple, h["ports_open"])),
            ttl_dist=dict(map(tuple, h["ttl_dist"])),
            window_dist=dict(map(tuple, h["window_dist"])),
            mss_dist=dict(map(tuple, h["mss_dist"])),
            mac=h["mac"],
        )
    connections = {}
    for five_tuple, count, rate, mean, stddev in doc["connections"]:
        key = tuple(five_tuple)
        connections[key] = ConnStats(key, count, rate, mean, stddev)
    return StatsDb(
        content_hash=doc["content_hash"],
        window_length=doc["window_length"],
        file_stats=FileStats(**doc["file_stats"]),
        hosts=hosts,
        distributions={
            name: FieldDistribution(name, dict(map(tuple, pairs))) for name, pairs in doc["distributions"].items()
        },
        connections=connections,
        interval_tables={
            name: TimeWindowSeries(name, length, tuple(starts), tuple(values))
            for name, (length, starts, values) in doc["interval_tables"].items()
        },
        packet_times=times,
    )


# --- Queries ---

def ip_sort_key(ip):
    return int(ipaddress.IPv4Address(ip))


def _value_key(value):
    return ip_sort_key(value) if isinstance(value, str) else value


def _sorted_map(counter):
    return dict(sorted(counter.items(), key=lambda item: _value_key(item[0])))


def connection_key(five_tuple):
    """Direction-free identity of a conversation: lower endpoint first."""
    src_ip, src_port, dst_ip, dst_port, protocol = five_tuple
    a = (ip_sort_key(src_ip), src_port, src_ip)
    b = (ip_sort_key(dst_ip), dst_port, dst_ip)
    if b < a:
        a, b = b, a
    return (a[2], a[1], b[2], b[1], protocol)


def _connection_sort_key(key):
    return (ip_sort_key(key[0]), key[1], ip_sort_key(key[2]), key[3], key[4])


def distribution(db, field_name):
    try:
        return db.distributions[field_name]
    except KeyError:
        raise UnknownField(f"no distribution for field '{field_name}'") from None


def most_used(db, field_name):
    """Most frequent value; the smaller value wins ties."""
    counts = distribution(db, field_name).counts
    if not counts:
        raise EmptyInput(f"no '{field_name}' values in the capture")
    top = max(counts.values())
    return min((value for value, count in counts.items() if count == top), key=_value_key)


def host(db, ip):
    try:
        return db.hosts[ip]
    except KeyError:
        raise UnknownHost(f"host {ip} does not appear in the capture") from None


def open_ports(db, ip):
    return sorted(host(db, ip).ports_open)


def hosts(db):
    return list(db.hosts)


def most_active_host(db):
    if not db.hosts:
        raise UnknownHost("the capture holds no IPv4 hosts")
    return min(db.hosts.values(), key=lambda h: (-(h.pkts_sent + h.pkts_received), ip_sort_key(h.ip))).ip


def random_host(db, seed, exclude=()):
    """Uniform over hosts (ascending address order), deterministic given ``seed``."""
    candidates = [ip for ip in db.hosts if ip not in exclude]
    if not candidates:
        raise UnknownHost("no host left to choose from")
    rng = np.random.default_rng(seed)
    return candidates[int(rng.integers(len(candidates)))]


def packet_rate_series(db, n_windows=DEFAULT_WINDOWS):
    fs = db.file_stats
    return rate_series(db.packet_times, fs.capture_start, fs.capture_end, n_windows=n_windows)


def avg_mss(db):
    counts = db.distributions["mss"].counts
    total = sum(counts.values())
    if not total:
        return None
    return sum(value * count for value, count in counts.items()) / total


def avg_bandwidth(db, ip):
    """Bytes sent per second over the whole capture."""
    duration = db.file_stats.duration
    return host(db, ip).bytes_sent / duration if duration > 0 else 0.0


def connection(db, five_tuple):
    try:
        five_tuple = tuple(five_tuple)
        if len(five_tuple) != 5:
            raise UnknownHost(f"connection needs (src_ip, src_port, dst_ip, dst_port, protocol), got {five_tuple}")
        return db.connections[connection_key(five_tuple)]
    except (KeyError, TypeError, ValueError):
        raise UnknownHost(f"no connection {five_tuple} in the capture") from None


QUERIES = {
    "most_used": most_used,
    "distribution": distribution,
    "open_ports": open_ports,
    "most_active_host": most_active_host,
    "random_host": random_host,
    "packet_rate_series": packet_rate_series,
    "avg_mss": avg_mss,
    "avg_bandwidth": avg_bandwidth,
    "connection": connection,
    "hosts": hosts,
}


def query(db, request, *args, **kwargs):
    """Dispatches a named request, e.g. ``query(db, "open_ports", "10.0.0.5")``."""
    try:
        handler = QUERIES[request]
    except KeyError:
        raise UnknownField(f"unknown query '{request}'") from None
    return handler(db, *args, **kwargs)
