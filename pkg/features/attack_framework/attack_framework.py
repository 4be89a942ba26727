# features/attack_framework/attack_framework.py

import hashlib
import ipaddress
import json
import logging
import math
import os
import re
from dataclasses import dataclass, field

import numpy as np

from features.errors import EmptyBackground, EmptyDistribution, InvalidValue, UnknownParameter
from features.pcap_io.pcap_io import MICROS_PER_SECOND
from features.stats_core.stats_core import most_active_host, random_host

logger = logging.getLogger(__name__)

# --- Configuration ---

RATE_FLOOR = 0.05
JITTER_LOW = 0.9
JITTER_HIGH = 1.1
DEFAULT_INTENSITY = 1000.0
DEFAULT_TTL = 64
DEFAULT_MSS = 1460
DEFAULT_WINDOW = 65535
DEFAULT_LATENCY = 0.001
LATENCY_BOUNDS = (0.0001, 0.05)
DYNAMIC_PORT_LOW = 49152
DYNAMIC_PORT_HIGH = 65535

# Parameter types
IP = "ip"
IP_LIST = "ip-list"
MAC = "mac"
PORT_LIST = "port-list"
INT = "int"
FLOAT = "float"
BOOL = "bool"
STR = "str"
PATH = "path"

# Default sources
USER_REQUIRED = "user-required"
STATS_DERIVED = "stats-derived"
CONSTANT = "constant"

_MAC_PATTERN = re.compile(r"^[0-9a-f]{2}([:-][0-9a-f]{2}){5}$")
_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


# --- Schemas ---

@dataclass(frozen=True)
class ParamSpec:
    """One attack parameter: its type, where its default comes from, and its bounds."""
    name: str
    type: str
    default_source: str = CONSTANT
    default: object = None
    help: str = ""
    low: float | None = None
    high: float | None = None
    positive: bool = False
    derive: object = field(default=None, compare=False, repr=False)  # (db, resolved, seed) -> value


def _default_victims(db, resolved, seed):
    _require_hosts(db)
    return (most_active_host(db),)


def _default_attackers(db, resolved, seed):
    _require_hosts(db)
    victims = resolved.get("victim.ip") or ()
    exclude = victims if len(db.hosts) > len(set(victims) & set(db.hosts)) else ()
    return (random_host(db, child_seed(seed, "attacker"), exclude=exclude),)


def _default_start_time(db, resolved, seed):
    fs = db.file_stats
    if fs.packet_count == 0:
        raise EmptyBackground("cannot place the attack: the background capture is empty")
    return fs.capture_start + fs.duration / 2


def _default_latency(db, resolved, seed):
    return default_latency(db)


def _require_hosts(db):
    if not db.hosts:
        raise EmptyBackground("the background capture has no IPv4 hosts to default from")


COMMON_PARAMS = (
    ParamSpec("victim.ip", IP_LIST, STATS_DERIVED, help="victim address(es); most active host",
              derive=_default_victims),
    ParamSpec("attacker.ip", IP_LIST, STATS_DERIVED, help="attacker address(es); random host other than the victim",
              derive=_default_attackers),
    ParamSpec("attacker.mac", MAC, STATS_DERIVED, help="observed MAC of the attacker, else derived from the seed"),
    ParamSpec("victim.mac", MAC, STATS_DERIVED, help="observed MAC of the victim, else derived from the seed"),
    ParamSpec("start_time", FLOAT, STATS_DERIVED, help="epoch seconds; middle of the capture",
              derive=_default_start_time),
    ParamSpec("intensity", FLOAT, CONSTANT, DEFAULT_INTENSITY, "peak injected packets/second", positive=True),
)

LATENCY_PARAM = ParamSpec(
    "latency", FLOAT, STATS_DERIVED,
    help="reply delay in seconds; mean connection inter-arrival of the background, bounded to [0.0001, 0.05]",
    positive=True, derive=_default_latency,
)


def schema_with(*extras):
    return COMMON_PARAMS + tuple(extras)


# --- Parameters ---

@dataclass(frozen=True)
class AttackParams:
    attack_name: str
    attacker_ips: tuple
    victim_ips: tuple
    macs: dict
    ports: tuple
    start_time: float
    intensity: float
    seed: int
    extra: dict = field(default_factory=dict)
    user_keys: frozenset = frozenset()

    @property
    def attacker_ip(self):
        return self.attacker_ips[0]

    @property
    def victim_ip(self):
        return self.victim_ips[0]

    def mac(self, ip):
        return self.macs[ip]

    def to_document(self):
        """Resolved parameters as plain JSON types, keyed like the command line."""
        document = {
            "attack": self.attack_name,
            "attacker.ip": list(self.attacker_ips),
            "victim.ip": list(self.victim_ips),
            "macs": dict(sorted(self.macs.items())),
            "ports": list(self.ports),
            "start_time": self.start_time,
            "intensity": self.intensity,
            "seed": self.seed,
        }
        for key, value in sorted(self.extra.items()):
            document[key] = list(value) if isinstance(value, tuple) else value
        return document


def params_digest(params):
    canonical = json.dumps(params.to_document(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def validate_and_default(user_params, db, schema, seed, attack_name):
    """Type-checks user values and fills every missing key from ``db`` or the schema."""
    specs = {spec.name: spec for spec in schema}
    unknown = sorted(set(user_params) - set(specs))
    if unknown:
        raise UnknownParameter(f"{attack_name} has no parameter '{unknown[0]}' (known: {', '.join(specs)})")

    resolved = {}
    for spec in schema:
        if spec.name in user_params:
            value = parse_value(spec, user_params[spec.name])
        elif spec.default_source == USER_REQUIRED:
            raise InvalidValue(f"{attack_name} requires '{spec.name}'")
        elif spec.derive is not None:
            value = spec.derive(db, resolved, seed)
        else:
            value = spec.default
        resolved[spec.name] = value

    fs = db.file_stats
    start_time = resolved.pop("start_time")
    if fs.packet_count and not fs.capture_start <= start_time <= fs.capture_end:
        raise InvalidValue(
            f"start_time {start_time} lies outside the capture [{fs.capture_start}, {fs.capture_end}]"
        )
    attackers = tuple(resolved.pop("attacker.ip"))
    victims = tuple(resolved.pop("victim.ip"))
    if not attackers or not victims:
        raise InvalidValue("attacker.ip and victim.ip need at least one address")
    attacker_mac = resolved.pop("attacker.mac")
    victim_mac = resolved.pop("victim.mac")
    macs = {ip: victim_mac or host_mac(db, ip, seed) for ip in victims}
    for ip in attackers:
        macs[ip] = attacker_mac or host_mac(db, ip, seed)

    params = AttackParams(
        attack_name=attack_name,
        attacker_ips=attackers,
        victim_ips=victims,
        macs=macs,
        ports=tuple(resolved.pop("ports", None) or ()),
        start_time=float(start_time),
        intensity=float(resolved.pop("intensity")),
        seed=seed,
        extra=resolved,
        user_keys=frozenset(user_params),
    )
    logger.debug("resolved parameters for %s: %s", attack_name, params.to_document())
    return params


def parse_value(spec, raw):
    """Converts a command-line string (or an already typed value) to ``spec.type``."""
    try:
        value = _PARSERS[spec.type](raw)
    except (ValueError, TypeError) as e:
        raise InvalidValue(f"{spec.name}={raw!r}: {e}") from None
    if spec.type in (INT, FLOAT):
        if spec.positive and not value > 0:
            raise InvalidValue(f"{spec.name} must be positive, got {value}")
        if spec.low is not None and value < spec.low:
            raise InvalidValue(f"{spec.name} must be at least {spec.low}, got {value}")
        if spec.high is not None and value > spec.high:
            raise InvalidValue(f"{spec.name} must be at most {spec.high}, got {value}")
    return value


def _parse_ip(raw):
    return str(ipaddress.IPv4Address(str(raw).strip()))


def _parse_ip_list(raw):
    items = raw.split(",") if isinstance(raw, str) else list(raw)
    ips = tuple(dict.fromkeys(_parse_ip(item) for item in items if str(item).strip()))
    if not ips:
        raise ValueError("empty address list")
    return ips


def _parse_mac(raw):
    mac = str(raw).strip().lower()
    if not _MAC_PATTERN.match(mac):
        raise ValueError("expected six hex octets such as 02:00:00:00:00:01")
    return mac.replace("-", ":")


def _parse_port_list(raw):
    items = raw.split(",") if isinstance(raw, str) else list(raw)
    ports = []
    for item in items:
        text = str(item).strip()
        if not text:
            continue
        if "-" in text:
            low, high = (int(part) for part in text.split("-", 1))
            if low > high:
                raise ValueError(f"range {text} is reversed")
            ports.extend(range(low, high + 1))
        else:
            ports.append(int(text))
    for port in ports:
        if not 0 <= port <= 65535:
            raise ValueError(f"port {port} outside [0, 65535]")
    if not ports:
        raise ValueError("empty port list")
    return tuple(dict.fromkeys(ports))


def _parse_int(raw):
    if isinstance(raw, bool):
        raise ValueError("expected an integer")
    return int(raw)


def _parse_float(raw):
    value = float(raw)
    if not math.isfinite(value):
        raise ValueError("expected a finite number")
    return value


def _parse_bool(raw):
    if isinstance(raw, bool):
        return raw
    text = str(raw).strip().lower()
    if text in _TRUE:
        return True
    if text in _FALSE:
        return False
    raise ValueError("expected true or false")


def _parse_path(raw):
    path = str(raw)
    if not os.path.isfile(path):
        raise ValueError("no such file")
    return path


_PARSERS = {
    IP: _parse_ip,
    IP_LIST: _parse_ip_list,
    MAC: _parse_mac,
    PORT_LIST: _parse_port_list,
    INT: _parse_int,
    FLOAT: _parse_float,
    BOOL: _parse_bool,
    STR: str,
    PATH: _parse_path,
}


# --- Seeds and Randomness ---

def _label_word(label):
    return int.from_bytes(hashlib.sha256(str(label).encode("utf-8")).digest()[:8], "big")


def child_seed(seed, *labels):
    """64-bit seed for one labelled purpose, independent of every other label."""
    return _label_word(":".join([str(seed), *map(str, labels)]))


def rng_for(seed, *labels):
    entropy = [seed & 0xFFFFFFFFFFFFFFFF] + [_label_word(label) for label in labels]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def attack_seed(seed, index):
    """Per-attack seed: adding an attack never changes the seeds of earlier ones."""
    return child_seed(seed, "attack", index)


def derived_mac(seed, ip):
    """Locally administered unicast MAC, stable for (seed, ip)."""
    octets = hashlib.sha256(f"{seed}:{ip}".encode("utf-8")).digest()[:5]
    return "02:" + octets.hex(":")


def host_mac(db, ip, seed):
    host = db.hosts.get(ip)
    if host is not None and host.mac:
        return host.mac
    return derived_mac(seed, ip)


# --- Field Sampling ---

def sample_field(dist, seed, n):
    """``n`` i.i.d. draws proportional to the distribution's counts."""
    counts = dist.counts if hasattr(dist, "counts") else dist
    support = [value for value, count in counts.items() if count > 0]
    if not support:
        name = getattr(dist, "field_name", "field")
        raise EmptyDistribution(f"the {name} distribution is empty")
    support.sort(key=lambda v: (isinstance(v, str), v))
    weights = np.array([counts[v] for v in support], dtype=np.float64)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    picks = rng.choice(len(support), size=n, p=weights / weights.sum())
    return [support[i] for i in picks.tolist()]


class HeaderSampler:
    """Header values for one host: TTL and MSS fixed per attack, window size per connection.

    Prefers the host's own sent-packet distributions, then the capture-wide ones,
    then stack defaults when the capture never carried the field.
    """

    def __init__(self, db, ip, rng):
        self.rng = rng
        host = db.hosts.get(ip)
        ttl = (host.ttl_dist if host else None) or db.distributions["ttl"].counts
        mss = (host.mss_dist if host else None) or db.distributions["mss"].counts
        self._windows = (host.window_dist if host else None) or db.distributions["window_size"].counts
        self.ttl = sample_field(ttl, rng, 1)[0] if ttl else DEFAULT_TTL
        self.mss = sample_field(mss, rng, 1)[0] if mss else DEFAULT_MSS

    def windows(self, n):
        if not self._windows:
            return [DEFAULT_WINDOW] * n
        return sample_field(self._windows, self.rng, n)

    def window(self):
        return self.windows(1)[0]


def default_latency(db):
    gaps = [c.mean_interarrival for c in db.connections.values() if c.packet_count > 1]
    if not gaps:
        return DEFAULT_LATENCY
    low, high = LATENCY_BOUNDS
    return float(min(high, max(low, np.mean(gaps))))


def dynamic_ports(rng, n, unique=False):
    """Source ports from the IANA dynamic range."""
    span = DYNAMIC_PORT_HIGH - DYNAMIC_PORT_LOW + 1
    if unique:
        if n > span:
            raise InvalidValue(f"{n} distinct source ports exceed the dynamic range")
        return (rng.choice(span, size=n, replace=False) + DYNAMIC_PORT_LOW).tolist()
    return rng.integers(DYNAMIC_PORT_LOW, DYNAMIC_PORT_HIGH + 1, size=n).tolist()


# --- Timestamp Planning ---

@dataclass(frozen=True)
class TimestampPlan:
    """Planned injection times in integer microseconds, non-decreasing."""
    micros: np.ndarray = field(compare=False)
    window_rates: tuple = ()

    @property
    def timestamps(self):
        return self.micros / MICROS_PER_SECOND

    def __len__(self):
        return len(self.micros)


def planned_rates(background_rates, rate):
    """Complement of the background rate, peak-normalised to ``rate`` and floored."""
    b = np.asarray(background_rates, dtype=np.float64)
    peak = b.max() if len(b) else 0.0
    if peak <= 0:
        return np.full(len(b), float(rate))
    return np.maximum(rate * (1.0 - b / peak), RATE_FLOOR * rate)


def _segment(t0, t1, rate, carry, rng):
    """Jittered, evenly spread timestamps at ``rate`` over [t0, t1)."""
    expected = carry + rate * (t1 - t0)
    n = int(math.floor(expected))
    if n <= 0:
        return np.empty(0), expected
    gaps = rng.uniform(JITTER_LOW, JITTER_HIGH, size=n) / rate
    gaps *= (n / rate) / gaps.sum()
    times = t0 + np.concatenate(([0.0], np.cumsum(gaps[:-1])))
    return np.minimum(times, np.nextafter(t1, t0)), expected - n


def complementary_rate_plan(bg_rate, rate, start_time, packet_budget, seed):
    """``packet_budget`` timestamps from ``start_time`` following the complementary rate."""
    if not rate > 0:
        raise InvalidValue(f"intensity must be positive, got {rate}")
    if packet_budget < 1:
        raise InvalidValue(f"packet budget must be at least 1, got {packet_budget}")
    rng = seed if isinstance(seed, np.random.Generator) else rng_for(seed, "timestamps")
    rates = planned_rates(bg_rate.values, rate)
    length = bg_rate.window_length
    chunks = []
    remaining = packet_budget
    carry = 0.0
    cursor = start_time
    if length > 0:
        for window_start, window_rate in zip(bg_rate.window_start_times, rates):
            window_end = window_start + length
            if window_end <= cursor:
                continue
            times, carry = _segment(max(cursor, window_start), window_end, window_rate, carry, rng)
            chunks.append(times[:remaining])
            remaining -= len(chunks[-1])
            cursor = window_end
            if remaining == 0:
                break
    if remaining > 0:
        # Past the capture: continue at the full rate
        gaps = rng.uniform(JITTER_LOW, JITTER_HIGH, size=remaining) / rate
        chunks.append(cursor + np.concatenate(([0.0], np.cumsum(gaps[:-1]))))
    seconds = np.concatenate(chunks) if chunks else np.empty(0)
    micros = np.round(seconds * MICROS_PER_SECOND).astype(np.int64)
    micros = np.maximum.accumulate(micros)
    micros.flags.writeable = False
    return TimestampPlan(micros, tuple(rates.tolist()))


def plan_for(db, params, packet_budget, label="timestamps"):
    """Rate plan against the background's packet-rate table."""
    return complementary_rate_plan(
        db.interval_tables["packet_rate"],
        params.intensity,
        params.start_time,
        packet_budget,
        rng_for(params.seed, label),
    )
