# features/attacks/attacks.py

import ipaddress
import logging
import os
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
import pandas as pd

from features.attack_framework.attack_framework import (
    BOOL,
    CONSTANT,
    FLOAT,
    INT,
    IP,
    IP_LIST,
    LATENCY_PARAM,
    PATH,
    PORT_LIST,
    STATS_DERIVED,
    STR,
    USER_REQUIRED,
    HeaderSampler,
    ParamSpec,
    dynamic_ports,
    host_mac,
    params_digest,
    plan_for,
    rng_for,
    schema_with,
    validate_and_default,
)
from features.attack_framework.templates import load_template, rewrite_template
from features.attacks import smb
from features.attacks.botnet import BotnetSpec, bind_bots, parse_bindings, parse_botnet_csv
from features.errors import InvalidValue, NoOpenPorts, PayloadTooLarge, UnknownAttack
from features.inject.inject import label_for
from features.pcap_io.packets import ACK, FIN, PSH, RST, SYN, decode_frame, serialize_packet, tcp_packet, udp_packet
from features.pcap_io.pcap_io import MICROS_PER_SECOND, PacketRecord
from features.stats_core.stats_core import DATABASE_DIR

logger = logging.getLogger(__name__)

# --- Configuration ---

PORT_FREQUENCY_TABLE = os.path.join(DATABASE_DIR, "port_frequency.csv")
DEFAULT_SCAN_PORTS = 1000
SYN_FLOOD_REPLY_CUTOFF = 0.7
SYN_FLOOD_DURATION = 10.0
FTP_PORT = 21
FTP_BANNER = b"220 FTP server ready.\r\n"
FTP_PAYLOAD_SIZE = 2048
MAX_TCP_PAYLOAD = 65535 - 20 - 20
MEMCACHED_PORT = 11211
MEMCACHED_REQUEST = b"stats\r\n"
SMBLORIS_CONNECTIONS = 10
SEQ_MODULUS = 1 << 32


# --- Generated Attacks ---

@dataclass(frozen=True)
class GeneratedAttack:
    """Serialized attack frames in timestamp order, their label and the resolved parameters."""
    records: tuple
    label: object
    params: object

    def __len__(self):
        return len(self.records)

    def packets(self):
        """(timestamp in microseconds, ParsedPacket) pairs, decoded lazily."""
        for record in self.records:
            yield record.ts_secs * MICROS_PER_SECOND + record.ts_frac, decode_frame(record.data)


def assemble(params, timed_packets):
    """Serializes (timestamp us, packet) pairs, stably ordered by time."""
    frames = [(ts, serialize_packet(pkt)) for ts, pkt in timed_packets]
    if not frames:
        raise InvalidValue(f"{params.attack_name} produced no packets with these parameters")
    frames.sort(key=lambda item: item[0])
    records = tuple(PacketRecord.at_micros(ts, data) for ts, data in frames)
    label = label_for(params.attack_name, records, params_digest(params))
    logger.info("generated %s: %d packets", params.attack_name, len(records))
    return GeneratedAttack(records, label, params)


@dataclass(frozen=True)
class AttackDefinition:
    name: str
    generator: object
    schema: tuple
    summary: str


ATTACKS = {}


def register(name, schema, summary):
    def decorator(generator):
        ATTACKS[name] = AttackDefinition(name, generator, schema, summary)
        return generator
    return decorator


def get_attack(name):
    try:
        return ATTACKS[name]
    except KeyError:
        raise UnknownAttack(f"unknown attack '{name}' (known: {', '.join(sorted(ATTACKS))})") from None


def generate(name, user_params, db, seed):
    """Resolves parameters against ``db`` and runs the named generator."""
    definition = get_attack(name)
    params = validate_and_default(user_params, db, definition.schema, seed, name)
    return definition.generator(params, db)


# --- Helpers ---

@lru_cache(maxsize=4)
def load_port_frequencies(table=PORT_FREQUENCY_TABLE):
    return pd.read_csv(table, comment="#", dtype={"port": "int64", "frequency": "float64"})


def top_ports(n=DEFAULT_SCAN_PORTS, table=PORT_FREQUENCY_TABLE):
    """Most frequent ``n`` ports; ties broken by ascending port."""
    frame = load_port_frequencies(table).sort_values(["frequency", "port"], ascending=[False, True], kind="stable")
    return tuple(frame["port"].head(n).tolist())


def _micros(seconds):
    return int(round(seconds * MICROS_PER_SECOND))


def _open_ports(db, ip):
    host = db.hosts.get(ip)
    return host.ports_open if host is not None else {}


def _endpoints(params, ip_a, ip_b):
    return params.mac(ip_a), params.mac(ip_b)


def _isns(rng, n):
    return rng.integers(0, SEQ_MODULUS, size=n, dtype=np.uint64).tolist()


def _inc(value, n=1):
    return (value + n) % SEQ_MODULUS


def _latency_us(params):
    return max(1, _micros(params.extra["latency"]))


# --- Port Scan ---

PORTSCAN_SCHEMA = schema_with(
    ParamSpec("ports", PORT_LIST, CONSTANT, help="ports to scan; the 1000 most frequent ports of the port table",
              derive=lambda db, resolved, seed: top_ports()),
    ParamSpec("ports.shuffle", BOOL, CONSTANT, True, "scan ports in a seeded random order"),
    LATENCY_PARAM,
)


@register("portscan", PORTSCAN_SCHEMA, "vertical TCP SYN scan of one victim")
def gen_portscan(params, db):
    rng = rng_for(params.seed, "portscan")
    ports = list(params.ports)
    if params.extra["ports.shuffle"]:
        ports = [ports[i] for i in rng.permutation(len(ports)).tolist()]
    open_ports = _open_ports(db, params.victim_ip)
    attacker = HeaderSampler(db, params.attacker_ip, rng)
    victim = HeaderSampler(db, params.victim_ip, rng)
    a_ip, v_ip = params.attacker_ip, params.victim_ip
    a_mac, v_mac = _endpoints(params, a_ip, v_ip)
    sport = dynamic_ports(rng, 1)[0]
    latency = _latency_us(params)
    plan = plan_for(db, params, len(ports))
    windows = attacker.windows(len(ports))
    isns = _isns(rng, len(ports))
    victim_isns = _isns(rng, len(ports))

    timed = []
    for ts, port, window, isn, v_isn in zip(plan.micros.tolist(), ports, windows, isns, victim_isns):
        timed.append((ts, tcp_packet(a_mac, v_mac, a_ip, v_ip, sport, port, SYN, seq=isn,
                                     window=window, ttl=attacker.ttl, mss=attacker.mss)))
        if port in open_ports:
            timed.append((ts + latency, tcp_packet(v_mac, a_mac, v_ip, a_ip, port, sport, SYN | ACK,
                                                   seq=v_isn, ack=_inc(isn), window=victim.window(),
                                                   ttl=victim.ttl, mss=victim.mss)))
            timed.append((ts + 2 * latency, tcp_packet(a_mac, v_mac, a_ip, v_ip, sport, port, RST,
                                                       seq=_inc(isn), window=0, ttl=attacker.ttl)))
        else:
            timed.append((ts + latency, tcp_packet(v_mac, a_mac, v_ip, a_ip, port, sport, RST | ACK,
                                                   ack=_inc(isn), window=0, ttl=victim.ttl)))
    return assemble(params, timed)


# --- SMB Scan ---

SMB_SCAN_SCHEMA = schema_with(LATENCY_PARAM)


@register("smb_scan", SMB_SCAN_SCHEMA, "TCP/445 check with SMB1 negotiation on every victim")
def gen_smb_scan(params, db):
    rng = rng_for(params.seed, "smb_scan")
    attacker = HeaderSampler(db, params.attacker_ip, rng)
    a_ip = params.attacker_ip
    victims = params.victim_ips
    plan = plan_for(db, params, len(victims))
    sports = dynamic_ports(rng, len(victims), unique=True)
    latency = _latency_us(params)

    timed = []
    for ts, v_ip, sport in zip(plan.micros.tolist(), victims, sports):
        a_mac, v_mac = _endpoints(params, a_ip, v_ip)
        victim = HeaderSampler(db, v_ip, rng)
        a_win, v_win = attacker.window(), victim.window()
        a_seq, v_seq = _isns(rng, 2)
        port = smb.SMB_PORT

        def a_pkt(t, flags, seq, ack=0, payload=b"", mss=None):
            timed.append((t, tcp_packet(a_mac, v_mac, a_ip, v_ip, sport, port, flags, seq=seq, ack=ack,
                                        window=a_win, ttl=attacker.ttl, mss=mss, payload=payload)))

        def v_pkt(t, flags, seq, ack=0, payload=b"", mss=None, window=None):
            timed.append((t, tcp_packet(v_mac, a_mac, v_ip, a_ip, port, sport, flags, seq=seq, ack=ack,
                                        window=v_win if window is None else window, ttl=victim.ttl,
                                        mss=mss, payload=payload)))

        a_pkt(ts, SYN, a_seq, mss=attacker.mss)
        if port not in _open_ports(db, v_ip):
            v_pkt(ts + latency, RST | ACK, 0, _inc(a_seq), window=0)
            continue

        request = smb.negotiate_request(mid=0)
        response = smb.negotiate_response(rng.bytes(8), ts + 4 * latency, mid=0)
        a_seq, v_seq = _inc(a_seq), v_seq
        v_pkt(ts + latency, SYN | ACK, v_seq, a_seq, mss=victim.mss)
        v_seq = _inc(v_seq)
        a_pkt(ts + 2 * latency, ACK, a_seq, v_seq)
        a_pkt(ts + 3 * latency, PSH | ACK, a_seq, v_seq, payload=request)
        a_seq = _inc(a_seq, len(request))
        v_pkt(ts + 4 * latency, PSH | ACK, v_seq, a_seq, payload=response)
        v_seq = _inc(v_seq, len(response))
        a_pkt(ts + 5 * latency, FIN | ACK, a_seq, v_seq)
        a_seq = _inc(a_seq)
        v_pkt(ts + 6 * latency, ACK, v_seq, a_seq)
        v_pkt(ts + 7 * latency, FIN | ACK, v_seq, a_seq)
        v_seq = _inc(v_seq)
        a_pkt(ts + 8 * latency, ACK, a_seq, v_seq)
    return assemble(params, timed)


# --- SYN Flood ---

def _default_flood_port(db, resolved, seed):
    ports_open = _open_ports(db, resolved["victim.ip"][0])
    if not ports_open:
        raise NoOpenPorts(f"victim {resolved['victim.ip'][0]} never answered a SYN; pass ports=")
    top = max(ports_open.values())
    return (min(port for port, count in ports_open.items() if count == top),)


SYN_FLOOD_SCHEMA = schema_with(
    ParamSpec("ports", PORT_LIST, STATS_DERIVED, help="target port(s); the victim's most used open port",
              derive=_default_flood_port),
    ParamSpec("packets", INT, CONSTANT, None, "SYN count; overrides intensity x duration", positive=True),
    ParamSpec("duration", FLOAT, CONSTANT, SYN_FLOOD_DURATION, "flood length in seconds", positive=True),
    ParamSpec("attackers.count", INT, CONSTANT, 1, "spoofed attacker addresses when attacker.ip is not given",
              low=1, high=1_000_000),
    ParamSpec("reply.fraction", FLOAT, CONSTANT, 1.0, "share of SYNs the victim answers", low=0.0, high=1.0),
    ParamSpec("reply.cutoff", FLOAT, CONSTANT, SYN_FLOOD_REPLY_CUTOFF,
              "share of the flood after which the victim stops answering", low=0.0, high=1.0),
    LATENCY_PARAM,
)


def spoofed_addresses(db, rng, count):
    """Distinct public addresses absent from the capture."""
    taken = set(db.hosts)
    addresses = []
    while len(addresses) < count:
        for value in rng.integers(0x01000000, 0xDF000000, size=count).tolist():
            ip = ipaddress.IPv4Address(value)
            if ip.is_global and str(ip) not in taken:
                taken.add(str(ip))
                addresses.append(str(ip))
                if len(addresses) == count:
                    break
    return tuple(addresses)


@register("syn_flood", SYN_FLOOD_SCHEMA, "SYN flood from one or many (spoofed) attackers")
def gen_syn_flood(params, db):
    rng = rng_for(params.seed, "syn_flood")
    extra = params.extra
    count = extra["attackers.count"]
    if count > 1 and "attacker.ip" not in params.user_keys:
        attackers = spoofed_addresses(db, rng, count)
        base_mac = params.mac(params.attacker_ip)
        macs = {ip: mac for ip, mac in params.macs.items() if ip in params.victim_ips}
        macs.update({ip: base_mac for ip in attackers})
        params = replace(params, attacker_ips=attackers, macs=macs)
    budget = extra["packets"] or max(1, int(round(params.intensity * extra["duration"])))
    v_ip = params.victim_ip
    v_mac = params.mac(v_ip)
    attacker = HeaderSampler(db, params.attacker_ip, rng)
    victim = HeaderSampler(db, v_ip, rng)
    latency = _latency_us(params)
    plan = plan_for(db, params, budget)

    which = rng.integers(0, len(params.attacker_ips), size=budget).tolist()
    dports = [params.ports[i] for i in rng.integers(0, len(params.ports), size=budget).tolist()]
    sports = dynamic_ports(rng, budget)
    windows = rng.integers(1, 65536, size=budget).tolist()
    seqs = _isns(rng, budget)
    cutoff = int(budget * extra["reply.cutoff"])
    answered = (rng.random(budget) < extra["reply.fraction"]).tolist()
    reply_isns = _isns(rng, budget)
    reply_windows = victim.windows(budget)

    timed = []
    for i, ts in enumerate(plan.micros.tolist()):
        a_ip = params.attacker_ips[which[i]]
        a_mac = params.mac(a_ip)
        timed.append((ts, tcp_packet(a_mac, v_mac, a_ip, v_ip, sports[i], dports[i], SYN, seq=seqs[i],
                                     window=windows[i], ttl=attacker.ttl, mss=attacker.mss)))
        if i < cutoff and answered[i]:
            timed.append((ts + latency, tcp_packet(v_mac, a_mac, v_ip, a_ip, dports[i], sports[i], SYN | ACK,
                                                   seq=reply_isns[i], ack=_inc(seqs[i]), window=reply_windows[i],
                                                   ttl=victim.ttl, mss=victim.mss)))
    return assemble(params, timed)


# --- Memcrashed ---

def _default_servers(db, resolved, seed):
    victims = set(resolved["victim.ip"])
    attackers = set(resolved["attacker.ip"])
    candidates = [ip for ip in db.hosts if ip not in victims | attackers] or [
        ip for ip in db.hosts if ip not in victims
    ]
    if not candidates:
        raise InvalidValue("no host left to act as a memcached server; pass servers=")
    rng = rng_for(seed, "servers")
    return (candidates[int(rng.integers(len(candidates)))],)


MEMCRASHED_SCHEMA = schema_with(
    ParamSpec("servers", IP_LIST, STATS_DERIVED, help="memcached servers; a random host",
              derive=_default_servers),
    ParamSpec("packets", INT, CONSTANT, None, "request count; overrides intensity x duration", positive=True),
    ParamSpec("duration", FLOAT, CONSTANT, 1.0, "attack length in seconds", positive=True),
)


def memcached_request(request_id):
    """UDP frame header (request id, sequence 0, 1 datagram, reserved) + stats command."""
    return request_id.to_bytes(2, "big") + b"\x00\x00\x00\x01\x00\x00" + MEMCACHED_REQUEST


@register("memcrashed", MEMCRASHED_SCHEMA, "spoofed memcached stats requests (amplification trigger)")
def gen_memcrashed(params, db):
    rng = rng_for(params.seed, "memcrashed")
    servers = params.extra["servers"]
    budget = params.extra["packets"] or max(1, int(round(params.intensity * params.extra["duration"])))
    attacker = HeaderSampler(db, params.attacker_ip, rng)
    a_mac = params.mac(params.attacker_ip)
    server_macs = {ip: host_mac(db, ip, params.seed) for ip in servers}
    plan = plan_for(db, params, budget)
    sports = dynamic_ports(rng, budget)
    request_ids = rng.integers(0, 1 << 16, size=budget).tolist()

    timed = []
    for i, ts in enumerate(plan.micros.tolist()):
        server = servers[i % len(servers)]
        timed.append((ts, udp_packet(a_mac, server_macs[server], params.victim_ip, server, sports[i], MEMCACHED_PORT,
                                     payload=memcached_request(request_ids[i]), ttl=attacker.ttl)))
    return assemble(params, timed)


# --- SMBLoris ---

SMBLORIS_SCHEMA = schema_with(
    ParamSpec("connections", INT, CONSTANT, SMBLORIS_CONNECTIONS, "connections opened to port 445",
              low=1, high=16384),
    LATENCY_PARAM,
)


@register("smbloris", SMBLORIS_SCHEMA, "NetBIOS session headers with the maximum length on port 445")
def gen_smbloris(params, db):
    rng = rng_for(params.seed, "smbloris")
    connections = params.extra["connections"]
    attacker = HeaderSampler(db, params.attacker_ip, rng)
    victim = HeaderSampler(db, params.victim_ip, rng)
    a_ip, v_ip = params.attacker_ip, params.victim_ip
    a_mac, v_mac = _endpoints(params, a_ip, v_ip)
    latency = _latency_us(params)
    plan = plan_for(db, params, connections)
    sports = dynamic_ports(rng, connections, unique=True)
    a_windows = attacker.windows(connections)
    port = smb.SMB_PORT

    timed = []
    for ts, sport, a_win in zip(plan.micros.tolist(), sports, a_windows):
        a_seq, v_seq = _isns(rng, 2)
        v_win = victim.window()
        timed.append((ts, tcp_packet(a_mac, v_mac, a_ip, v_ip, sport, port, SYN, seq=a_seq,
                                     window=a_win, ttl=attacker.ttl, mss=attacker.mss)))
        timed.append((ts + latency, tcp_packet(v_mac, a_mac, v_ip, a_ip, port, sport, SYN | ACK, seq=v_seq,
                                               ack=_inc(a_seq), window=v_win, ttl=victim.ttl, mss=victim.mss)))
        timed.append((ts + 2 * latency, tcp_packet(a_mac, v_mac, a_ip, v_ip, sport, port, ACK, seq=_inc(a_seq),
                                                   ack=_inc(v_seq), window=a_win, ttl=attacker.ttl)))
        timed.append((ts + 3 * latency, tcp_packet(a_mac, v_mac, a_ip, v_ip, sport, port, PSH | ACK,
                                                   seq=_inc(a_seq), ack=_inc(v_seq), window=a_win,
                                                   ttl=attacker.ttl, payload=smb.SMBLORIS_MESSAGE)))
    return assemble(params, timed)


# --- FTP WinaXe ---

FTP_WINAXE_SCHEMA = schema_with(
    ParamSpec("payload", STR, CONSTANT, None, "overflow bytes (UTF-8 text); seeded random when absent"),
    ParamSpec("payload.size", INT, CONSTANT, FTP_PAYLOAD_SIZE, "random overflow length in bytes", low=1),
    LATENCY_PARAM,
)


@register("ftp_winaxe", FTP_WINAXE_SCHEMA, "malicious FTP server answering with an overlong reply")
def gen_ftp_winaxe(params, db):
    rng = rng_for(params.seed, "ftp_winaxe")
    text = params.extra["payload"]
    payload = text.encode("utf-8") if text is not None else rng.bytes(params.extra["payload.size"])
    if len(payload) > MAX_TCP_PAYLOAD:
        raise PayloadTooLarge(f"payload of {len(payload)} bytes exceeds one segment ({MAX_TCP_PAYLOAD} bytes)")
    # The attacker is the FTP server, the victim its client
    server = HeaderSampler(db, params.attacker_ip, rng)
    client = HeaderSampler(db, params.victim_ip, rng)
    s_ip, c_ip = params.attacker_ip, params.victim_ip
    s_mac, c_mac = _endpoints(params, s_ip, c_ip)
    latency = _latency_us(params)
    ts = plan_for(db, params, 1).micros.tolist()[0]
    sport = dynamic_ports(rng, 1)[0]
    c_seq, s_seq = _isns(rng, 2)
    c_win, s_win = client.window(), server.window()

    timed = [
        (ts, tcp_packet(c_mac, s_mac, c_ip, s_ip, sport, FTP_PORT, SYN, seq=c_seq, window=c_win,
                        ttl=client.ttl, mss=client.mss)),
        (ts + latency, tcp_packet(s_mac, c_mac, s_ip, c_ip, FTP_PORT, sport, SYN | ACK, seq=s_seq,
                                  ack=_inc(c_seq), window=s_win, ttl=server.ttl, mss=server.mss)),
        (ts + 2 * latency, tcp_packet(c_mac, s_mac, c_ip, s_ip, sport, FTP_PORT, ACK, seq=_inc(c_seq),
                                      ack=_inc(s_seq), window=c_win, ttl=client.ttl)),
        (ts + 3 * latency, tcp_packet(s_mac, c_mac, s_ip, c_ip, FTP_PORT, sport, PSH | ACK, seq=_inc(s_seq),
                                      ack=_inc(c_seq), window=s_win, ttl=server.ttl, payload=FTP_BANNER)),
        (ts + 4 * latency, tcp_packet(s_mac, c_mac, s_ip, c_ip, FTP_PORT, sport, PSH | ACK,
                                      seq=_inc(s_seq, 1 + len(FTP_BANNER)), ack=_inc(c_seq), window=s_win,
                                      ttl=server.ttl, payload=payload)),
    ]
    return assemble(params, timed)


# --- Template Exploits ---

TEMPLATE_SCHEMA = schema_with(
    ParamSpec("template_path", PATH, USER_REQUIRED, help="two-host PCAP recorded from the exploit"),
    ParamSpec("template.attacker", IP, CONSTANT, None, "template address acting as attacker; first SYN sender"),
)

# name -> expected template shape
TEMPLATE_RECIPES = {
    "eternalblue": "SMBv1 exploitation on TCP/445: negotiate, session setup, trans2 and the groom connections",
    "ms17_scan": "MS17-010 check on TCP/445: negotiate, session setup, tree connect IPC$, PeekNamedPipe",
    "joomla_privesc": "HTTP on TCP/80: registration POST carrying the privileged account fields",
    "sql_injection": "HTTP on TCP/80: GET or POST requests carrying the injected SQL",
    "sality": "HTTP on TCP/80: bot check-in and download of the encrypted payload",
}


def gen_template_exploit(params, db):
    template = load_template(params.extra["template_path"], attacker_ip=params.extra["template.attacker"])
    plan = plan_for(db, params, len(template.packets))
    return assemble(params, rewrite_template(template, params, plan, db))


register("template_exploit", TEMPLATE_SCHEMA, "any two-host exploit replayed from a template capture")(
    gen_template_exploit
)
for _name, _shape in TEMPLATE_RECIPES.items():
    register(_name, TEMPLATE_SCHEMA, f"template replay; expects {_shape}")(gen_template_exploit)


# --- P2P Botnet ---

BOTNET_SCHEMA = schema_with(
    ParamSpec("csv_path", PATH, USER_REQUIRED, help="interactions: time_offset,src_bot,dst_bot,message_type,payload_size"),
    ParamSpec("reuse_hosts", BOOL, CONSTANT, False, "bind bots to capture hosts instead of fresh addresses"),
    ParamSpec("bots", STR, CONSTANT, None, "explicit bindings id:ip,id:ip"),
    ParamSpec("tcp.types", STR, CONSTANT, None, "message types carried over TCP (comma separated)"),
    LATENCY_PARAM,
)


def _message_payload(message_type, size, rng):
    tag = message_type.encode("utf-8")
    if size <= len(tag):
        return tag[:size]
    return tag + rng.bytes(size - len(tag))


@register("p2p_botnet", BOTNET_SCHEMA, "peer-to-peer bot messages scripted by a CSV file")
def gen_p2p_botnet(params, db):
    rng = rng_for(params.seed, "p2p_botnet")
    extra = params.extra
    rows = parse_botnet_csv(extra["csv_path"])
    bindings = bind_bots(rows, db, extra["reuse_hosts"], parse_bindings(extra["bots"]), rng)
    spec = BotnetSpec(rows, bindings)
    tcp_types = {t.strip() for t in (extra["tcp.types"] or "").split(",") if t.strip()}
    latency = _latency_us(params)

    bots = spec.bots
    ips = {bot: spec.bindings[bot] for bot in bots}
    macs = {bot: host_mac(db, ip, params.seed) for bot, ip in ips.items()}
    samplers = {bot: HeaderSampler(db, ips[bot], rng) for bot in bots}
    listen = dict(zip(bots, dynamic_ports(rng, len(bots), unique=True)))
    streams = {}  # (src, dst) -> [seq src, seq dst, src port]

    timed = []
    for row in spec.rows:
        ts = _micros(params.start_time + row.time_offset)
        src, dst = row.src_bot, row.dst_bot
        s, d = samplers[src], samplers[dst]
        payload = _message_payload(row.message_type, row.payload_size, rng)
        s_ip, d_ip, s_mac, d_mac = ips[src], ips[dst], macs[src], macs[dst]
        if row.message_type not in tcp_types:
            timed.append((ts, udp_packet(s_mac, d_mac, s_ip, d_ip, listen[src], listen[dst],
                                         payload=payload, ttl=s.ttl)))
            continue
        stream = streams.get((src, dst))
        if stream is None:
            s_seq, d_seq = _isns(rng, 2)
            sport = dynamic_ports(rng, 1)[0]
            timed.append((ts, tcp_packet(s_mac, d_mac, s_ip, d_ip, sport, listen[dst], SYN, seq=s_seq,
                                         window=s.window(), ttl=s.ttl, mss=s.mss)))
            timed.append((ts + latency, tcp_packet(d_mac, s_mac, d_ip, s_ip, listen[dst], sport, SYN | ACK,
                                                   seq=d_seq, ack=_inc(s_seq), window=d.window(), ttl=d.ttl,
                                                   mss=d.mss)))
            stream = streams[(src, dst)] = [_inc(s_seq), _inc(d_seq), sport]
            timed.append((ts + 2 * latency, tcp_packet(s_mac, d_mac, s_ip, d_ip, sport, listen[dst], ACK,
                                                       seq=stream[0], ack=stream[1], window=s.window(),
                                                       ttl=s.ttl)))
            ts += 3 * latency
        s_seq, d_seq, sport = stream
        timed.append((ts, tcp_packet(s_mac, d_mac, s_ip, d_ip, sport, listen[dst], PSH | ACK, seq=s_seq,
                                     ack=d_seq, window=s.window(), ttl=s.ttl, payload=payload)))
        stream[0] = _inc(s_seq, len(payload))
        timed.append((ts + latency, tcp_packet(d_mac, s_mac, d_ip, s_ip, listen[dst], sport, ACK, seq=d_seq,
                                               ack=stream[0], window=d.window(), ttl=d.ttl)))

    resolved = dict(extra)
    resolved["bots"] = ",".join(f"{bot}:{ips[bot]}" for bot in sorted(bots))
    macs_by_ip = dict(params.macs)
    macs_by_ip.update({ips[bot]: macs[bot] for bot in bots})
    params = replace(params, extra=resolved, macs=macs_by_ip)
    return assemble(params, timed)


def list_attacks():
    """Registered attacks in alphabetical order."""
    return [ATTACKS[name] for name in sorted(ATTACKS)]
