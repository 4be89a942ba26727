# features/attack_framework/templates.py

"""Template captures: load a recorded two-host exchange and replay it between
other hosts, keeping payloads and per-connection sequence offsets intact."""

import logging
from dataclasses import dataclass, replace

from features.attack_framework.attack_framework import HeaderSampler, rng_for
from features.errors import AmbiguousTemplate, LengthMismatch, NoTcp, TruncatedHeader
from features.pcap_io.packets import ACK, SYN, decode_frame, finalize_packet
from features.pcap_io.pcap_io import read_pcap
from features.stats_core.stats_core import connection_key

logger = logging.getLogger(__name__)

ATTACKER = "attacker"
VICTIM = "victim"
SEQ_MODULUS = 1 << 32


@dataclass(frozen=True)
class TemplatePcap:
    packets: tuple
    roles: tuple  # ATTACKER or VICTIM per packet (its sender)
    connection_map: dict  # connection key -> packet indices in capture order
    attacker_ip: str
    victim_ip: str


def load_template(path, attacker_ip=None):
    """Reads a two-endpoint capture; the first SYN sender is the attacker unless given."""
    _, records = read_pcap(path)
    packets = []
    for index, record in enumerate(records):
        try:
            pkt = decode_frame(record.data)
        except TruncatedHeader as e:
            raise AmbiguousTemplate(f"template record {index} cannot be decoded: {e}") from e
        if pkt.ip is None:
            raise AmbiguousTemplate(f"template record {index} is not IPv4")
        packets.append(pkt)

    endpoints = {ip for pkt in packets for ip in (pkt.ip.src_ip, pkt.ip.dst_ip)}
    if len(endpoints) != 2:
        raise AmbiguousTemplate(f"template must involve exactly two addresses, found {len(endpoints)}")
    tcp_packets = [pkt for pkt in packets if pkt.tcp is not None]
    if not tcp_packets:
        raise NoTcp(f"template '{path}' holds no TCP packets")

    if attacker_ip is None:
        initiators = [pkt for pkt in tcp_packets if pkt.tcp.flags & (SYN | ACK) == SYN]
        attacker_ip = (initiators or tcp_packets)[0].ip.src_ip
    elif attacker_ip not in endpoints:
        raise AmbiguousTemplate(f"{attacker_ip} is not an endpoint of the template")
    (victim_ip,) = endpoints - {attacker_ip}

    connection_map = {}
    for index, pkt in enumerate(packets):
        layer = pkt.tcp or pkt.udp
        if layer is None:
            continue
        key = connection_key((pkt.ip.src_ip, layer.src_port, pkt.ip.dst_ip, layer.dst_port, pkt.ip.protocol))
        connection_map.setdefault(key, []).append(index)

    logger.info("template %s: %d packets, %d connections, attacker %s",
                path, len(packets), len(connection_map), attacker_ip)
    return TemplatePcap(
        packets=tuple(packets),
        roles=tuple(ATTACKER if pkt.ip.src_ip == attacker_ip else VICTIM for pkt in packets),
        connection_map={key: tuple(indices) for key, indices in connection_map.items()},
        attacker_ip=attacker_ip,
        victim_ip=victim_ip,
    )


def _sequence_bases(tpl, indices):
    """Template initial sequence number per sending address of one TCP connection."""
    bases = {}
    for i in indices:
        tcp = tpl.packets[i].tcp
        bases.setdefault(tpl.packets[i].ip.src_ip, tcp.seq)
    for i in indices:
        pkt = tpl.packets[i]
        if pkt.tcp.has(ACK):
            receiver = pkt.ip.dst_ip
            bases.setdefault(receiver, pkt.tcp.ack)
    return bases


def rewrite_template(tpl, params, plan, db):
    """Template packets re-addressed to the attack's hosts, as (timestamp us, packet) pairs."""
    if len(plan) != len(tpl.packets):
        raise LengthMismatch(f"plan holds {len(plan)} timestamps for {len(tpl.packets)} template packets")
    rng = rng_for(params.seed, "template")
    attacker = HeaderSampler(db, params.attacker_ip, rng)
    victim = HeaderSampler(db, params.victim_ip, rng) if params.victim_ip in db.hosts else None

    addresses = {tpl.attacker_ip: params.attacker_ip, tpl.victim_ip: params.victim_ip}
    macs = {
        ATTACKER: (params.mac(params.attacker_ip), params.mac(params.victim_ip)),
        VICTIM: (params.mac(params.victim_ip), params.mac(params.attacker_ip)),
    }

    # Per connection: template ISN and fresh ISN per sender, and one window per side
    rebase = {}
    windows = {}
    for key, indices in tpl.connection_map.items():
        if tpl.packets[indices[0]].tcp is None:
            continue
        bases = _sequence_bases(tpl, indices)
        fresh = rng.integers(0, SEQ_MODULUS, size=len(bases)).tolist()
        rebase[key] = {ip: (base, isn) for (ip, base), isn in zip(sorted(bases.items()), fresh)}
        windows[key] = (attacker.window(), victim.window() if victim else None)

    index_to_key = {i: key for key, indices in tpl.connection_map.items() for i in indices}
    rewritten = []
    for index, (ts, pkt, role) in enumerate(zip(plan.micros.tolist(), tpl.packets, tpl.roles)):
        src_mac, dst_mac = macs[role]
        sampler = attacker if role == ATTACKER else victim
        ip = replace(pkt.ip, src_ip=addresses[pkt.ip.src_ip], dst_ip=addresses[pkt.ip.dst_ip])
        if sampler is not None:
            ip.ttl = sampler.ttl
        tcp = pkt.tcp
        key = index_to_key.get(index)
        if tcp is not None and key in rebase:
            shifts = rebase[key]
            tcp = replace(tcp)
            base, isn = shifts[pkt.ip.src_ip]
            tcp.seq = (tcp.seq - base + isn) % SEQ_MODULUS
            if tcp.has(ACK) and pkt.ip.dst_ip in shifts:
                base, isn = shifts[pkt.ip.dst_ip]
                tcp.ack = (tcp.ack - base + isn) % SEQ_MODULUS
            window = windows[key][0 if role == ATTACKER else 1]
            if window is not None:
                tcp.window_size = window
            if sampler is not None and tcp.mss is not None:
                tcp.mss = sampler.mss
        udp = replace(pkt.udp) if pkt.udp is not None else None
        draft = replace(pkt, eth_src=src_mac, eth_dst=dst_mac, ip=ip, tcp=tcp, udp=udp, trailer=b"")
        rewritten.append((ts, finalize_packet(draft)))
    return rewritten
