# features/pcap_io/packets.py

"""Ethernet / IPv4 / TCP / UDP / ICMP frame codec.

Decoding keeps every byte of the frame (IP and TCP options, Ethernet padding),
so re-encoding an untouched ParsedPacket reproduces the captured bytes exactly.
"""

import socket
import struct
from dataclasses import dataclass, replace
from functools import lru_cache

from features.errors import FieldOverflow, TruncatedHeader, UnsupportedLinkType
from features.pcap_io.pcap_io import LINKTYPE_ETHERNET

# --- Wire Layouts ---

ETH_HEADER = struct.Struct("!6s6sH")
IPV4_HEADER = struct.Struct("!BBHHHBBH4s4s")
TCP_HEADER = struct.Struct("!HHIIHHHH")
UDP_HEADER = struct.Struct("!HHHH")
ICMP_HEADER = struct.Struct("!BBH4s")
PSEUDO_HEADER = struct.Struct("!4s4sBBH")

ETH_HEADER_LEN = 14
IPV4_MIN_HEADER_LEN = 20
TCP_MIN_HEADER_LEN = 20
TCP_MAX_OPTIONS_LEN = 40
UDP_HEADER_LEN = 8
ICMP_HEADER_LEN = 8

ETHERTYPE_IPV4 = 0x0800
PROTO_ICMP = 1
PROTO_TCP = 6
PROTO_UDP = 17

# TCP flag bits
FIN = 0x01
SYN = 0x02
RST = 0x04
PSH = 0x08
ACK = 0x10
URG = 0x20

TCP_OPTION_EOL = 0
TCP_OPTION_NOP = 1
TCP_OPTION_MSS = 2

IP_DONT_FRAGMENT = 0x4000


@dataclass(slots=True)
class IPv4Header:
    src_ip: str
    dst_ip: str
    protocol: int
    ttl: int = 64
    tos: int = 0
    total_len: int = 0
    identification: int = 0
    flags_fragment: int = IP_DONT_FRAGMENT
    header_checksum: int = 0
    version: int = 4
    options: bytes = b""

    @property
    def fragment_offset(self):
        return self.flags_fragment & 0x1FFF


@dataclass(slots=True)
class TcpHeader:
    """TCP header. ``flags`` holds the low 12 bits of the offset/flags word.

    ``mss`` mirrors the MSS option: setting it rewrites (or prepends) that option
    when the packet is encoded.
    """
    src_port: int
    dst_port: int
    seq: int = 0
    ack: int = 0
    flags: int = 0
    window_size: int = 65535
    checksum: int = 0
    urgent: int = 0
    options: bytes = b""
    mss: int | None = None

    def has(self, flag):
        return bool(self.flags & flag)


@dataclass(slots=True)
class UdpHeader:
    src_port: int
    dst_port: int
    length: int = 0
    checksum: int = 0


@dataclass(slots=True)
class IcmpHeader:
    type: int
    code: int = 0
    checksum: int = 0
    rest: bytes = b"\x00\x00\x00\x00"


@dataclass(slots=True)
class ParsedPacket:
    eth_src: str
    eth_dst: str
    eth_type: int = ETHERTYPE_IPV4
    ip: IPv4Header | None = None
    tcp: TcpHeader | None = None
    udp: UdpHeader | None = None
    icmp: IcmpHeader | None = None
    payload: bytes = b""
    trailer: bytes = b""
    truncated: bool = False

    @property
    def src_port(self):
        layer = self.tcp or self.udp
        return layer.src_port if layer else None

    @property
    def dst_port(self):
        layer = self.tcp or self.udp
        return layer.dst_port if layer else None


# --- Checksums ---

def internet_checksum(data):
    """Ones'-complement sum of 16-bit words, complemented (odd byte padded with zero)."""
    if len(data) % 2:
        data = bytes(data) + b"\x00"
    total = sum(struct.unpack(f"!{len(data) // 2}H", data))
    while total >> 16:
        total = (total & 0xFFFF) + (total >> 16)
    return ~total & 0xFFFF


def verify_tcp_checksum(pkt):
    """True iff the stored TCP checksum matches pseudo-header + segment."""
    tcp = pkt.tcp
    segment = _pack_tcp(replace(tcp, checksum=0)) + pkt.payload
    computed = internet_checksum(_pseudo_header(pkt.ip, PROTO_TCP, len(segment)) + segment)
    return computed == tcp.checksum


def _pseudo_header(ip, protocol, length):
    return PSEUDO_HEADER.pack(_pack_ip(ip.src_ip), _pack_ip(ip.dst_ip), 0, protocol, length)


# --- Decoding ---

def parse_packet(record, meta=None):
    if meta is not None and meta.link_type != LINKTYPE_ETHERNET:
        raise UnsupportedLinkType(f"link type {meta.link_type} is not Ethernet (1)")
    return decode_frame(record.data)


def decode_frame(data):
    size = len(data)
    if size < ETH_HEADER_LEN:
        raise TruncatedHeader(f"frame of {size} bytes is shorter than an Ethernet header")
    dst, src, eth_type = ETH_HEADER.unpack_from(data)
    pkt = ParsedPacket(eth_src=src.hex(":"), eth_dst=dst.hex(":"), eth_type=eth_type)

    if eth_type != ETHERTYPE_IPV4:
        pkt.payload = data[ETH_HEADER_LEN:]
        return pkt
    if size < ETH_HEADER_LEN + IPV4_MIN_HEADER_LEN:
        raise TruncatedHeader(f"IPv4 frame of {size} bytes is shorter than Ethernet + IPv4 headers")

    vihl, tos, total_len, ident, flags_fragment, ttl, proto, csum, src_ip, dst_ip = IPV4_HEADER.unpack_from(
        data, ETH_HEADER_LEN
    )
    ihl = (vihl & 0x0F) * 4
    if vihl >> 4 != 4 or ihl < IPV4_MIN_HEADER_LEN:
        # Not decodable as IPv4; kept opaque
        pkt.payload = data[ETH_HEADER_LEN:]
        return pkt
    l4_start = ETH_HEADER_LEN + ihl
    if l4_start > size:
        raise TruncatedHeader(f"IPv4 header of {ihl} bytes exceeds the {size}-byte frame")

    declared_end = ETH_HEADER_LEN + total_len
    if total_len >= ihl:
        ip_end = min(size, declared_end)
        pkt.truncated = declared_end > size
    else:
        ip_end = size

    pkt.ip = IPv4Header(
        src_ip=socket.inet_ntoa(src_ip),
        dst_ip=socket.inet_ntoa(dst_ip),
        protocol=proto,
        ttl=ttl,
        tos=tos,
        total_len=total_len,
        identification=ident,
        flags_fragment=flags_fragment,
        header_checksum=csum,
        options=data[ETH_HEADER_LEN + IPV4_MIN_HEADER_LEN:l4_start],
    )
    pkt.trailer = data[ip_end:]
    segment = data[l4_start:ip_end]
    pkt.payload = segment

    if flags_fragment & 0x1FFF:
        return pkt
    if proto == PROTO_TCP:
        _decode_tcp(pkt, segment)
    elif proto == PROTO_UDP and len(segment) >= UDP_HEADER_LEN:
        pkt.udp = UdpHeader(*UDP_HEADER.unpack_from(segment))
        pkt.payload = segment[UDP_HEADER_LEN:]
    elif proto == PROTO_ICMP and len(segment) >= ICMP_HEADER_LEN:
        pkt.icmp = IcmpHeader(*ICMP_HEADER.unpack_from(segment))
        pkt.payload = segment[ICMP_HEADER_LEN:]
    return pkt


def _decode_tcp(pkt, segment):
    if len(segment) < TCP_MIN_HEADER_LEN:
        return
    sport, dport, seq, ack, offset_flags, window, csum, urgent = TCP_HEADER.unpack_from(segment)
    offset = (offset_flags >> 12) * 4
    if offset < TCP_MIN_HEADER_LEN or offset > len(segment):
        return
    options = segment[TCP_MIN_HEADER_LEN:offset]
    pkt.tcp = TcpHeader(
        src_port=sport,
        dst_port=dport,
        seq=seq,
        ack=ack,
        flags=offset_flags & 0x0FFF,
        window_size=window,
        checksum=csum,
        urgent=urgent,
        options=options,
        mss=_find_mss(options),
    )
    pkt.payload = segment[offset:]


def _find_mss(options):
    i = 0
    while i < len(options):
        kind = options[i]
        if kind == TCP_OPTION_EOL:
            return None
        if kind == TCP_OPTION_NOP:
            i += 1
            continue
        if i + 1 >= len(options) or options[i + 1] < 2:
            return None
        length = options[i + 1]
        if kind == TCP_OPTION_MSS and length == 4 and i + 4 <= len(options):
            return int.from_bytes(options[i + 2:i + 4], "big")
        i += length
    return None


# --- Encoding ---

def serialize_packet(pkt, recompute_checksums=False):
    if recompute_checksums:
        pkt = finalize_packet(pkt)
    frame = _pack_mac(pkt.eth_dst) + _pack_mac(pkt.eth_src) + _pack_u16("eth_type", pkt.eth_type)
    if pkt.ip is None:
        return frame + pkt.payload + pkt.trailer
    return frame + _pack_ipv4(pkt.ip) + _pack_l4(pkt) + pkt.payload + pkt.trailer


def finalize_packet(pkt):
    """Copy of ``pkt`` with IPv4/UDP lengths and every checksum recomputed."""
    ip = pkt.ip
    if ip is None:
        return replace(pkt, truncated=False)

    tcp, udp, icmp = pkt.tcp, pkt.udp, pkt.icmp
    l4_fields = {}
    if ip.fragment_offset == 0 and tcp is not None:
        tcp = replace(tcp, options=_with_mss(tcp.options, tcp.mss), checksum=0)
        segment = _pack_tcp(tcp) + pkt.payload
        tcp.checksum = internet_checksum(_pseudo_header(ip, PROTO_TCP, len(segment)) + segment)
        l4_fields["tcp"] = tcp
    elif ip.fragment_offset == 0 and udp is not None:
        length = UDP_HEADER_LEN + len(pkt.payload)
        udp = replace(udp, length=length, checksum=0)
        checksum = internet_checksum(_pseudo_header(ip, PROTO_UDP, length) + _pack_udp(udp) + pkt.payload)
        udp.checksum = checksum or 0xFFFF
        l4_fields["udp"] = udp
    elif ip.fragment_offset == 0 and icmp is not None:
        icmp = replace(icmp, checksum=0)
        icmp.checksum = internet_checksum(_pack_icmp(icmp) + pkt.payload)
        l4_fields["icmp"] = icmp

    draft = replace(pkt, **l4_fields)
    l4_len = len(_pack_l4(draft)) + len(pkt.payload)
    ip = replace(ip, total_len=IPV4_MIN_HEADER_LEN + len(ip.options) + l4_len, header_checksum=0)
    ip.header_checksum = internet_checksum(_pack_ipv4(ip))
    return replace(draft, ip=ip, truncated=False)


def _pack_ipv4(ip):
    if len(ip.options) % 4 or len(ip.options) > 40:
        raise FieldOverflow(f"IPv4 options of {len(ip.options)} bytes cannot be encoded")
    _check("version", ip.version, 0xF)
    ihl = (IPV4_MIN_HEADER_LEN + len(ip.options)) // 4
    return IPV4_HEADER.pack(
        (ip.version << 4) | ihl,
        _check("tos", ip.tos, 0xFF),
        _check("total_len", ip.total_len, 0xFFFF),
        _check("identification", ip.identification, 0xFFFF),
        _check("flags_fragment", ip.flags_fragment, 0xFFFF),
        _check("ttl", ip.ttl, 0xFF),
        _check("protocol", ip.protocol, 0xFF),
        _check("header_checksum", ip.header_checksum, 0xFFFF),
        _pack_ip(ip.src_ip),
        _pack_ip(ip.dst_ip),
    ) + ip.options


def _pack_l4(pkt):
    if pkt.tcp is not None:
        return _pack_tcp(pkt.tcp)
    if pkt.udp is not None:
        return _pack_udp(pkt.udp)
    if pkt.icmp is not None:
        return _pack_icmp(pkt.icmp)
    return b""


def _pack_tcp(tcp):
    options = _with_mss(tcp.options, tcp.mss)
    if len(options) % 4 or len(options) > TCP_MAX_OPTIONS_LEN:
        raise FieldOverflow(f"TCP options of {len(options)} bytes cannot be encoded")
    offset = (TCP_MIN_HEADER_LEN + len(options)) // 4
    return TCP_HEADER.pack(
        _check("src_port", tcp.src_port, 0xFFFF),
        _check("dst_port", tcp.dst_port, 0xFFFF),
        _check("seq", tcp.seq, 0xFFFFFFFF),
        _check("ack", tcp.ack, 0xFFFFFFFF),
        (offset << 12) | _check("flags", tcp.flags, 0x0FFF),
        _check("window_size", tcp.window_size, 0xFFFF),
        _check("checksum", tcp.checksum, 0xFFFF),
        _check("urgent", tcp.urgent, 0xFFFF),
    ) + options


def _pack_udp(udp):
    return UDP_HEADER.pack(
        _check("src_port", udp.src_port, 0xFFFF),
        _check("dst_port", udp.dst_port, 0xFFFF),
        _check("length", udp.length, 0xFFFF),
        _check("checksum", udp.checksum, 0xFFFF),
    )


def _pack_icmp(icmp):
    if len(icmp.rest) != 4:
        raise FieldOverflow("ICMP rest-of-header must be 4 bytes")
    return ICMP_HEADER.pack(
        _check("type", icmp.type, 0xFF),
        _check("code", icmp.code, 0xFF),
        _check("checksum", icmp.checksum, 0xFFFF),
        icmp.rest,
    )


def _with_mss(options, mss):
    if mss is None:
        return options
    value = _check("mss", mss, 0xFFFF).to_bytes(2, "big")
    i = 0
    while i < len(options):
        kind = options[i]
        if kind == TCP_OPTION_EOL:
            break
        if kind == TCP_OPTION_NOP:
            i += 1
            continue
        if i + 1 >= len(options) or options[i + 1] < 2:
            break
        length = options[i + 1]
        if kind == TCP_OPTION_MSS and length == 4 and i + 4 <= len(options):
            return options[:i + 2] + value + options[i + 4:]
        i += length
    return bytes((TCP_OPTION_MSS, 4)) + value + options


def _check(name, value, maximum):
    if not isinstance(value, int) or not 0 <= value <= maximum:
        raise FieldOverflow(f"{name}={value!r} does not fit in [0, {maximum}]")
    return value


def _pack_u16(name, value):
    return _check(name, value, 0xFFFF).to_bytes(2, "big")


@lru_cache(maxsize=65536)
def _pack_ip(address):
    try:
        packed = socket.inet_aton(address)
    except (OSError, TypeError) as e:
        raise FieldOverflow(f"invalid IPv4 address {address!r}") from e
    if address.count(".") != 3:
        raise FieldOverflow(f"invalid IPv4 address {address!r}")
    return packed


@lru_cache(maxsize=65536)
def _pack_mac(mac):
    try:
        packed = bytes.fromhex(mac.replace(":", ""))
    except (ValueError, AttributeError) as e:
        raise FieldOverflow(f"invalid MAC address {mac!r}") from e
    if len(packed) != 6:
        raise FieldOverflow(f"invalid MAC address {mac!r}")
    return packed


# --- Builders ---

def tcp_packet(src_mac, dst_mac, src_ip, dst_ip, src_port, dst_port, flags,
               seq=0, ack=0, window=65535, ttl=64, mss=None, payload=b"", ident=0, tos=0):
    """Finalized TCP/IPv4 frame (lengths and checksums filled in)."""
    return finalize_packet(ParsedPacket(
        eth_src=src_mac,
        eth_dst=dst_mac,
        ip=IPv4Header(src_ip=src_ip, dst_ip=dst_ip, protocol=PROTO_TCP, ttl=ttl, tos=tos, identification=ident),
        tcp=TcpHeader(src_port=src_port, dst_port=dst_port, seq=seq, ack=ack, flags=flags,
                      window_size=window, mss=mss),
        payload=payload,
    ))


def udp_packet(src_mac, dst_mac, src_ip, dst_ip, src_port, dst_port, payload=b"", ttl=64, ident=0, tos=0):
    return finalize_packet(ParsedPacket(
        eth_src=src_mac,
        eth_dst=dst_mac,
        ip=IPv4Header(src_ip=src_ip, dst_ip=dst_ip, protocol=PROTO_UDP, ttl=ttl, tos=tos, identification=ident),
        udp=UdpHeader(src_port=src_port, dst_port=dst_port),
        payload=payload,
    ))
