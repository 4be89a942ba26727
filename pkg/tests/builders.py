"""Frame and capture builders shared by the test modules."""

from dataclasses import dataclass

import numpy as np

from features.pcap_io.packets import ACK, PSH, RST, SYN, serialize_packet, tcp_packet, udp_packet
from features.pcap_io.pcap_io import CaptureMeta, PacketRecord, write_pcap

BASE_US = 1_500_000_000_000_000  # 2017-07-14T02:40:00Z

CLIENT = "10.0.0.1"
SERVER = "10.0.0.2"
RESOLVER = "10.0.0.3"
MACS = {
    CLIENT: "00:11:22:33:44:01",
    SERVER: "00:11:22:33:44:02",
    RESOLVER: "00:11:22:33:44:03",
}

CLIENT_TTL = 64
SERVER_TTL = 128
CLIENT_MSS = 1460
SERVER_MSS = 1400
CLIENT_WINDOW = 29200
SERVER_WINDOW = 8192

TCP_CHECKSUM_OFFSET = 50  # Ethernet 14 + IPv4 20 + TCP 16


def tcp_frame(src_ip, dst_ip, sport, dport, flags, seq=0, ack=0, ttl=64, window=65535, mss=None, payload=b"",
              tos=0):
    pkt = tcp_packet(MACS.get(src_ip, "02:00:00:00:00:01"), MACS.get(dst_ip, "02:00:00:00:00:02"),
                     src_ip, dst_ip, sport, dport, flags, seq=seq, ack=ack, window=window, ttl=ttl,
                     mss=mss, payload=payload, tos=tos)
    return serialize_packet(pkt)


def udp_frame(src_ip, dst_ip, sport, dport, payload=b"", ttl=64, tos=0):
    pkt = udp_packet(MACS.get(src_ip, "02:00:00:00:00:01"), MACS.get(dst_ip, "02:00:00:00:00:02"),
                     src_ip, dst_ip, sport, dport, payload=payload, ttl=ttl, tos=tos)
    return serialize_packet(pkt)


def corrupt_tcp_checksum(frame):
    data = bytearray(frame)
    data[TCP_CHECKSUM_OFFSET + 1] ^= 0xFF
    return bytes(data)


def records(timed_frames):
    """(microseconds, frame bytes) pairs -> PacketRecords."""
    return [PacketRecord.at_micros(ts, data) for ts, data in timed_frames]


def write_capture(path, timed_frames, meta=None):
    write_pcap(str(path), meta or CaptureMeta(), records(timed_frames))
    return str(path)


def conversation(start_us, sport, seq=1000, server_seq=5000):
    """Client -> server HTTP exchange: handshake, request, response. Six frames 1 ms apart."""
    request = b"GET / HTTP/1.1\r\nHost: example\r\n\r\n"
    response = b"HTTP/1.1 200 OK\r\nContent-Length: 0\r\n\r\n"
    c, s = CLIENT, SERVER
    frames = [
        tcp_frame(c, s, sport, 80, SYN, seq=seq, ttl=CLIENT_TTL, window=CLIENT_WINDOW, mss=CLIENT_MSS),
        tcp_frame(s, c, 80, sport, SYN | ACK, seq=server_seq, ack=seq + 1, ttl=SERVER_TTL,
                  window=SERVER_WINDOW, mss=SERVER_MSS),
        tcp_frame(c, s, sport, 80, ACK, seq=seq + 1, ack=server_seq + 1, ttl=CLIENT_TTL, window=CLIENT_WINDOW),
        tcp_frame(c, s, sport, 80, PSH | ACK, seq=seq + 1, ack=server_seq + 1, ttl=CLIENT_TTL,
                  window=CLIENT_WINDOW, payload=request),
        tcp_frame(s, c, 80, sport, PSH | ACK, seq=server_seq + 1, ack=seq + 1 + len(request), ttl=SERVER_TTL,
                  window=SERVER_WINDOW, payload=response),
        udp_frame(c, RESOLVER, sport, 53, payload=b"\x12\x34\x01\x00", ttl=CLIENT_TTL),
    ]
    return [(start_us + i * 1000, frame) for i, frame in enumerate(frames)]


def background_frames(conversations=20, spacing_us=1_000_000):
    """``conversations`` exchanges, one every ``spacing_us``, starting at BASE_US."""
    timed = []
    for k in range(conversations):
        timed.extend(conversation(BASE_US + k * spacing_us, 40000 + k))
    return timed


def write_background(path, conversations=20, spacing_us=1_000_000):
    return write_capture(path, background_frames(conversations, spacing_us))


def uniform_frames(count, span_us, src=CLIENT, dst=SERVER):
    """``count`` UDP frames ``span_us / count`` apart from BASE_US; the last one lands on BASE_US + span_us."""
    step = span_us // count
    times = [BASE_US + step * i for i in range(count - 1)] + [BASE_US + span_us]
    return [(ts, udp_frame(src, dst, 50000, 9999, payload=b"x")) for ts in times]


# --- Randomized traffic ---

TRAFFIC_HOSTS = tuple(f"10.3.0.{i}" for i in range(1, 9))
TRAFFIC_PORTS = (0, 22, 53, 80, 443, 1433, 3389, 8080, 40000, 45123, 50000, 61000)
TRAFFIC_FLAGS = (SYN, SYN | ACK, ACK, PSH | ACK, RST | ACK)
TRAFFIC_TTLS = (32, 64, 128, 255)
TRAFFIC_TOS = (0x00, 0x10, 0xB8)
TRAFFIC_WINDOWS = (1024, 8192, 29200, 65535)
TRAFFIC_MSS = (536, 1400, 1460)
TRAFFIC_PAYLOADS = (0, 0, 1, 40, 200)
ARP_HEADER = bytes.fromhex("ffffffffffff020000000009") + b"\x08\x06"


@dataclass(frozen=True)
class FrameFacts:
    """What a generated frame carries, so tests can recount without the decoder."""
    ts_us: int
    kind: str  # tcp | udp | other
    length: int
    src_ip: str | None = None
    dst_ip: str | None = None
    src_port: int | None = None
    dst_port: int | None = None
    ttl: int | None = None
    tos: int | None = None
    flags: int = 0
    window_size: int | None = None
    mss: int | None = None
    payload_len: int = 0
    corrupt: bool = False

    @property
    def protocol(self):
        return {"tcp": 6, "udp": 17}.get(self.kind)

    @property
    def seconds(self):
        secs, frac = divmod(self.ts_us, 1_000_000)
        return secs + frac / 1_000_000


def random_traffic(seed, count, corrupt_rate=0.0):
    """Seeded mix of TCP, UDP and ARP frames: (timed frames, FrameFacts per frame)."""
    rng = np.random.default_rng(seed)
    ts = BASE_US
    timed, facts = [], []
    for _ in range(count):
        ts += int(rng.integers(0, 20_000))
        roll = rng.random()
        if roll < 0.1:
            frame = ARP_HEADER + rng.bytes(28)
            timed.append((ts, frame))
            facts.append(FrameFacts(ts, "other", len(frame)))
            continue

        src, dst = (str(ip) for ip in rng.choice(TRAFFIC_HOSTS, size=2, replace=False))
        sport, dport = (int(port) for port in rng.choice(TRAFFIC_PORTS, size=2))
        ttl = int(rng.choice(TRAFFIC_TTLS))
        tos = int(rng.choice(TRAFFIC_TOS))
        payload = b"p" * int(rng.choice(TRAFFIC_PAYLOADS))
        if roll < 0.7:
            flags = int(rng.choice(TRAFFIC_FLAGS))
            window = int(rng.choice(TRAFFIC_WINDOWS))
            mss = int(rng.choice(TRAFFIC_MSS)) if flags & SYN else None
            frame = tcp_frame(src, dst, sport, dport, flags, seq=int(rng.integers(0, 2**32)), ttl=ttl,
                              window=window, mss=mss, payload=payload, tos=tos)
            corrupt = bool(rng.random() < corrupt_rate)
            if corrupt:
                frame = corrupt_tcp_checksum(frame)
            fact = FrameFacts(ts, "tcp", len(frame), src, dst, sport, dport, ttl, tos, flags, window, mss,
                              len(payload), corrupt)
        else:
            frame = udp_frame(src, dst, sport, dport, payload=payload, ttl=ttl, tos=tos)
            fact = FrameFacts(ts, "udp", len(frame), src, dst, sport, dport, ttl, tos, payload_len=len(payload))
        timed.append((ts, frame))
        facts.append(fact)
    return timed, facts


TPL_ATTACKER = "192.168.56.101"
TPL_VICTIM = "192.168.56.102"


def template_frames():
    """Recorded two-host exchange: two TCP/445 connections and one UDP datagram."""
    a, v = TPL_ATTACKER, TPL_VICTIM
    exploit = b"\x00\x00\x00\x2f\xffSMBr" + b"\x00" * 39
    frames = [
        tcp_frame(a, v, 49000, 445, SYN, seq=100, mss=1460, ttl=50),
        tcp_frame(v, a, 445, 49000, SYN | ACK, seq=900, ack=101, mss=1380, ttl=50),
        tcp_frame(a, v, 49000, 445, ACK, seq=101, ack=901, ttl=50),
        tcp_frame(a, v, 49001, 445, SYN, seq=7000, mss=1460, ttl=50),
        tcp_frame(a, v, 49000, 445, PSH | ACK, seq=101, ack=901, payload=exploit, ttl=50),
        tcp_frame(v, a, 445, 49001, SYN | ACK, seq=3000, ack=7001, mss=1380, ttl=50),
        tcp_frame(v, a, 445, 49000, PSH | ACK, seq=901, ack=101 + len(exploit), payload=b"reply", ttl=50),
        udp_frame(a, v, 5353, 5353, payload=b"noise", ttl=50),
    ]
    return [(1_000_000 + i * 1000, frame) for i, frame in enumerate(frames)]
