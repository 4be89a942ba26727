# features/pcap_io/pcap_io.py

import logging
import struct
from dataclasses import dataclass

from features.errors import (
    BadMagic,
    InvalidRecord,
    PcapIoError,
    TruncatedRecord,
    UnsupportedLinkType,
)

logger = logging.getLogger(__name__)

# --- Format Constants ---

LINKTYPE_ETHERNET = 1
PCAP_VERSION = (2, 4)
GLOBAL_HEADER_LEN = 24
RECORD_HEADER_LEN = 16
MICROS_PER_SECOND = 1_000_000
NANOS_PER_SECOND = 1_000_000_000

MICROSECOND_LE = "microsecond-LE"
MICROSECOND_BE = "microsecond-BE"
NANOSECOND_LE = "nanosecond-LE"
NANOSECOND_BE = "nanosecond-BE"

# First four file bytes -> (variant, struct byte order)
MAGIC_VARIANTS = {
    b"\xd4\xc3\xb2\xa1": (MICROSECOND_LE, "<"),
    b"\xa1\xb2\xc3\xd4": (MICROSECOND_BE, ">"),
    b"\x4d\x3c\xb2\xa1": (NANOSECOND_LE, "<"),
    b"\xa1\xb2\x3c\x4d": (NANOSECOND_BE, ">"),
}

# Output is always microsecond little-endian
_OUTPUT_GLOBAL_HEADER = struct.Struct("<IHHiIII")
_OUTPUT_RECORD_HEADER = struct.Struct("<IIII")


@dataclass(frozen=True)
class CaptureMeta:
    """Global header of a capture file."""
    magic_variant: str = MICROSECOND_LE
    link_type: int = LINKTYPE_ETHERNET
    snaplen: int = 65535
    version: tuple = PCAP_VERSION

    @property
    def nanosecond(self):
        return self.magic_variant in (NANOSECOND_LE, NANOSECOND_BE)

    @property
    def byte_order(self):
        return ">" if self.magic_variant.endswith("BE") else "<"

    @property
    def frac_per_second(self):
        return NANOS_PER_SECOND if self.nanosecond else MICROS_PER_SECOND


@dataclass(frozen=True, slots=True)
class PacketRecord:
    """One captured frame as stored in the file."""
    ts_secs: int
    ts_frac: int
    captured_len: int
    original_len: int
    data: bytes

    @classmethod
    def at_micros(cls, ts_us, data, original_len=None):
        """Builds a microsecond-resolution record holding a whole frame."""
        secs, frac = divmod(ts_us, MICROS_PER_SECOND)
        return cls(secs, frac, len(data), len(data) if original_len is None else original_len, data)


# --- Reading ---

def read_pcap(path):
    """Opens a capture and returns its meta plus a lazy, in-order record stream."""
    try:
        f = open(path, "rb")
    except OSError as e:
        raise PcapIoError(f"cannot open '{path}': {e}") from e
    try:
        meta, byte_order = _read_global_header(f, path)
    except BaseException:
        f.close()
        raise
    return meta, _iter_records(f, byte_order, path)


def _read_global_header(f, path):
    header = f.read(GLOBAL_HEADER_LEN)
    if len(header) < 4 or header[:4] not in MAGIC_VARIANTS:
        raise BadMagic(f"'{path}' is not a PCAP file (magic {header[:4].hex() or 'missing'})")
    variant, byte_order = MAGIC_VARIANTS[header[:4]]
    if len(header) < GLOBAL_HEADER_LEN:
        raise TruncatedRecord(f"'{path}': global header holds {len(header)} of {GLOBAL_HEADER_LEN} bytes")

    major, minor, _thiszone, _sigfigs, snaplen, link_type = struct.unpack(
        byte_order + "HHiIII", header[4:]
    )
    if link_type != LINKTYPE_ETHERNET:
        raise UnsupportedLinkType(f"'{path}': link type {link_type} is not Ethernet (1)")
    if snaplen <= 0:
        raise InvalidRecord(f"'{path}': snaplen must be positive")
    return CaptureMeta(variant, link_type, snaplen, (major, minor)), byte_order


def _iter_records(f, byte_order, path):
    record_header = struct.Struct(byte_order + "IIII")
    index = 0
    with f:
        while True:
            header = f.read(RECORD_HEADER_LEN)
            if not header:
                return
            if len(header) < RECORD_HEADER_LEN:
                raise TruncatedRecord(f"'{path}': record {index} header holds {len(header)} bytes")
            ts_secs, ts_frac, incl_len, orig_len = record_header.unpack(header)
            data = f.read(incl_len)
            if len(data) < incl_len:
                raise TruncatedRecord(
                    f"'{path}': record {index} declares {incl_len} bytes, file holds {len(data)}"
                )
            yield PacketRecord(ts_secs, ts_frac, incl_len, orig_len, data)
            index += 1


# --- Writing ---

def write_pcap(path, meta, packets):
    """Writes records as a microsecond little-endian capture; returns the record count."""
    try:
        with open(path, "wb") as f:
            return write_records(f, meta, packets)
    except OSError as e:
        raise PcapIoError(f"cannot write '{path}': {e}") from e


def write_records(f, meta, packets):
    f.write(_OUTPUT_GLOBAL_HEADER.pack(0xA1B2C3D4, *PCAP_VERSION, 0, 0, meta.snaplen, meta.link_type))
    count = 0
    for record in packets:
        _check_record(record, meta)
        # Nanosecond inputs are truncated toward zero
        frac = record.ts_frac // 1000 if meta.nanosecond else record.ts_frac
        f.write(_OUTPUT_RECORD_HEADER.pack(record.ts_secs, frac, record.captured_len, record.original_len))
        f.write(record.data)
        count += 1
    return count


def _check_record(record, meta):
    if record.captured_len != len(record.data):
        raise InvalidRecord(f"captured_len {record.captured_len} != {len(record.data)} data bytes")
    if record.captured_len > record.original_len:
        raise InvalidRecord(f"captured_len {record.captured_len} exceeds original_len {record.original_len}")
    if record.captured_len > meta.snaplen:
        raise InvalidRecord(f"captured_len {record.captured_len} exceeds snaplen {meta.snaplen}")
    if not 0 <= record.ts_frac < meta.frac_per_second:
        raise InvalidRecord(f"ts_frac {record.ts_frac} out of range for {meta.magic_variant}")


# --- Timestamp Helpers ---

def record_micros(record, meta):
    """Record timestamp as integer microseconds since the epoch."""
    frac = record.ts_frac // 1000 if meta.nanosecond else record.ts_frac
    return record.ts_secs * MICROS_PER_SECOND + frac


def record_seconds(record, meta):
    return record.ts_secs + record.ts_frac / meta.frac_per_second


def to_microsecond_record(record, meta):
    """Same frame with its timestamp expressed in microseconds."""
    if not meta.nanosecond:
        return record
    return PacketRecord(record.ts_secs, record.ts_frac // 1000, record.captured_len, record.original_len, record.data)
