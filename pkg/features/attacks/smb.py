# features/attacks/smb.py

"""NetBIOS session and SMB1 negotiate byte layouts (all SMB integers little-endian)."""

import struct

SMB_PORT = 445
NBSS_SESSION_MESSAGE = 0x00
NBSS_MAX_LENGTH = 0x1FFFF

SMB_COMMAND_NEGOTIATE = 0x72
SMB_FLAGS_REQUEST = 0x18
SMB_FLAGS_REPLY = 0x98
SMB_FLAGS2 = 0xC853

DIALECTS = (
    "PC NETWORK PROGRAM 1.0",
    "LANMAN1.0",
    "Windows for Workgroups 3.1a",
    "LM1.2X002",
    "LANMAN2.1",
    "NT LM 0.12",
)
NT_LM_DIALECT_INDEX = DIALECTS.index("NT LM 0.12")

SMB_HEADER = struct.Struct("<4sBIBHH8sHHHHH")
NEGOTIATE_RESPONSE_WORDS = struct.Struct("<BHBHHIIIIQhB")

SECURITY_MODE = 0x03  # user-level, challenge/response
MAX_MPX_COUNT = 50
MAX_NUMBER_VCS = 1
MAX_BUFFER_SIZE = 16644
MAX_RAW_SIZE = 65536
CAPABILITIES = 0x0001E3FC
FILETIME_EPOCH_OFFSET = 116444736000000000  # 100 ns ticks from 1601 to 1970
DOMAIN_NAME = "WORKGROUP"


def nbss_header(length):
    """Session-message header: type, flags (bit 0 extends the length to 17 bits), length."""
    if not 0 <= length <= NBSS_MAX_LENGTH:
        raise ValueError(f"NetBIOS length {length} exceeds 17 bits")
    return struct.pack("!BBH", NBSS_SESSION_MESSAGE, length >> 16, length & 0xFFFF)


def session_message(smb):
    return nbss_header(len(smb)) + smb


def _smb_header(flags, pid, mid, status=0):
    return SMB_HEADER.pack(b"\xffSMB", SMB_COMMAND_NEGOTIATE, status, flags, SMB_FLAGS2,
                           0, b"\x00" * 8, 0, 0, pid, 0, mid)


def negotiate_request(pid=0xFEFF, mid=0):
    dialects = b"".join(b"\x02" + name.encode("ascii") + b"\x00" for name in DIALECTS)
    body = struct.pack("<BH", 0, len(dialects)) + dialects
    return session_message(_smb_header(SMB_FLAGS_REQUEST, pid, mid) + body)


def negotiate_response(challenge, system_time_us, pid=0xFEFF, mid=0):
    """NT LM 0.12 negotiate response carrying an 8-byte challenge."""
    if len(challenge) != 8:
        raise ValueError("challenge must be 8 bytes")
    words = NEGOTIATE_RESPONSE_WORDS.pack(
        17,
        NT_LM_DIALECT_INDEX,
        SECURITY_MODE,
        MAX_MPX_COUNT,
        MAX_NUMBER_VCS,
        MAX_BUFFER_SIZE,
        MAX_RAW_SIZE,
        0,
        CAPABILITIES,
        system_time_us * 10 + FILETIME_EPOCH_OFFSET,
        0,
        len(challenge),
    )
    data = challenge + (DOMAIN_NAME + "\x00").encode("utf-16-le")
    body = words + struct.pack("<H", len(data)) + data
    return session_message(_smb_header(SMB_FLAGS_REPLY, pid, mid) + body)


SMBLORIS_MESSAGE = nbss_header(NBSS_MAX_LENGTH)
