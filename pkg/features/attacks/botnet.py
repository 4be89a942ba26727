# features/attacks/botnet.py

import csv
import ipaddress
import logging
import math
from dataclasses import dataclass

from features.errors import CsvParse, InsufficientHosts, InvalidValue, PcapIoError, UnboundBot
from features.stats_core.stats_core import ip_sort_key

logger = logging.getLogger(__name__)

CSV_HEADER = ("time_offset", "src_bot", "dst_bot", "message_type", "payload_size")
# Candidate /16 blocks for fresh bot addresses, tried in order
PRIVATE_BLOCKS = tuple(
    [ipaddress.IPv4Network(f"10.{i}.0.0/16") for i in range(256)]
    + [ipaddress.IPv4Network(f"172.{i}.0.0/16") for i in range(16, 32)]
    + [ipaddress.IPv4Network("192.168.0.0/16")]
)


@dataclass(frozen=True)
class BotnetRow:
    time_offset: float
    src_bot: str
    dst_bot: str
    message_type: str
    payload_size: int


@dataclass(frozen=True)
class BotnetSpec:
    rows: tuple
    bindings: dict  # bot id -> IPv4 address

    def __post_init__(self):
        for row in self.rows:
            for bot in (row.src_bot, row.dst_bot):
                if bot not in self.bindings:
                    raise UnboundBot(f"bot '{bot}' has no address")

    @property
    def bots(self):
        return bot_ids(self.rows)


def bot_ids(rows):
    """Bot ids in order of first appearance."""
    return tuple(dict.fromkeys(bot for row in rows for bot in (row.src_bot, row.dst_bot)))


def parse_botnet_csv(path):
    """Rows sorted by time offset; row numbers in errors count data rows from 1."""
    try:
        with open(path, newline="", encoding="utf-8") as f:
            lines = list(csv.reader(f))
    except (OSError, UnicodeDecodeError) as e:
        raise PcapIoError(f"cannot read botnet CSV '{path}': {e}") from e

    if lines and lines[0] and lines[0][0].strip() == CSV_HEADER[0]:
        lines = lines[1:]
    rows = []
    for number, fields in enumerate(lines, start=1):
        if not any(field.strip() for field in fields):
            continue
        rows.append(_parse_row(number, fields))
    if not rows:
        raise CsvParse(0, "the botnet CSV holds no interactions")
    rows.sort(key=lambda row: row.time_offset)
    return tuple(rows)


def _parse_row(number, fields):
    if len(fields) != len(CSV_HEADER):
        raise CsvParse(number, f"expected {len(CSV_HEADER)} fields ({','.join(CSV_HEADER)}), got {len(fields)}")
    offset_text, src, dst, message_type, size_text = (field.strip() for field in fields)
    try:
        offset = float(offset_text)
    except ValueError:
        raise CsvParse(number, f"time_offset {offset_text!r} is not a number") from None
    if not math.isfinite(offset) or offset < 0:
        raise CsvParse(number, f"time_offset {offset_text!r} must be a non-negative number")
    try:
        size = int(size_text)
    except ValueError:
        raise CsvParse(number, f"payload_size {size_text!r} is not an integer") from None
    if size < 0:
        raise CsvParse(number, "payload_size must be non-negative")
    if not src or not dst:
        raise CsvParse(number, "bot ids must not be empty")
    if not message_type:
        raise CsvParse(number, "message_type must not be empty")
    return BotnetRow(offset, src, dst, message_type, size)


def parse_bindings(text):
    """``id:ip,id:ip`` -> {id: ip}."""
    bindings = {}
    if not text:
        return bindings
    for item in text.split(","):
        bot, sep, ip = item.strip().partition(":")
        if not sep or not bot:
            raise InvalidValue(f"bot binding {item!r} is not of the form id:ip")
        try:
            bindings[bot] = str(ipaddress.IPv4Address(ip.strip()))
        except ValueError:
            raise InvalidValue(f"bot binding {item!r} has an invalid address") from None
    return bindings


def fresh_block(db):
    """First private /16 holding none of the capture's hosts."""
    used = [ipaddress.IPv4Address(ip) for ip in db.hosts]
    for block in PRIVATE_BLOCKS:
        if not any(ip in block for ip in used):
            return block
    raise InsufficientHosts("every private /16 block is already in use by the capture")


def bind_bots(rows, db, reuse_hosts, explicit, rng):
    """Binds every bot id to an address: explicit bindings, then capture hosts or fresh addresses."""
    bindings = {bot: ip for bot, ip in explicit.items()}
    pending = [bot for bot in bot_ids(rows) if bot not in bindings]
    if not pending:
        return bindings

    if reuse_hosts:
        taken = set(bindings.values())
        candidates = sorted((ip for ip in db.hosts if ip not in taken), key=ip_sort_key)
        if len(pending) > len(candidates):
            raise InsufficientHosts(f"{len(pending)} bots need hosts but the capture offers {len(candidates)}")
        chosen = rng.choice(len(candidates), size=len(pending), replace=False).tolist()
        bindings.update({bot: candidates[i] for bot, i in zip(pending, chosen)})
    else:
        block = fresh_block(db)
        taken = set(bindings.values())
        addresses = (str(ip) for ip in block.hosts() if str(ip) not in taken)
        bindings.update({bot: next(addresses) for bot in pending})
        logger.debug("fresh bots placed in %s", block)
    return bindings
