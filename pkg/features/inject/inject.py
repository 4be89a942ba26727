# features/inject/inject.py

import heapq
import logging
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from xml.dom import minidom

from features.errors import PcapIoError
from features.pcap_io.pcap_io import record_micros, to_microsecond_record

logger = logging.getLogger(__name__)

LABELS_VERSION = "1"
LABELS_SUFFIX = ".labels.xml"
EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)


@dataclass(frozen=True)
class LabelEntry:
    """Where one injected attack sits in the output capture (microsecond timestamps)."""
    attack_name: str
    start_ts: int
    end_ts: int
    packet_count: int
    params_digest: str


def label_for(attack_name, records, params_digest):
    micros = [record.ts_secs * 1_000_000 + record.ts_frac for record in records]
    return LabelEntry(attack_name, min(micros), max(micros), len(micros), params_digest)


def merge(background, attacks, meta):
    """Streams the background records interleaved with every attack's records by timestamp.

    Ties keep background first, then attacks in the order given.
    """
    streams = [((record_micros(record, meta), to_microsecond_record(record, meta)) for record in background)]
    for attack in attacks:
        streams.append(((record.ts_secs * 1_000_000 + record.ts_frac, record) for record in attack.records))
    for _, record in heapq.merge(*streams, key=lambda item: item[0]):
        yield record


def format_timestamp(micros):
    """ISO-8601 UTC with microseconds."""
    return (EPOCH + timedelta(microseconds=micros)).isoformat(timespec="microseconds")


def labels_document(entries):
    doc = minidom.Document()
    root = doc.createElement("labels")
    root.setAttribute("version", LABELS_VERSION)
    doc.appendChild(root)
    for entry in entries:
        attack = doc.createElement("attack")
        for tag, text in (
            ("name", entry.attack_name),
            ("start", format_timestamp(entry.start_ts)),
            ("end", format_timestamp(entry.end_ts)),
            ("packet_count", str(entry.packet_count)),
            ("params_digest", entry.params_digest),
        ):
            child = doc.createElement(tag)
            child.appendChild(doc.createTextNode(text))
            attack.appendChild(child)
        root.appendChild(attack)
    return doc.toprettyxml(indent="  ", encoding="UTF-8")


def write_labels(entries, out_path):
    data = labels_document(entries)
    try:
        with open(out_path, "wb") as f:
            f.write(data)
    except OSError as e:
        raise PcapIoError(f"cannot write labels '{out_path}': {e}") from e
    logger.info("wrote %d labels to %s", len(entries), out_path)
    return out_path
