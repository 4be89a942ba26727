"""
Regenerate database/port_frequency.csv.

Seed ports are listed from most to least commonly found open; the port at rank r
gets frequency 0.48 / (r + 1). Remaining slots are filled with ascending unused
port numbers at the minimum frequency until the table holds TABLE_SIZE entries.

Usage: python scripts/generate_port_table.py [output.csv]
"""
from __future__ import annotations

import sys
from pathlib import Path

import pandas as pd

TABLE_SIZE = 1200
TOP_FREQUENCY = 0.48
FILL_FREQUENCY = 0.000001
OUTPUT = Path(__file__).resolve().parent.parent / "database" / "port_frequency.csv"

SEED_PORTS = [
    80, 23, 443, 21, 22, 25, 3389, 110, 445, 139, 143, 53, 135, 3306, 8080, 1723, 111, 995, 993, 5900,
    1025, 587, 8888, 199, 1720, 465, 548, 113, 81, 6001, 10000, 514, 5060, 179, 1026, 2000, 8443, 8000,
    32768, 554, 26, 1433, 49152, 2001, 515, 8008, 49154, 1027, 5666, 646, 5000, 5631, 631, 49153, 8081,
    2049, 88, 79, 5800, 106, 2121, 1110, 49155, 6000, 513, 990, 5357, 427, 49156, 543, 544, 5101, 144,
    7, 389, 8009, 3128, 444, 9999, 5009, 7070, 5190, 3000, 5432, 1900, 3986, 13, 1029, 9, 5051, 6646,
    49157, 1028, 873, 1755, 2717, 4899, 9100, 119, 37,
    # Services common on current networks
    636, 1521, 2222, 3268, 5985, 5986, 6379, 8000, 8082, 8083, 8181, 8880, 9000, 9090, 9200, 9418,
    10250, 11211, 1883, 5672, 27017, 50000,
]


def build_table() -> pd.DataFrame:
    ports = list(dict.fromkeys(p for p in SEED_PORTS if 1 <= p <= 65535))
    rows = [(port, f"{TOP_FREQUENCY / (rank + 1):.6f}") for rank, port in enumerate(ports)]
    seen = set(ports)
    candidate = 1
    while len(rows) < TABLE_SIZE:
        if candidate not in seen:
            rows.append((candidate, f"{FILL_FREQUENCY:.6f}"))
        candidate += 1
    return pd.DataFrame(rows, columns=["port", "frequency"])


def main(argv: list[str]) -> int:
    out = Path(argv[1]) if len(argv) > 1 else OUTPUT
    out.parent.mkdir(parents=True, exist_ok=True)
    build_table().to_csv(out, index=False, lineterminator="\n")
    print(f"wrote {TABLE_SIZE} ports to {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv))
