# features/tided/report.py

import io
import json
import logging
import os

import pandas as pd
from rich.console import Console
from rich.panel import Panel
from rich.table import Table

from features.errors import PcapIoError

logger = logging.getLogger(__name__)

REPORT_FORMAT_VERSION = 1
SUMMARY_FILE = "summary.txt"
REPORT_FILE = "report.json"
SUMMARY_WIDTH = 100
SERIES_KINDS = ("entropy", "novelty", "cumulative_entropy")


def _fmt(value):
    return "n/a" if value is None else f"{value:.6f}"


def render_summary(report, console):
    """Prints the human-readable report onto ``console``."""
    checks = Table(title="Availability and validity", show_header=True, header_style="bold magenta")
    checks.add_column("Test")
    checks.add_column("Result", justify="right")
    cs = report.checksum_result
    ports = report.port_result
    checks.add_row("payload ratio", _fmt(report.payload_ratio))
    checks.add_row("TCP checksums correct", str(cs.correct_count))
    checks.add_row("TCP checksums incorrect", str(cs.incorrect_count))
    checks.add_row("incorrect checksum ratio", _fmt(cs.incorrect_ratio))
    checks.add_row("TCP frames unverifiable", str(cs.unverifiable_count))
    checks.add_row("well-known port packets", str(ports.well_known_count))
    checks.add_row("registered port packets", str(ports.registered_count))
    checks.add_row("dynamic port packets", str(ports.dynamic_count))
    checks.add_row("unassigned port packets", str(ports.unassigned_count))
    checks.add_row("port 0 packets", str(ports.port_zero_count))

    diversity = Table(title="Diversity", show_header=True, header_style="bold magenta")
    diversity.add_column("Feature")
    diversity.add_column("Distinct", justify="right")
    diversity.add_column("Normalized entropy", justify="right")
    diversity.add_column("Novelty entropy", justify="right")
    for name, result in report.diversity.items():
        diversity.add_row(
            name,
            str(result.distinct_count),
            _fmt(result.normalized_entropy),
            _fmt(result.novelty_normalized_entropy),
        )

    console.print(Panel(f"capture {report.content_hash}\npackets {report.packet_count}", title="TIDED report"))
    console.print(checks)
    console.print(diversity)
    if not report.warnings:
        console.print("warnings: none", markup=False, highlight=False)
        return
    console.print(f"warnings: {len(report.warnings)}", markup=False, highlight=False)
    for warning in report.warnings:
        console.print(f"- {warning}", markup=False, highlight=False)


def summary_text(report):
    buffer = io.StringIO()
    console = Console(file=buffer, width=SUMMARY_WIDTH, color_system=None, force_terminal=False, soft_wrap=True)
    render_summary(report, console)
    return buffer.getvalue()


def _series_document(series):
    return {
        "window_length": series.window_length,
        "window_start_times": list(series.window_start_times),
        "values": list(series.values),
    }


def report_document(report):
    """Every number of the report as plain JSON types."""
    cs = report.checksum_result
    ports = report.port_result
    return {
        "format_version": REPORT_FORMAT_VERSION,
        "content_hash": report.content_hash,
        "packet_count": report.packet_count,
        "payload_ratio": report.payload_ratio,
        "checksum": {
            "correct_count": cs.correct_count,
            "incorrect_count": cs.incorrect_count,
            "incorrect_ratio": cs.incorrect_ratio,
            "unverifiable_count": cs.unverifiable_count,
        },
        "ports": {
            "well_known_count": ports.well_known_count,
            "registered_count": ports.registered_count,
            "dynamic_count": ports.dynamic_count,
            "unassigned_count": ports.unassigned_count,
            "port_zero_count": ports.port_zero_count,
        },
        "diversity": {
            name: {
                "distinct_count": r.distinct_count,
                "normalized_entropy": r.normalized_entropy,
                "novelty_normalized_entropy": r.novelty_normalized_entropy,
                "entropy": _series_document(r.entropy_series),
                "novelty": _series_document(r.novelty_series),
                "cumulative_entropy": _series_document(r.cumulative_entropy_series),
            }
            for name, r in report.diversity.items()
        },
        "warnings": list(report.warnings),
    }


def series_files(report):
    """(file name, series) for every diversity series, three per feature."""
    for name, result in report.diversity.items():
        yield f"{name}_entropy.csv", result.entropy_series
        yield f"{name}_novelty.csv", result.novelty_series
        yield f"{name}_cumulative_entropy.csv", result.cumulative_entropy_series


def emit_report(report, out_dir):
    """Writes summary.txt, report.json and the CSV series; returns the written paths."""
    written = []
    try:
        os.makedirs(out_dir, exist_ok=True)
        summary_path = os.path.join(out_dir, SUMMARY_FILE)
        with open(summary_path, "w", encoding="utf-8", newline="\n") as f:
            f.write(summary_text(report))
        written.append(summary_path)

        report_path = os.path.join(out_dir, REPORT_FILE)
        with open(report_path, "w", encoding="utf-8", newline="\n") as f:
            f.write(json.dumps(report_document(report), sort_keys=True, indent=4))
            f.write("\n")
        written.append(report_path)

        for file_name, series in series_files(report):
            csv_path = os.path.join(out_dir, file_name)
            frame = pd.DataFrame({"window_start": series.window_start_times, "value": series.values})
            frame.to_csv(csv_path, index=False, float_format="%.6f", lineterminator="\n")
            written.append(csv_path)
    except OSError as e:
        raise PcapIoError(f"cannot write report to '{out_dir}': {e}") from e
    logger.info("wrote %d report files to %s", len(written), out_dir)
    return written
