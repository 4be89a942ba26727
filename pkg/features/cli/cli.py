# features/cli/cli.py

import argparse
import json
import logging
import os
import shutil
import tempfile
from dataclasses import dataclass

from rich.console import Console
from rich.logging import RichHandler
from rich.panel import Panel
from rich.table import Table

from features.attack_framework.attack_framework import attack_seed
from features.attacks.attacks import generate, get_attack, list_attacks
from features.errors import InvalidConfig, InvalidValue, PcapIoError, ToolkitError
from features.inject.inject import LABELS_SUFFIX, format_timestamp, merge, write_labels
from features.pcap_io.pcap_io import MICROSECOND_LE, CaptureMeta, read_pcap, write_records
from features.stats_core.stats_core import DEFAULT_WINDOWS, load_or_compute
from features.tided.report import emit_report, render_summary
from features.tided.tided import DEFAULT_FEATURES, build_report

logger = logging.getLogger(__name__)

console = Console()
err_console = Console(stderr=True)

TIDED_SUFFIX = ".tided"


@dataclass(frozen=True)
class RunConfig:
    input_path: str
    output_path: str | None = None
    cache_dir: str | None = None
    seed: int = 0
    window_length: float | None = None
    n_windows: int = DEFAULT_WINDOWS
    attack_specs: tuple = ()  # ((name, ((key, value), ...)), ...)
    tided_enabled: bool = False
    no_cache: bool = False
    report_dir: str | None = None


# --- Argument Parsing ---

def build_parser():
    parser = argparse.ArgumentParser(
        prog="pcap-injector",
        description="Inject synthetic attacks into a background capture and test dataset quality.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    commands = parser.add_subparsers(dest="command", required=True)

    def add_common(sub):
        sub.add_argument("-i", "--input", required=True, help="background PCAP")
        sub.add_argument("--cache-dir", help="statistics cache directory")
        sub.add_argument("--no-cache", action="store_true", help="recompute statistics, bypassing the cache")
        windows = sub.add_mutually_exclusive_group()
        windows.add_argument("--windows", type=int, help=f"equal time windows (default {DEFAULT_WINDOWS})")
        windows.add_argument("--window-seconds", type=float, help="window length in seconds")

    inject = commands.add_parser("inject", help="inject attacks and label them")
    add_common(inject)
    inject.add_argument("-o", "--output", required=True, help="output PCAP")
    inject.add_argument("-a", "--attack", action="append", nargs="+", default=[], metavar="NAME key=value",
                        help="attack name followed by its parameters; repeatable")
    inject.add_argument("--seed", type=int, default=0, help="global seed (default 0)")
    inject.add_argument("--tided", action="store_true", help="also write the TIDED report to <output>.tided/")

    analyze = commands.add_parser("analyze", help="TIDED report of a capture")
    add_common(analyze)
    analyze.add_argument("-o", "--output", help="report directory (default <input>.tided)")

    commands.add_parser("list-attacks", help="registered attacks and their parameters")
    return parser


def parse_attack_specs(groups):
    """[['portscan', 'victim.ip=10.0.0.5'], ...] -> (('portscan', (('victim.ip', '10.0.0.5'),)), ...)."""
    specs = []
    for name, *pairs in groups:
        params = {}
        for pair in pairs:
            key, sep, value = pair.partition("=")
            if not sep or not key:
                raise InvalidValue(f"attack parameter {pair!r} for {name} is not key=value")
            if key in params:
                raise InvalidValue(f"parameter '{key}' given twice for {name}")
            params[key] = value
        specs.append((name, tuple(params.items())))
    return tuple(specs)


def config_from_args(args):
    if args.windows is not None and args.windows < 1:
        raise InvalidConfig("--windows must be at least 1")
    if args.window_seconds is not None and not args.window_seconds > 0:
        raise InvalidConfig("--window-seconds must be positive")
    if args.command == "inject":
        if args.seed < 0:
            raise InvalidConfig("--seed must be non-negative")
        return RunConfig(
            input_path=args.input,
            output_path=args.output,
            cache_dir=args.cache_dir,
            seed=args.seed,
            window_length=args.window_seconds,
            n_windows=args.windows or DEFAULT_WINDOWS,
            attack_specs=parse_attack_specs(args.attack),
            tided_enabled=args.tided,
            no_cache=args.no_cache,
        )
    return RunConfig(
        input_path=args.input,
        cache_dir=args.cache_dir,
        window_length=args.window_seconds,
        n_windows=args.windows or DEFAULT_WINDOWS,
        no_cache=args.no_cache,
        report_dir=args.output,
    )


# --- Operations ---

def _statistics(config):
    return load_or_compute(
        config.input_path, config.window_length, cache_dir=config.cache_dir, use_cache=not config.no_cache
    )


def _report(config, db, out_dir):
    report = build_report(config.input_path, db, DEFAULT_FEATURES, config.n_windows, config.window_length)
    emit_report(report, out_dir)
    return report


def _remove(path):
    if os.path.isdir(path):
        shutil.rmtree(path, ignore_errors=True)
    elif os.path.exists(path):
        os.remove(path)


def run_inject(config):
    """Output capture, labels and (optionally) the TIDED report; prints the run manifest."""
    if config.output_path is None:
        raise InvalidConfig("inject needs an output path")
    if os.path.realpath(config.output_path) == os.path.realpath(config.input_path):
        raise InvalidConfig("output path must differ from the input path")
    for name, _ in config.attack_specs:
        get_attack(name)

    db = _statistics(config)
    if db.file_stats.out_of_order_count:
        logger.warning(
            "%d background records are out of timestamp order; they keep their order and the output "
            "will not be fully time-ordered", db.file_stats.out_of_order_count,
        )
    attacks = [
        generate(name, dict(pairs), db, attack_seed(config.seed, index))
        for index, (name, pairs) in enumerate(config.attack_specs)
    ]

    labels_path = config.output_path + LABELS_SUFFIX
    tided_path = config.output_path + TIDED_SUFFIX
    out_dir = os.path.dirname(os.path.abspath(config.output_path))
    temps = []
    try:
        meta, background = read_pcap(config.input_path)
        largest = max((record.captured_len for attack in attacks for record in attack.records), default=0)
        out_meta = CaptureMeta(MICROSECOND_LE, meta.link_type, max(meta.snaplen, largest), meta.version)
        if out_meta.snaplen > meta.snaplen:
            logger.info("snaplen raised from %d to %d for injected frames", meta.snaplen, out_meta.snaplen)

        fd, pcap_tmp = tempfile.mkstemp(dir=out_dir, suffix=".pcap.tmp")
        temps.append(pcap_tmp)
        with os.fdopen(fd, "wb") as f:
            count = write_records(f, out_meta, merge(background, attacks, meta))

        fd, labels_tmp = tempfile.mkstemp(dir=out_dir, suffix=".labels.tmp")
        os.close(fd)
        temps.append(labels_tmp)
        write_labels([attack.label for attack in attacks], labels_tmp)

        tided_tmp = None
        if config.tided_enabled:
            tided_tmp = tempfile.mkdtemp(dir=out_dir, suffix=".tided.tmp")
            temps.append(tided_tmp)
            _report(config, db, tided_tmp)

        os.replace(pcap_tmp, config.output_path)
        os.replace(labels_tmp, labels_path)
        if tided_tmp is not None:
            _remove(tided_path)
            os.replace(tided_tmp, tided_path)
    except OSError as e:
        for path in temps:
            _remove(path)
        raise PcapIoError(f"cannot write outputs: {e}") from e
    except BaseException:
        for path in temps:
            _remove(path)
        raise

    logger.info("wrote %d packets to %s", count, config.output_path)
    manifest = {
        "input": config.input_path,
        "output": config.output_path,
        "labels": labels_path,
        "tided": tided_path if config.tided_enabled else None,
        "seed": config.seed,
        "packet_count": count,
        "attacks": [
            {
                **attack.params.to_document(),
                "packet_count": attack.label.packet_count,
                "start": format_timestamp(attack.label.start_ts),
                "end": format_timestamp(attack.label.end_ts),
                "params_digest": attack.label.params_digest,
            }
            for attack in attacks
        ],
    }
    console.print_json(json.dumps(manifest))
    return 0


def run_analyze(config):
    """TIDED report set for the input capture; never writes a PCAP."""
    db = _statistics(config)
    out_dir = config.report_dir or config.input_path + TIDED_SUFFIX
    report = _report(config, db, out_dir)
    render_summary(report, err_console)
    err_console.print(f"[green]report written to {out_dir}[/green]")
    return 0


def run_list_attacks():
    for definition in list_attacks():
        table = Table(show_header=True, header_style="bold magenta", expand=False)
        table.add_column("Parameter")
        table.add_column("Type")
        table.add_column("Default source")
        table.add_column("Default")
        table.add_column("Description")
        for spec in definition.schema:
            default = "" if spec.default is None else str(spec.default)
            table.add_row(spec.name, spec.type, spec.default_source, default, spec.help)
        console.print(Panel(table, title=f"[bold]{definition.name}[/bold]", subtitle=definition.summary,
                            border_style="blue", expand=False))
    return 0


# --- Entry Point ---

def configure_logging(verbose):
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=err_console, show_path=False)],
        force=True,
    )


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.verbose)
    try:
        if args.command == "list-attacks":
            return run_list_attacks()
        config = config_from_args(args)
        if args.command == "inject":
            return run_inject(config)
        return run_analyze(config)
    except ToolkitError as e:
        err_console.print(f"error: {e.code}: {e}", markup=False, highlight=False, soft_wrap=True)
        return e.exit_status
    except Exception as e:
        logger.debug("unexpected failure", exc_info=True)
        err_console.print(f"error: INTERNAL: {e}", markup=False, highlight=False, soft_wrap=True)
        return 1
