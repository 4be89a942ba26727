import json
import os
from collections import Counter

import pytest

from features.cli.cli import main, parse_attack_specs
from features.errors import InvalidValue
from features.pcap_io.pcap_io import read_pcap, record_micros
from tests.builders import SERVER, background_frames, write_capture


def read_all(path):
    meta, stream = read_pcap(path)
    return [(record_micros(r, meta), r.data) for r in stream]


def inject(background_path, out, *extra):
    return main(["inject", "-i", background_path, "-o", str(out), "--seed", "3",
                 "-a", "portscan", f"victim.ip={SERVER}", "ports=80,81", *extra])


def test_list_attacks(capsys):
    assert main(["list-attacks"]) == 0
    out = capsys.readouterr().out
    assert "portscan" in out and "syn_flood" in out


def test_inject_writes_capture_labels_and_manifest(background_path, tmp_path, capsys):
    out = tmp_path / "out.pcap"
    assert inject(background_path, out) == 0
    manifest = json.loads(capsys.readouterr().out)
    assert manifest["packet_count"] == 125
    assert manifest["attacks"][0]["attack"] == "portscan"
    assert manifest["attacks"][0]["packet_count"] == 5

    merged = read_all(str(out))
    background = read_all(background_path)
    assert len(merged) == len(background) + 5
    times = [ts for ts, _ in merged]
    assert times == sorted(times)
    remaining = Counter(data for _, data in merged)
    remaining.subtract(data for _, data in background)
    assert sum(remaining.values()) == 5 and min(remaining.values()) >= 0
    labels = (tmp_path / "out.pcap.labels.xml").read_text()
    assert "<name>portscan</name>" in labels
    assert not [name for name in os.listdir(tmp_path) if name.endswith(".tmp")]


def test_inject_is_reproducible(background_path, tmp_path):
    first, second = tmp_path / "a.pcap", tmp_path / "b.pcap"
    assert inject(background_path, first) == 0
    assert inject(background_path, second) == 0
    assert first.read_bytes() == second.read_bytes()
    assert (tmp_path / "a.pcap.labels.xml").read_bytes() == (tmp_path / "b.pcap.labels.xml").read_bytes()


def test_inject_warns_about_out_of_order_background(tmp_path, capsys):
    timed = background_frames(3)
    timed.insert(0, timed.pop())
    background = write_capture(tmp_path / "shuffled.pcap", timed)
    out = tmp_path / "out.pcap"
    assert main(["inject", "-i", background, "-o", str(out)]) == 0
    err = " ".join(capsys.readouterr().err.split())
    assert "background records are out of timestamp order" in err
    assert len(read_all(str(out))) == len(timed)


def test_inject_with_report(background_path, tmp_path):
    out = tmp_path / "out.pcap"
    assert inject(background_path, out, "--tided") == 0
    assert (tmp_path / "out.pcap.tided" / "report.json").exists()


def test_inject_without_attacks_copies_background(background_path, tmp_path):
    out = tmp_path / "copy.pcap"
    assert main(["inject", "-i", background_path, "-o", str(out)]) == 0
    assert read_all(str(out)) == read_all(background_path)
    assert '<labels version="1"/>' in (tmp_path / "copy.pcap.labels.xml").read_text()


def test_analyze(background_path, tmp_path, capsys):
    report_dir = tmp_path / "report"
    assert main(["analyze", "-i", background_path, "-o", str(report_dir), "--windows", "10"]) == 0
    document = json.loads((report_dir / "report.json").read_text())
    assert len(document["diversity"]["ttl"]["entropy"]["values"]) == 10
    assert capsys.readouterr().out == ""


def test_unknown_attack_exit_status(background_path, tmp_path, capsys):
    status = main(["inject", "-i", background_path, "-o", str(tmp_path / "o.pcap"), "-a", "teardrop"])
    assert status == 3
    assert "error: UNKNOWN_ATTACK:" in capsys.readouterr().err
    assert not (tmp_path / "o.pcap").exists()


def test_output_must_differ_from_input(background_path, capsys):
    assert main(["inject", "-i", background_path, "-o", background_path]) == 4
    assert "error: INVALID_CONFIG:" in capsys.readouterr().err


def test_bad_capture_exit_status(tmp_path, capsys):
    path = tmp_path / "bad.pcap"
    path.write_bytes(b"\x00" * 24)
    assert main(["analyze", "-i", str(path)]) == 5
    assert "error: BAD_MAGIC:" in capsys.readouterr().err


def test_unknown_parameter_exit_status(background_path, tmp_path, capsys):
    status = main(["inject", "-i", background_path, "-o", str(tmp_path / "o.pcap"), "-a", "portscan", "speed=9"])
    assert status == 4
    assert "error: UNKNOWN_PARAMETER:" in capsys.readouterr().err


def test_usage_error_exits_2():
    with pytest.raises(SystemExit) as info:
        main(["inject"])
    assert info.value.code == 2


def test_attack_spec_parsing():
    assert parse_attack_specs([["portscan", "victim.ip=10.0.0.2", "ports=1-3"]]) == (
        ("portscan", (("victim.ip", "10.0.0.2"), ("ports", "1-3"))),
    )
    with pytest.raises(InvalidValue):
        parse_attack_specs([["portscan", "victim.ip"]])
