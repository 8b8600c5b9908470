import json
import subprocess
import sys

import pytest

from streamtrace.cli import NOTHING_FOUND, main

from kodi_fixtures import build_reference_tree, tree_digest


@pytest.fixture(scope="module")
def tree(tmp_path_factory):
    return build_reference_tree(tmp_path_factory.mktemp("cli") / "tree")


def test_scan(tree, capsys):
    assert main(["scan", "--root", str(tree)]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 4
    assert sorted(l.split("\t")[0] for l in lines) == ["Android", "LinuxDesktop", "OSMC", "Windows"]


def test_scan_nothing_found(tmp_path, capsys):
    assert main(["scan", "--root", str(tmp_path)]) == 3
    assert NOTHING_FOUND in capsys.readouterr().err


def test_bad_root(tmp_path, capsys):
    assert main(["scan", "--root", str(tmp_path / "missing")]) == 2
    assert "error:" in capsys.readouterr().err


def test_output_inside_root_refused(tree, capsys):
    assert main(["report", "--root", str(tree), "--out", str(tree / "out")]) == 2
    assert not (tree / "out").exists()


def test_unsupported_format(tree, tmp_path, capsys):
    assert main(["report", "--root", str(tree), "--out", str(tmp_path / "o"), "--formats", "pdf"]) == 2


def test_extract_writes_per_installation(tree, tmp_path, capsys):
    out = tmp_path / "x"
    assert main(["extract", "--root", str(tree), "--out", str(out), "--fixed-clock"]) == 0
    names = sorted(p.name for p in out.iterdir())
    assert names == ["artifacts_01_Windows.json", "artifacts_02_Android.json",
                     "artifacts_03_LinuxDesktop.json", "artifacts_04_OSMC.json", "manifest.json"]
    win = json.loads((out / "artifacts_01_Windows.json").read_text())
    carved = [a for d in win["databases"] for a in d["addons"] if a["liveness"] != "Live"]
    assert [a["addon_id"] for a in carved] == ["plugin.video.fixture003"]
    err = capsys.readouterr().err
    assert "previous session log absent" in err


def test_no_carve(tree, tmp_path):
    out = tmp_path / "x"
    assert main(["extract", "--root", str(tree), "--out", str(out), "--no-carve"]) == 0
    win = json.loads((out / "artifacts_01_Windows.json").read_text())
    assert all(a["liveness"] == "Live" for d in win["databases"] for a in d["addons"])


def test_timeline_command(tree, tmp_path):
    out = tmp_path / "t"
    assert main(["timeline", "--root", str(tree), "--out", str(out), "--fixed-clock"]) == 0
    events = json.loads((out / "timeline.json").read_text())
    dated = [e for e in events if e["timestamp"] and not e["timestamp"]["value"].startswith("T")]
    assert events[:len(dated)] == dated
    assert (out / "timeline.csv").read_bytes().startswith(b"timestamp,clock,")


def test_report_all_formats(tree, tmp_path):
    out = tmp_path / "r"
    before = tree_digest(tree)
    assert main(["report", "--root", str(tree), "--out", str(out), "--formats", "json,csv,html",
                 "--case-id", "CASE-9", "--examiner", "Dana", "--fixed-clock"]) == 0
    assert sorted(p.name for p in out.iterdir()) == ["manifest.json", "report.csv", "report.html",
                                                      "report.json"]
    data = json.loads((out / "report.json").read_text())
    assert data["case"]["case_id"] == "CASE-9" and data["case"]["opened_at"] == "2000-01-01T00:00:00Z"
    kinds = sorted(d["kind"] for d in data["discrepancies"] if d["home_path"].startswith("Users"))
    assert kinds == ["DbOnlyCarved"]
    manifest_paths = {m["path"] for m in data["manifest"]}
    assert "Users/alice/AppData/Roaming/Kodi/userdata/Database/Addons27.db" in manifest_paths
    assert tree_digest(tree) == before


def test_module_entry_point(tree):
    proc = subprocess.run([sys.executable, "-m", "streamtrace", "scan", "--root", str(tree)],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and len(proc.stdout.splitlines()) == 4
