import hashlib
import subprocess
import sys

import pytest

from nkpa_twin.cli import main, read_manifest
from nkpa_twin.records import read_records, write_records

SMALL = """\
[synth]
record_len = 8192
n_buffers = 4
n_added = 1
[pipeline]
segments = 2
max_lag = 30
"""


@pytest.fixture
def ini(tmp_path):
    path = tmp_path / "small.ini"
    path.write_text(SMALL)
    return path


def run(ini, out, *extra):
    return main([*extra[:1], "--config", str(ini), "--out", str(out), *extra[1:]])


def test_theory_is_deterministic(ini, tmp_path, capsys):
    assert run(ini, tmp_path / "a", "theory") == 0
    assert run(ini, tmp_path / "b", "theory") == 0
    a = (tmp_path / "a" / "theory.csv").read_text()
    assert a == (tmp_path / "b" / "theory.csv").read_text()
    rows = {line.split(",")[0]: line.split(",") for line in a.splitlines() if not line.startswith("#")}
    assert rows["zero_drive"][4:9] == ["undefined"] * 5
    assert float(rows["configured"][1]) == pytest.approx(1.1)
    assert float(rows["target_2.21"][4]) == pytest.approx(2.21)


def test_synth_correlate_fit_flow(ini, tmp_path):
    out = tmp_path / "run"
    assert run(ini, out, "synth") == 0
    meta, entries = read_manifest(out / "manifest.txt")
    assert meta["n_buffers"] == "4" and len(entries) == 4
    assert (out / "config.ini").exists()
    assert run(ini, out, "correlate", "--estimator", "both") == 0
    assert (out / "correlation_paper.csv").exists()
    assert run(ini, out, "correlate") == 0
    text = (out / "correlation.csv").read_text()
    assert "config_digest" in text
    assert run(ini, out, "fit") == 0
    summary = (out / "fit_summary.csv").read_text().splitlines()
    assert summary[1].startswith("correlation.csv,")
    assert "gamma_c" in (out / "fit_report.txt").read_text()


def test_correlate_rejects_foreign_records(ini, tmp_path, capsys):
    out = tmp_path / "run"
    run(ini, out, "synth")
    assert run(ini, out, "correlate", "--seed", "5") == 1
    assert "master seed" in capsys.readouterr().err
    other = tmp_path / "other.ini"
    other.write_text(SMALL.replace("n_added = 1", "n_added = 2"))
    assert run(other, tmp_path / "x", "correlate", "--records", str(out)) == 1
    assert "config digest" in capsys.readouterr().err


def test_correlate_rejects_on_only_and_tampered(ini, tmp_path, capsys):
    out = tmp_path / "run"
    run(ini, out, "synth")
    manifest = out / "manifest.txt"
    meta, entries = read_manifest(manifest)
    path = out / entries[0][1]
    recs = read_records(path)
    write_records(path, [r for r in recs if r.tag == "ON"])
    # checksum first: the file no longer matches the manifest
    assert run(ini, out, "correlate") == 1
    assert "checksum" in capsys.readouterr().err
    old = entries[0][3]
    manifest.write_text(manifest.read_text().replace(old, hashlib.sha256(path.read_bytes()).hexdigest()))
    assert run(ini, out, "correlate") == 1
    assert "2 ON and 2 OFF" in capsys.readouterr().err


def test_sweep_isolates_failing_point(tmp_path):
    ini = tmp_path / "sw.ini"
    ini.write_text(SMALL.replace("n_buffers = 4", "n_buffers = 2")
                   + "[sweep]\nkind = power\nvalues = 1.2, 1.0000000001\n")
    assert run(ini, tmp_path, "sweep") == 0
    rows = [r for r in (tmp_path / "sweep_power.csv").read_text().splitlines() if not r.startswith("#")]
    assert rows[0].endswith(",ok")
    assert "error SubtractionError" in rows[1]


def test_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[drive]\neta = 2\n")
    assert main(["theory", "--config", str(bad)]) == 2
    assert "drive.eta" in capsys.readouterr().err
    assert main(["correlate", "--out", str(tmp_path / "empty")]) == 1
    with pytest.raises(SystemExit):
        main(["nosuch"])


def test_module_entry_point():
    done = subprocess.run([sys.executable, "-m", "nkpa_twin", "--version"], capture_output=True, text=True)
    assert done.returncode == 0 and done.stdout.strip() == "0.1.0"
