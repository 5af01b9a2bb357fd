import json

import pytest

from ngoschrod import cli
from ngoschrod.errors import CapExceededError
from ngoschrod.experiments import default_config


def test_parse_qubits():
    assert cli.parse_qubits(["x=4", "p=9"]) == {"x": 4, "p": 9}
    assert cli.parse_qubits("x=4, tau=3") == {"x": 4, "tau": 3}
    with pytest.raises(Exception):
        cli.parse_qubits(["x4"])


def test_read_config(tmp_path):
    f = tmp_path / "run.cfg"
    f.write_text("eps = 0.1  # comment\nqubits = x=3\nlambda0 = auto\nmethod = upwind\n\n")
    assert cli.read_config(f) == {"eps": 0.1, "qubits": {"x": 3}, "lambda0": "auto", "method": "upwind"}
    f.write_text("colour = red\n")
    with pytest.raises(ValueError):
        cli.read_config(f)


def test_default_config_overrides_and_cap():
    cfg = default_config("scalar-variable", eps=0.1, qubits={"p": 7})
    assert cfg.qubits == {"x": 4, "p": 7} and cfg.eps == 0.1
    with pytest.raises(CapExceededError):
        default_config("scalar-variable", qubits={"x": 14, "p": 9})
    with pytest.raises(ValueError):
        default_config("nope")


def test_cap_exit_code(capsys):
    assert cli.main(["run", "scalar-variable", "--qubits", "x=14", "p=9"]) == 2
    assert "cap" in capsys.readouterr().err


def test_run_writes_deterministic_artifacts(tmp_path, capsys):
    args = ["run", "scalar-const", "--eps", "0.1", "--qubits", "x=3", "--out", str(tmp_path)]
    assert cli.main(args) == 0
    d = tmp_path / "scalar-const_eps0.10000000000000001"
    first = (d / "u.csv").read_bytes()
    man = json.loads((d / "manifest.json").read_text())
    assert man["config"]["qubits"] == {"x": 3}
    assert man["errors"]["u"] < 1e-4
    assert first.splitlines()[0] == b"x,re,im,ref_re,ref_im,abs_err"
    assert len(first.splitlines()) == 9
    assert cli.main(args) == 0
    assert (d / "u.csv").read_bytes() == first


def test_scan_and_report(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv(cli.ENV_OUT, str(tmp_path))
    assert cli.main(["scan", "scalar-const", "--eps-list", "1,0.1", "--qubits", "x=3"]) == 0
    capsys.readouterr()
    assert cli.main(["report"]) == 0
    out = capsys.readouterr().out.strip().splitlines()
    assert out[0].split("\t")[0] == "preset"
    assert len(out) == 3
    rows = cli.summarize(tmp_path)
    assert [r["eps"] for r in rows] == [0.1, 1.0]
    assert rows[0]["uniformity"] >= 1.0


def test_resources_command(capsys):
    assert cli.main(["resources", "--qubits", "x=3", "p=6"]) == 0
    d = json.loads(capsys.readouterr().out)
    assert d["sparsity"] <= d["sparsity_bound"]
    assert d["gates"] == 24.0


def test_module_entry_point():
    import subprocess
    import sys
    r = subprocess.run([sys.executable, "-m", "ngoschrod", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "run" in r.stdout
