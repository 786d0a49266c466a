import json
import subprocess
import sys

import pytest

from slopelab import cli


def run_main(args, capsys):
    code = cli.main(args)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_exit_code_triple(capsys):
    code, out, _ = run_main(["axioms", "--modulus", "global", "--trials", "20"], capsys)
    assert code == 0 and json.loads(out)["ok"]
    code, out, _ = run_main(["axioms", "--modulus", "offset", "--trials", "5"], capsys)
    rep = json.loads(out)
    assert code == 1 and rep["result"]["suites"]["offset"]["failures"]["D1"] == 5
    code, _, _ = run_main(["bogus"], capsys)
    assert code == 2


def test_malformed_config_is_usage_error(tmp_path, capsys):
    p = tmp_path / "cfg.json"
    p.write_text("{not json")
    assert run_main(["axioms", "--config", str(p)], capsys)[0] == 2
    p.write_text(json.dumps({"command": "flow"}))
    assert run_main(["axioms", "--config", str(p)], capsys)[0] == 2
    p.write_text(json.dumps({"params": {"nope": 1}}))
    assert run_main(["axioms", "--config", str(p)], capsys)[0] == 2


def test_config_and_flag_override(tmp_path, capsys):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps({"seed": 7, "params": {"modulus": "local", "trials": 30}}))
    code, out, _ = run_main(["axioms", "--config", str(p), "--trials", "10"], capsys)
    cfg = json.loads(out)["config"]
    assert code == 0 and cfg["seed"] == 7 and cfg["params"] == {"modulus": "local", "trials": 10}


@pytest.mark.parametrize("args", [
    ["descend", "--random-points", "7", "--seed", "3"],
    ["sequence", "--name", "block", "--n-max", "20"],
    ["example", "nat", "--n-max", "20"],
    ["example", "average-fail", "--delta", "2"],
    ["flow", "--t-max", "4"],
])
def test_commands_succeed_and_are_deterministic(args, capsys):
    a = run_main(args + ["--threads", "1"], capsys)
    b = run_main(args + ["--threads", "4"], capsys)
    assert a[0] == 0 and a[1] == b[1]
    rep = json.loads(a[1])
    assert rep["schema"] == "slopelab/1" and len(rep["input_sha256"]) == 64
    assert "threads" not in rep["config"] and "output" not in rep["config"]


def test_thread_env_does_not_change_output(monkeypatch, capsys):
    args = ["axioms", "--modulus", "all", "--trials", "20"]
    a = run_main(args, capsys)[1]
    monkeypatch.setenv("SLOPELAB_THREADS", "4")
    assert run_main(args, capsys)[1] == a


def test_csv_output(tmp_path, capsys):
    out = tmp_path / "trace.csv"
    code, _, _ = run_main(["descend", "--random-points", "5", "--format", "csv", "-o", str(out)], capsys)
    lines = out.read_text().splitlines()
    assert code == 0 and lines[0] == "x,g,f,delta,Tg,step,running_sum" and len(lines) >= 2
    assert run_main(["oracle", "--format", "csv", "--spaces", "1"], capsys)[0] == 2


def test_modulus_from_input(tmp_path, capsys):
    doc = {"space": {"kind": "finite", "distances": [[0, 1], [1, 0]]}, "values": [0, "inf"]}
    p = tmp_path / "in.json"
    p.write_text(json.dumps(doc))
    code, out, _ = run_main(["modulus", "--input", str(p)], capsys)
    res = json.loads(out)["result"]
    assert code == 0 and res["profile"]["values"] == [0.0, "inf"] and res["critical_set"] == [0]


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "slopelab", "example", "xsq-over-y"], capture_output=True, text=True)
    assert r.returncode == 0 and json.loads(r.stdout)["result"]["report"]["ratio"] > 2
