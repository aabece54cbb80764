import csv
import io
import json
import subprocess
import sys

import pytest

from qkdcircuit import __version__
from qkdcircuit.cli import main, run


def run_json(*argv):
    code, text, _ = run(list(argv))
    assert code in (0, 1), text
    return code, json.loads(text)


def test_rate_examples():
    code, out = run_json("rate", "--protocol", "bb84", "--e", "0", "--q", "0")
    assert code == 0 and out["result"]["rate"] == 1.0
    _, out = run_json("rate", "--protocol", "bb84", "--e", "0.11", "--q", "0")
    assert abs(out["result"]["rate"]) < 1e-3
    _, out = run_json("rate", "--protocol", "sixstate", "--e", "0.12", "--q", "0.49999")
    assert out["result"]["rate"] > 0


def test_rate_raw_display():
    _, out = run_json("rate", "--protocol", "case_i", "--e", "0", "--n", "8", "--s", "2")
    assert out["result"]["raw_rate"] == pytest.approx(8.0)


@pytest.mark.parametrize("argv", [
    ["rate", "--e", "0.7"],
    ["rate", "--protocol", "nope"],
    ["rate", "--bogus"],
    ["verify", "--n", "8", "--s", "3"],
    ["pgm-exp", "--N", "20"],
])
def test_usage_errors_exit_2(argv, capsys):
    assert main(argv) == 2


def test_header_embeds_seed_version_params():
    _, out = run_json("rate", "--e", "0.05", "--seed", "17")
    hdr = out["header"]
    assert hdr["tool"] == "qkdcircuit" and hdr["version"] == __version__
    assert hdr["seed"] == 17 and hdr["command"] == "rate"
    assert hdr["params"]["e"] == 0.05


@pytest.mark.parametrize("protocol, q, target", [("bb84", None, 0.124), ("sixstate", None, 0.141), ("bb84", "0", 0.110)])
def test_threshold(protocol, q, target):
    argv = ["threshold", protocol] + (["--q", q] if q else [])
    _, out = run_json(*argv)
    assert abs(out["result"]["threshold"] - target) <= 0.0005


def test_simulate_agrees():
    code, out = run_json("simulate", "--n", "4", "--s", "2", "--m", "1", "--trials", "5", "--seed", "3")
    assert code == 0 and out["result"]["mismatches"] == 0


def test_verify_pass_and_trivial():
    code, out = run_json("verify", "--n", "3", "--s", "1", "--m", "1", "--trials", "3", "--seed", "2")
    assert code == 0 and out["result"]["max_tv"] <= 1e-9
    code, _ = run_json("verify", "--n", "2", "--s", "0", "--m", "0")
    assert code == 0


def test_verify_negative_control():
    # a constant key flip can land in the kernel of the compression map, so use several configs
    argv = ["verify", "--n", "3", "--s", "2", "--m", "1", "--configs", "3", "--trials", "3", "--mismatch-flip-rule"]
    code, out = run_json(*argv)
    assert code == 1 and out["result"]["max_tv"] > 1e-3


def test_pgm_exp_point():
    code, out = run_json("pgm-exp", "--N", "6", "--q", "0.25", "--e", "0.1", "--m", "2")
    r = out["result"]
    assert code == 0
    assert {"success", "bound", "vacuous", "passed", "bound_printed_sign"} <= set(r)
    assert 0 <= r["success"] <= 1


def test_pgm_exp_orthogonal_pair():
    _, out = run_json("pgm-exp", "--N", "4", "--q", "0.5", "--candidates", "pair", "--omega", "1")
    assert out["result"]["success"] == pytest.approx(1.0, abs=1e-12)


def test_pgm_exp_sweep_csv():
    code, text, _ = run(["pgm-exp", "--sweep", "--N-values", "4,6", "--m-values", "0,1,2"])
    assert code == 0
    lines = text.splitlines()
    meta = [l for l in lines if l.startswith("#")]
    assert any(l.startswith("# seed:") for l in meta)
    rows = list(csv.DictReader(io.StringIO("\n".join(l for l in lines if not l.startswith("#")))))
    assert len(rows) == 6
    assert {"N", "m", "success", "bound", "vacuous"} <= set(rows[0])


def test_rate_sweep_csv_columns():
    code, text, _ = run(["rate", "--sweep", "--protocol", "bb84", "--e-values", "0,0.1", "--q-values", "0,0.5"])
    body = "\n".join(l for l in text.splitlines() if not l.startswith("#"))
    rows = list(csv.DictReader(io.StringIO(body)))
    assert code == 0 and len(rows) == 4
    assert list(rows[0]) == ["protocol", "e", "q", "rate"]


def test_diagnose():
    code, out = run_json("diagnose", "--N", "6")
    assert code == 0 and out["result"]["passed"]
    assert out["result"]["typical_tail_mass"] <= out["result"]["typical_tail_bound"]


@pytest.mark.parametrize("argv", [
    ["verify", "--n", "3", "--s", "1", "--trials", "2", "--seed", "9"],
    ["pgm-exp", "--mode", "monte_carlo", "--samples", "500", "--seed", "5"],
    ["simulate", "--seed", "4"],
])
def test_determinism(argv):
    assert run(argv)[1] == run(argv)[1]


def test_config_file(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"protocol": "bb84", "e": 0.05, "q": 0.25}))
    _, out = run_json("rate", "--config", str(cfg))
    assert out["header"]["params"]["q"] == 0.25
    _, out2 = run_json("rate", "--config", str(cfg), "--q", "0")
    assert out2["header"]["params"]["q"] == 0.0
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"frobnicate": 1}))
    assert run(["rate", "--config", str(bad)])[0] == 2
    assert run(["rate", "--config", str(tmp_path / "missing.json")])[0] == 2


def test_output_path(tmp_path):
    target = tmp_path / "out.json"
    assert main(["rate", "--e", "0.02", "--output", str(target)]) == 0
    assert json.loads(target.read_text())["result"]["e"] == 0.02


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "qkdcircuit.cli", "rate", "--e", "0"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["result"]["rate"] == 1.0
