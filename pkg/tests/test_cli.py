import csv
import json
import subprocess
import sys

import pytest

from agingbench.cli import main
from agingbench.netsim import fixture_path


def test_gen_deterministic(tmp_path):
    a, b = tmp_path / "a.trace", tmp_path / "b.trace"
    for p in (a, b):
        assert main(["gen", "--profile", "int-only", "--len", "1e4", "--seed", "7", "--out", str(p)]) == 0
    assert a.read_bytes() == b.read_bytes()
    lines = a.read_text().splitlines()
    assert lines[0] == "#agingtrace v1" and len(lines) == 10_001


def test_gen_bad_profile(tmp_path):
    assert main(["gen", "--profile", "quantum", "--len", "10", "--out", str(tmp_path / "x")]) == 1


def test_run_missing_config(tmp_path):
    assert main(["run", "--config", str(tmp_path / "missing.json")]) == 1


def test_run_and_compare(tmp_path):
    base = {"trace": {"profile": "IntOnly", "length": 2000, "seed": 3}}
    mit = dict(base, mitigation={"rotation": True, "rotation_period": 100})
    for name, cfg in (("a", base), ("b", mit)):
        (tmp_path / f"{name}.json").write_text(json.dumps(cfg))
        assert main(["run", "--config", str(tmp_path / f"{name}.json"),
                     "--out", str(tmp_path / f"{name}.report.json")]) == 0
    out = tmp_path / "cmp.json"
    assert main(["compare", str(tmp_path / "a.report.json"), str(tmp_path / "b.report.json"),
                 "--out", str(out)]) == 0
    assert json.loads(out.read_text())["total_cycles"]["delta_pct"] == 0.0


def test_compare_mismatch(tmp_path):
    for name, seed in (("a", 1), ("b", 2)):
        (tmp_path / f"{name}.json").write_text(json.dumps({"trace": {"profile": "IntOnly", "length": 300, "seed": seed}}))
        assert main(["run", "--config", str(tmp_path / f"{name}.json"), "--out", str(tmp_path / f"{name}.r")]) == 0
    assert main(["compare", str(tmp_path / "a.r"), str(tmp_path / "b.r")]) == 1


def test_run_seed_override(tmp_path):
    (tmp_path / "c.json").write_text(json.dumps({"trace": {"profile": "IntOnly", "length": 300}}))
    for s in ("1", "2"):
        assert main(["run", "--config", str(tmp_path / "c.json"), "--seed", s, "--out", str(tmp_path / f"{s}.r")]) == 0
    r1, r2 = (json.loads((tmp_path / f"{s}.r").read_text()) for s in "12")
    assert r1["config"]["seed"] == 1 and r2["config"]["seed"] == 2
    assert r1["trace_id"] != r2["trace_id"]


def test_run_bad_trace_file(tmp_path):
    (tmp_path / "t.trace").write_text("#agingtrace v1\n{\"seq\":0,\"cycle\":0,\"kind\":\"Load\"}\n")
    (tmp_path / "c.json").write_text(json.dumps({"trace": {"file": "t.trace"}}))
    assert main(["run", "--config", str(tmp_path / "c.json"), "--out", str(tmp_path / "r.json")]) == 2


def test_netsim_and(tmp_path):
    assert main(["netsim", "--blif", str(fixture_path("and2.blif")), "--source", "exhaustive",
                 "--out", str(tmp_path)]) == 0
    rows = {r["net"]: r for r in csv.DictReader(open(tmp_path / "nets.csv"))}
    assert float(rows["y"]["prob"]) == 0.25
    assert (tmp_path / "histogram.csv").exists()


def test_netsim_bad_netlist(tmp_path):
    bad = tmp_path / "bad.blif"
    bad.write_text(".inputs a\n.outputs y\n.names a y y\n11 1\n")
    assert main(["netsim", "--blif", str(bad), "--out", str(tmp_path)]) == 2
    assert main(["netsim", "--blif", str(tmp_path / "none.blif"), "--out", str(tmp_path)]) == 2


def test_netsim_unknown_forced_net(tmp_path):
    assert main(["netsim", "--blif", str(fixture_path("and2.blif")), "--force", "zz",
                 "--vectors", "10", "--out", str(tmp_path)]) == 1


def test_usage_error():
    with pytest.raises(SystemExit):
        main(["frobnicate"])


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "agingbench.cli", "gen", "--profile", "fp-mixed",
                           "--len", "5"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.splitlines()[0] == "#agingtrace v1"
