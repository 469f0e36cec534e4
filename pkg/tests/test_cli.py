import json
import subprocess
import sys

import pytest

from cmskit.cli import main

BROKEN = """system broken
dim 1
metric l1
vertices 1
vertexset 1 = abs(x) >= 0
representative 1 = (0)
edge a : 1 -> 1 map ((1/2)*x) prob 1/2 + (1/4)*sin(x)^2
edge b : 1 -> 1 map ((1/3)*x) prob 1/2
delta 1/4
"""


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_rate_example(capsys):
    code, out, _ = run(["rate", "--builtin", "example_r2", "--budget", "20000", "--seed", "7"], capsys)
    d = json.loads(out)
    assert code == 0
    assert d["max_ratio"] <= 209 / 210 + 1e-9
    assert d["provenance"] == {"op": "rate", "system": "builtin:example_r2", "seed": 7, "version": d["provenance"]["version"]}


def test_identical_argv_identical_bytes(capsys):
    argv = ["entropy", "--builtin", "gmarkov:0.7,0.3,0.4,0.6", "--n", "3000", "--seed", "1"]
    _, a, _ = run(argv, capsys)
    _, b, _ = run(argv, capsys)
    assert a == b
    _, c, _ = run(argv + ["--trajectories", "3", "--jobs", "1"], capsys)
    _, d, _ = run(argv + ["--trajectories", "3", "--jobs", "3"], capsys)
    assert c == d


def test_bits_flag(capsys):
    base = ["entropy", "--builtin", "example_r1", "--start", "0", "--n", "500"]
    _, nats, _ = run(base, capsys)
    _, bits, _ = run(base + ["--bits"], capsys)
    a, b = json.loads(nats)["integral"]["value"], json.loads(bits)["integral"]["value"]
    assert b == pytest.approx(a / 0.6931471805599453)


def test_validate_broken_exits_1(tmp_path, capsys):
    f = tmp_path / "broken.cms"
    f.write_text(BROKEN)
    code, out, _ = run(["validate", "--system", str(f), "--budget", "500"], capsys)
    assert code == 1
    assert json.loads(out)["passed"] is False


def test_usage_errors_exit_2(capsys):
    assert run(["rate"], capsys)[0] == 2
    assert run(["nonsense"], capsys)[0] == 2
    code, _, err = run(["rate", "--builtin", "nope"], capsys)
    assert code == 2 and "error" in err
    assert run(["ergodic", "--builtin", "example_r2"], capsys)[0] == 2
    assert run(["simulate", "--builtin", "example_r2", "--start", "1,2,3"], capsys)[0] == 2


def test_missing_file_exit_2(tmp_path, capsys):
    assert run(["validate", "--system", str(tmp_path / "none.cms")], capsys)[0] == 2


def test_out_writes_manifest(tmp_path, capsys):
    out = tmp_path / "sim.json"
    code, stdout, _ = run(["simulate", "--builtin", "example_r2", "--n", "20", "--seed", "3",
                           "--out", str(out)], capsys)
    assert code == 0 and stdout == ""
    payload = json.loads(out.read_text())
    man = json.loads((tmp_path / "sim.json.manifest.json").read_text())
    assert man["seed"] == 3 and man["system"] == "builtin:example_r2"
    assert man["argv"][:2] == ["cmskit", "simulate"]
    assert "wall_time_s" in man and "wall_time_s" not in payload
    assert payload["provenance"]["seed"] == 3


def test_csv_rows_carry_seed(capsys):
    code, out, _ = run(["simulate", "--builtin", "example_r2", "--n", "5", "--seed", "4",
                        "--stream", "2", "--format", "csv"], capsys)
    lines = out.strip().splitlines()
    assert code == 0 and lines[0].startswith("seed,stream,step,edge")
    assert len(lines) == 7
    assert all(l.startswith("4,2,") for l in lines[1:])


@pytest.mark.parametrize("argv", [
    ["graph-check", "--builtin", "gmarkov:0.7,0.3,0.4,0.6"],
    ["validate", "--builtin", "example_r1", "--budget", "300"],
    ["moduli", "--jo", "0.5,0.36787944117144233", "--n", "1000"],
    ["moduli", "--builtin", "example_r2", "--edge", "e1", "--n", "8", "--budget", "2000"],
    ["ergodic", "--builtin", "example_r2", "--f", "min(norm1(x, y), 10)", "--n", "500"],
    ["measure", "--builtin", "example_r2", "--n", "2000"],
    ["cylinder", "--builtin", "example_r2", "--word", "e1,e3", "--markov", "--n", "500"],
    ["code", "--builtin", "example_r2", "--depths", "5,50", "--words", "50"],
    ["code", "--builtin", "gmarkov:0.7,0.3,0.4,0.6", "--word", "11,12"],
    ["martingale", "--builtin", "example_r2", "--x", "0,1", "--y", "1,2", "--n", "3",
     "--budget", "500", "--imax", "8"],
])
def test_subcommands_succeed(argv, capsys):
    code, out, err = run(argv, capsys)
    assert code == 0, err
    assert json.loads(out)["provenance"]["op"] == argv[0]


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "cmskit", "graph-check", "--builtin", "example_r1",
                        "--format", "csv"], capture_output=True, text=True)
    assert r.returncode == 0
    assert r.stdout.splitlines()[0] == "edge,source,target"
