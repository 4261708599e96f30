import json

import pytest

from pbglab.cli import main, shipped_spec


@pytest.fixture
def work(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


def _write(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


def test_verify_pass_and_report(work, capsys):
    assert main(["verify", "--input", str(shipped_spec("minimal.json"))]) == 0
    assert (work / "minimal-report.json").exists()
    assert "PASS" in capsys.readouterr().out


def test_verify_failure_exit_1(work, capsys):
    code = main(["verify", "--input", str(shipped_spec("negative-control.json")), "--report", "neg.json"])
    assert code == 1
    assert "failing checks: isometablic" in capsys.readouterr().out


def test_tol_override_flips_result(work):
    args = ["verify", "--input", str(shipped_spec("negative-control.json")),
            "--tol", "isometablic=100", "--tol", "curvature-equivariance=100"]
    assert main(args) == 0


@pytest.mark.parametrize("argv", [
    ["verify", "--input", "missing.json"],
    ["verify", "--input", "bad.json"],
    ["verify", "--input", "unknown.json"],
    ["verify", "--input", "minimal.json", "--tol", "nope=1"],
    ["verify", "--input", "minimal.json", "--tol", "isometablic=-1"],
    ["verify", "--input", "minimal.json", "--seed", "-3"],
    ["holonomy", "--input", "minimal.json", "--loop", "{}", "--steps", "0"],
    ["holonomy", "--input", "minimal.json", "--loop", '{"kind": "star"}'],
    ["holonomy", "--input", "minimal.json", "--loop", "[1"],
    ["example", "nope"],
    ["frobnicate"],
])
def test_bad_input_exit_2(work, argv):
    (work / "bad.json").write_text("{oops")
    raw = json.loads(shipped_spec("minimal.json").read_text())
    _write(work / "minimal.json", raw)
    _write(work / "unknown.json", {**raw, "checks": ["mystery"]})
    assert main(argv) == 2


def test_holonomy_unit_square(work, capsys):
    loop = '{"kind": "rectangle", "corner": [0, 0], "plane": [0, 1], "sides": [1, 1]}'
    code = main(["holonomy", "--input", str(shipped_spec("holonomy-square.json")), "--loop", loop])
    out = capsys.readouterr().out
    assert code == 0
    assert "log coordinates: [-1.000000000000, +0.000000000000, +0.000000000000]" in out
    assert "log norm: 1.000000000000" in out


def test_example_dimension_report(work, capsys):
    assert main(["example", "ambrose-singer-su2", "--report", "as.json"]) == 0
    out = capsys.readouterr().out
    assert out.count("dimension report") == 3
    assert "holonomy 3 = curvature 3" in out


def test_list_checks(capsys):
    assert main(["list-checks"]) == 0
    out = capsys.readouterr().out
    assert "algebroid-laws" in out and "ambrose-singer" in out


def test_module_entry_point(work):
    import subprocess
    import sys
    r = subprocess.run([sys.executable, "-m", "pbglab", "list-checks"], capture_output=True, text=True)
    assert r.returncode == 0 and "bianchi" in r.stdout
