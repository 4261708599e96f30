import copy
import json

import pytest

from pbglab import io
from pbglab.cli import shipped_spec


def _minimal():
    return json.loads(shipped_spec("minimal.json").read_text())


def test_minimal_loads():
    spec = io.load_spec(shipped_spec("minimal.json"))
    assert spec.name == "minimal" and len(spec.checks) == 1
    assert spec.checks[0].label == "isometablic"


def test_hopf_spec_lists_nine_checks():
    spec = io.load_spec(shipped_spec("hopf.json"))
    assert len(spec.checks) == 9


def test_unknown_check_pointer():
    raw = _minimal()
    raw["checks"] = ["no-such-check"]
    with pytest.raises(io.ValidationError) as e:
        io.parse_spec(raw)
    assert e.value.path == "/checks/0" and "unknown check" in e.value.reason


@pytest.mark.parametrize("mutate,pointer", [
    (lambda r: r.pop("group"), "/"),
    (lambda r: r.update(extra=1), "/"),
    (lambda r: r.update(seed=-1), "/seed"),
    (lambda r: r["connections"].update(bad={"omega": "x"}), "/connections/bad"),
])
def test_validation_pointers(mutate, pointer):
    raw = _minimal()
    mutate(raw)
    with pytest.raises(io.ValidationError) as e:
        io.parse_spec(raw)
    assert e.value.path.startswith(pointer)


def test_empty_check_list():
    raw = _minimal()
    raw["checks"] = []
    report = io.run_spec(io.parse_spec(raw))
    assert report["checks"] == [] and report["passed"]
    assert '"checks": []' in io.canonical_dumps(report)


def test_reports_are_byte_identical(tmp_path):
    spec = io.load_spec(shipped_spec("su2-connection.json"))
    spec = io.parse_spec({**spec.raw, "checks": ["isometablic", "bianchi", "algebroid-laws"]})
    a = io.canonical_dumps(io.run_spec(spec, threads=1))
    b = io.canonical_dumps(io.run_spec(spec, threads=4))
    assert a == b
    io.write_report(io.run_spec(spec), tmp_path / "r.json")
    again = io.canonical_dumps(io.read_report(tmp_path / "r.json"))
    assert again == a


def test_failing_check_is_recorded():
    report = io.run_spec(io.load_spec(shipped_spec("negative-control.json")))
    assert not report["passed"]
    assert all(c["status"] == "fail" and c["pass"] is False for c in report["checks"])
    assert report["summary"]["fail"] == len(report["checks"])


def test_expected_failure_counts_as_pass():
    raw = json.loads(shipped_spec("negative-control.json").read_text())
    raw["checks"] = [{"name": "isometablic", "expect": "fail"}]
    report = io.run_spec(io.parse_spec(raw))
    assert report["passed"] and report["checks"][0]["expect"] == "fail"


def test_hash_ignores_whitespace_and_order():
    raw = _minimal()
    shuffled = json.loads(json.dumps(dict(reversed(list(raw.items()))), indent=7))
    assert io.spec_hash(raw) == io.spec_hash(shuffled)
    other = copy.deepcopy(raw)
    other["seed"] = 1
    assert io.spec_hash(other) != io.spec_hash(raw)


def test_canonical_floats():
    text = io.canonical_dumps({"b": [1.0, float("nan")], "a": float("inf")})
    assert text == '{\n "a": "inf",\n "b": [1.000000000000e+00, "nan"]\n}\n'


def test_parse_errors(tmp_path):
    with pytest.raises(io.ParseError):
        io.load_spec(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(io.ParseError):
        io.load_spec(bad)


def test_report_header():
    report = io.run_spec(io.load_spec(shipped_spec("minimal.json")))
    assert report["pbglab_report"] == io.REPORT_VERSION
    assert report["conventions"] == io.CONVENTIONS
    assert report["checks"][0]["residual"] == 0.0
