"""Acceptance criteria 1-10.

Each test records one line in RESULTS; conftest prints them after the run.
Run this file directly for the same lines without pytest.
"""
import time

import pytest

from pbglab import io
from pbglab.cli import shipped_spec

RESULTS = {}


def _spec(filename, checks=None, **extra):
    raw = dict(io.load_spec(shipped_spec(filename)).raw)
    if checks is not None:
        raw["checks"] = checks
    raw.update(extra)
    return io.parse_spec(raw, filename)


def _run(filename, checks=None, **extra):
    spec = _spec(filename, checks, **extra)
    t0 = time.perf_counter()
    report = io.run_spec(spec)
    return {c["label"]: c for c in report["checks"]}, time.perf_counter() - t0


def _record(n, ok, text):
    RESULTS[n] = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {text}"
    assert ok, RESULTS[n]


def test_c01_algebroid_laws():
    out, dt = _run("su2-connection.json", [{"name": "algebroid-laws", "samples": 50}])
    r = out["algebroid-laws"]["residual"]
    _record(1, r < 1e-5 and dt < 10, f"algebroid laws on 50 sections, residual {r:.2e}, {dt:.1f}s")


def test_c02_isometablic_and_negative_control():
    checks = [{"name": "isometablic", "samples": 500}, {"name": "curvature-equivariance", "samples": 500}]
    good, dt1 = _run("su2-connection.json", checks)
    bad, dt2 = _run("negative-control.json", checks)
    worst = max(c["residual"] for c in good.values())
    control = min(c["residual"] for c in bad.values())
    ok = worst < 1e-5 and control > 1e-2 and dt1 + dt2 < 10
    _record(2, ok, f"Ad example {worst:.2e}, literal control {control:.2e}, {dt1 + dt2:.1f}s")


def test_c03_bianchi():
    out, dt = _run("su2-connection.json", [{"name": "bianchi", "samples": 100}])
    r = out["bianchi"]["residual"]
    _record(3, r < 1e-4 and dt < 30, f"Bianchi on 100 triples, residual {r:.2e}, {dt:.1f}s")


def test_c04_quotient():
    q = [{"name": "quotient-roundtrip", "deltas": ["product", "twisted"]}]
    a, dt1 = _run("quotient.json", q)
    b, dt2 = _run("su2-connection.json", q)
    parts = [c["details"]["residuals"] for c in (a["quotient-roundtrip"], b["quotient-roundtrip"])]
    rt = max(p["roundtrip"] for p in parts)
    ind = max(p["delta-independence"] for p in parts)
    ok = rt < 1e-6 and ind < 1e-6 and dt1 + dt2 < 10
    _record(4, ok, f"round trip {rt:.2e}, delta independence {ind:.2e}, {dt1 + dt2:.1f}s")


def test_c05_transition_pipeline():
    out, dt = _run("transition-pipeline.json")
    mc = out["maurer-cartan"]["residual"]
    db = out["darboux"]["residual"]
    eq = out["transition-equivariance"]["residual"]
    cc = out["cocycle[three-chart]"]
    ok = (mc < 1e-4 and db < 1e-5 and eq < 1e-5 and cc["status"] == "pass" and cc["residual"] < 1e-5
          and dt < 60)
    _record(5, ok, f"Hopf MC {mc:.1e} Darboux {db:.1e} equivariance {eq:.1e}, "
                   f"three-chart cocycle {cc['residual']:.1e}, {dt:.1f}s")


def test_c06_lift_axioms_and_rk4():
    out, dt = _run("su2-connection.json", ["lift-axioms", "rk4-convergence"], steps=1024)
    lift = out["lift-axioms"]
    ratio = min(out["rk4-convergence"]["details"]["ratios"])
    ok = lift["residual"] < 1e-5 and lift["details"]["steps"] == 1024 and ratio >= 8 and dt < 60
    _record(6, ok, f"lift axioms {lift['residual']:.2e} at 1024 steps, RK4 ratio {ratio:.1f}, {dt:.1f}s")


def test_c07_unit_square():
    out, dt = _run("holonomy-square.json")
    c = next(iter(out.values()))
    norm = c["details"]["log_norms"][0]
    along_e1 = abs(c["details"]["logs"][0][0]) > 1 - 1e-6
    ok = abs(norm - 1) < 1e-6 and along_e1 and c["status"] == "pass" and dt < 5
    _record(7, ok, f"|log hol| = {norm:.12f} along E1, {dt:.2f}s")


def test_c08_ambrose_singer():
    out, dt = _run("ambrose-singer-su2.json")
    dims = [(c["details"]["holonomy_dim"], c["details"]["curvature_dim"]) for c in out.values()]
    angle = max(c["details"]["residuals"]["principal-angle"] for c in out.values())
    ok = dims == [(0, 0), (1, 1), (3, 3)] and angle < 1e-3 and dt < 120
    _record(8, ok, f"dimensions {[d[0] for d in dims]} from both methods, angle {angle:.1e}, {dt:.1f}s")


def test_c09_hopf():
    out, dt = _run("hopf.json", ["hopf-fiber-invariance", "su2-so3-homomorphism", "u1-so2-kernel",
                                 "gauge-action-iso"])
    fib = out["hopf-fiber-invariance"]
    ker = out["u1-so2-kernel"]["details"]["kernel"]
    ok = (fib["residual"] < 1e-12 and fib["details"]["samples"] == 1000
          and out["su2-so3-homomorphism"]["residual"] < 1e-10
          and ker == [[-1.0, 0.0], [1.0, 0.0]] and out["u1-so2-kernel"]["status"] == "pass"
          and out["gauge-action-iso"]["residual"] < 1e-10 and dt < 10)
    _record(9, ok, f"fiber {fib['residual']:.1e}, su2->so3 {out['su2-so3-homomorphism']['residual']:.1e}, "
                   f"kernel {{+1, -1}}, gauge iso {out['gauge-action-iso']['residual']:.1e}, {dt:.1f}s")


def test_c10_byte_identical(tmp_path):
    same = True
    for name in ("ambrose-singer-su2.json", "transition-pipeline.json", "negative-control.json"):
        spec = _spec(name)
        texts = [io.canonical_dumps(io.run_spec(spec, threads=t)) for t in (1, 4, None)]
        io.write_report(io.run_spec(spec), tmp_path / "r.json")
        texts.append((tmp_path / "r.json").read_text())
        same = same and len(set(texts)) == 1
    _record(10, same, "reports byte-identical across runs and thread counts")


if __name__ == "__main__":
    import sys
    import tempfile
    from pathlib import Path
    failed = 0
    for name, fn in sorted(globals().items()):
        if name.startswith("test_c"):
            try:
                if "tmp_path" in fn.__code__.co_varnames[: fn.__code__.co_argcount]:
                    with tempfile.TemporaryDirectory() as d:
                        fn(Path(d))
                else:
                    fn()
            except AssertionError:
                failed += 1
            except Exception as exc:
                failed += 1
                n = int(name[6:8])
                RESULTS.setdefault(n, f"criterion {n:>2}: FAIL  {type(exc).__name__}: {exc}")
    for n in sorted(RESULTS):
        print(RESULTS[n])
    sys.exit(1 if failed else 0)
