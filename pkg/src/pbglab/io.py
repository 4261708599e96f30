"""Experiment files in, verification reports out.

An experiment file is JSON with ``"pbglab_spec": 1`` and blocks for the
group, bundle, action, connections, transition data, loops and the list of
checks to run.  Reports are canonical JSON: sorted keys and every float
written as ``%.12e`` so that equal inputs give byte-identical files.
"""
from __future__ import annotations

import hashlib
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Union

import jsonschema
import numpy as np

from . import checks as ck
from . import holonomy as hol
from . import transition as tr
from .result import CheckResult

SPEC_VERSION = 1
REPORT_VERSION = 1

CONVENTIONS = {
    "ode": hol.ODE_CONVENTION,
    "maurer_cartan": "d chi - [chi, chi] = 0" if tr.MC_SIGN < 0 else "d chi + [chi, chi] = 0",
    "darboux_side": tr.DARBOUX_SIDE,
    "cocycle": tr.COCYCLE_FORM,
    "curvature": "Omega(X, Y) = gamma[X, Y] - [gamma X, gamma Y] = -(d omega + [omega, omega])",
    "right_action": "(x, g) . k = (x, g k); h . g = rho(g^-1) h",
}


class IoError(OSError):
    pass


class ParseError(ValueError):
    def __init__(self, path: str, reason: str):
        super().__init__(f"{path}: {reason}")
        self.path = path
        self.reason = reason


class ValidationError(ValueError):
    """Raised with a JSON pointer into the offending document."""

    def __init__(self, path: str, reason: str):
        super().__init__(f"{path}: {reason}")
        self.path = path
        self.reason = reason


# ---------------------------------------------------------------- schema

_TABLE = {"type": "array", "items": {"type": "array", "items": {"type": ["string", "number"]}}}
_GROUP = {"oneOf": [
    {"type": "string"},
    {"type": "object", "required": ["builtin"], "properties": {"builtin": {"type": "string"}}},
    {"type": "object", "required": ["name", "basis"],
     "properties": {"name": {"type": "string"}, "basis": {"type": "array"},
                    "family": {"type": "string"}, "special": {"type": "boolean"}}},
]}
_CHECK_NAMES = sorted(ck.REGISTRY)

SCHEMA = {
    "type": "object",
    "required": ["pbglab_spec", "checks"],
    "additionalProperties": False,
    "properties": {
        "pbglab_spec": {"const": SPEC_VERSION},
        "name": {"type": "string"},
        "description": {"type": "string"},
        "group": _GROUP,
        "fiber": _GROUP,
        "bundle": {"type": "object", "oneOf": [
            {"required": ["kind"], "properties": {"kind": {"const": "hopf"}}},
            {"required": ["base_dim", "charts"],
             "properties": {"kind": {"const": "charts"}, "base_dim": {"type": "integer", "minimum": 1},
                            "charts": {"type": "array", "minItems": 1}, "overlaps": {"type": "array"}}},
        ]},
        "action": {"oneOf": [
            {"enum": ["Ad", "trivial"]},
            {"type": "object", "required": ["embed"], "properties": {"embed": {"type": "string"}}},
            {"type": "object", "required": ["matrix"], "properties": {"matrix": _TABLE}},
        ]},
        "connections": {"type": "object", "minProperties": 1, "additionalProperties": {
            "type": "object", "additionalProperties": False,
            "properties": {"omega": _TABLE, "flat": {"type": "boolean"},
                           "extension": {"enum": ["literal", "equivariant"]},
                           "chart": {"type": ["string", "integer"]}, "description": {"type": "string"}},
            "anyOf": [{"required": ["omega"]}, {"required": ["flat"]}]}},
        "transition": {"type": "object", "oneOf": [
            {"required": ["builder"], "properties": {"builder": {"enum": sorted(tr.BUILDERS)}}},
            {"required": ["pairs"], "properties": {"pairs": {"type": "array"}}},
        ]},
        "loops": {"type": "array", "items": {"type": "object", "required": ["kind"],
                                              "properties": {"kind": {"enum": ["rectangle", "param"]}}}},
        "checks": {"type": "array", "items": {"oneOf": [
            {"type": "string", "enum": _CHECK_NAMES},
            {"type": "object", "required": ["name"],
             "properties": {"name": {"type": "string", "enum": _CHECK_NAMES},
                            "tol": {"type": "number", "exclusiveMinimum": 0},
                            "samples": {"type": "integer", "minimum": 1},
                            "steps": {"type": "integer", "minimum": 1},
                            "expect": {"enum": ["pass", "fail"]}}},
        ]}},
        "tolerances": {"type": "object", "additionalProperties": {"type": "number", "exclusiveMinimum": 0}},
        "seed": {"type": "integer", "minimum": 0},
        "samples": {"type": "integer", "minimum": 1},
        "steps": {"type": "integer", "minimum": 1},
    },
}
_VALIDATOR = jsonschema.Draft202012Validator(SCHEMA)


def _pointer(parts) -> str:
    return "/" + "/".join(str(p) for p in parts) if parts else "/"


# ---------------------------------------------------------------- spec

@dataclass
class CheckRequest:
    name: str
    params: Dict[str, object]
    tolerance: float
    expect_failure: bool = False
    label: str = ""


@dataclass
class ExperimentSpec:
    raw: dict
    checks: List[CheckRequest]
    seed: int = 0
    source: str = ""
    _context: Optional[ck.Context] = field(default=None, repr=False)

    @property
    def name(self) -> str:
        return self.raw.get("name", Path(self.source).stem if self.source else "spec")

    @property
    def hash(self) -> str:
        return spec_hash(self.raw)

    def context(self) -> ck.Context:
        if self._context is None:
            self._context = ck.Context(self.raw)
        return self._context


def spec_hash(raw: dict) -> str:
    """sha256 of the whitespace-free, key-sorted serialization."""
    text = json.dumps(raw, sort_keys=True, separators=(",", ":"), ensure_ascii=True)
    return hashlib.sha256(text.encode()).hexdigest()


def parse_spec(raw, source: str = "") -> ExperimentSpec:
    """Validate a decoded document and resolve defaults."""
    if not isinstance(raw, dict):
        raise ValidationError("/", "top level must be an object")
    # the shallowest error names the offending item (oneOf failures nest below it)
    errors = sorted(_VALIDATOR.iter_errors(raw),
                    key=lambda e: (len(e.absolute_path), list(map(str, e.absolute_path))))
    if errors:
        e = errors[0]
        path = list(e.absolute_path)
        if len(path) == 2 and path[0] == "checks":
            entry = raw["checks"][path[1]]
            name = entry if isinstance(entry, str) else entry.get("name") if isinstance(entry, dict) else None
            if isinstance(name, str) and name not in ck.REGISTRY:
                raise ValidationError(_pointer(path), f"unknown check {name!r}")
        raise ValidationError(_pointer(path), e.message)
    tolerances = raw.get("tolerances", {})
    for key in tolerances:
        if key not in ck.REGISTRY:
            raise ValidationError(f"/tolerances/{key}", f"unknown check {key!r}")
    conn_names = list(raw.get("connections", {}))
    requests = []
    for i, entry in enumerate(raw["checks"]):
        params = {"name": entry} if isinstance(entry, str) else dict(entry)
        name = params.pop("name")
        where = f"/checks/{i}"
        reason = ck.requirements_met(raw, name, params)
        if reason:
            raise ValidationError(where, f"{name} {reason}")
        allowed = set(ck.REGISTRY[name].params) | {"tol", "expect", "samples"}
        for key in params:
            if key not in allowed:
                raise ValidationError(f"{where}/{key}", f"{name} takes no parameter {key!r}")
        if "connection" in params and params["connection"] not in conn_names:
            raise ValidationError(f"{where}/connection", f"unknown connection {params['connection']!r}")
        for d in params.get("deltas", []):
            if d not in ("product", "twisted") and d not in conn_names:
                raise ValidationError(f"{where}/deltas", f"unknown principal connection {d!r}")
        if "builder" in params and params["builder"] not in tr.BUILDERS:
            raise ValidationError(f"{where}/builder", f"unknown transition builder {params['builder']!r}")
        if "samples" not in params and "samples" in raw and "samples" in ck.REGISTRY[name].params:
            params["samples"] = raw["samples"]
        tol = float(params.pop("tol", tolerances.get(name, ck.REGISTRY[name].tolerance)))
        expect = params.pop("expect", "pass")
        label = name if "connection" not in params else f"{name}[{params['connection']}]"
        if "builder" in params:
            label = f"{name}[{params['builder']}]"
        requests.append(CheckRequest(name, params, tol, expect == "fail", label))
    for i, c in enumerate(raw.get("connections", {}).values()):
        ref = c.get("chart")
        if ref is not None and "bundle" in raw and raw["bundle"].get("kind") != "hopf":
            names = [ch.get("name") for ch in raw["bundle"]["charts"]]
            if not (isinstance(ref, int) and 0 <= ref < len(names)) and ref not in names:
                raise ValidationError(f"/connections/{conn_names[i]}/chart", f"unknown chart {ref!r}")
    if conn_names and "bundle" not in raw:
        raise ValidationError("/connections", "connections need a bundle block")
    if ("bundle" in raw or "action" in raw) and "group" not in raw:
        raise ValidationError("/group", "a bundle or action needs a group block")
    spec = ExperimentSpec(raw, requests, int(raw.get("seed", 0)), source)
    try:
        spec.context()
    except (ValueError, KeyError) as exc:
        raise ValidationError("/", f"could not build the experiment: {exc}") from exc
    return spec


def load_spec(path: Union[str, os.PathLike]) -> ExperimentSpec:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(str(path), f"cannot read file: {exc.strerror or exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(str(path), f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return parse_spec(raw, str(path))


# ---------------------------------------------------------------- running

def _threads() -> int:
    raw = os.environ.get("PBGLAB_THREADS", "0")
    try:
        n = int(raw)
    except ValueError:
        n = 0
    return n if n > 0 else (os.cpu_count() or 1)


def run_check(spec: ExperimentSpec, index: int, timings: bool = False) -> dict:
    req = spec.checks[index]
    entry = ck.REGISTRY[req.name]
    seed = ck.check_seed(spec.seed, req.label, index)
    start = time.perf_counter()
    try:
        result = entry.run(spec.context(), req.params, seed, req.tolerance)
    except Exception as exc:  # a crashing check is a failing check, not a crashed run
        result = CheckResult(req.name, float("nan"), req.tolerance, entry.identity,
                             {"error": f"{type(exc).__name__}: {exc}"})
    elapsed = time.perf_counter() - start
    result.expect_failure = req.expect_failure
    out = {
        "name": req.name,
        "label": req.label,
        "identity": result.identity or entry.identity,
        "residual": result.residual,
        "tolerance": req.tolerance,
        "status": result.status,
        "pass": result.passed,
        "expect": "fail" if req.expect_failure else "pass",
        "details": result.details,
    }
    if result.skipped:
        out["note"] = result.note
    if timings:
        out["wall_time"] = elapsed
    return out


def _prepare(spec: ExperimentSpec) -> None:
    """Build every shared object up front so worker threads only read the cache."""
    ctx = spec.context()
    for req in spec.checks:
        if "connection" in req.params or "connections" in ck.REGISTRY[req.name].needs:
            ctx.connection(req.params.get("connection"))
        if req.name in ck.TRANSITION_CHECKS:
            ctx.transition(req.params.get("builder"))
        if req.name == "quotient-roundtrip":
            for d in req.params.get("deltas", ["product", "twisted"]):
                ctx.delta(d)
        if "action" in ck.REGISTRY[req.name].needs and ctx.bundle is not None:
            ctx.groupoid()
            ctx.algebroid(req.params.get("chart"))


def run_spec(spec: ExperimentSpec, timings: bool = False, threads: Optional[int] = None) -> dict:
    """Run all requested checks and assemble the report in list order."""
    _prepare(spec)
    n = threads if threads is not None else _threads()
    idx = range(len(spec.checks))
    if n <= 1 or len(spec.checks) <= 1:
        results = [run_check(spec, i, timings) for i in idx]
    else:
        with ThreadPoolExecutor(max_workers=n) as pool:
            results = list(pool.map(lambda i: run_check(spec, i, timings), idx))
    counts = {"pass": 0, "fail": 0, "skipped": 0}
    for r in results:
        counts[r["status"]] += 1
    return {
        "pbglab_report": REPORT_VERSION,
        "spec": spec.name,
        "spec_hash": spec.hash,
        "seed": spec.seed,
        "conventions": CONVENTIONS,
        "checks": results,
        "summary": counts,
        "passed": counts["fail"] == 0,
    }


# ---------------------------------------------------------------- canonical JSON

def _plain(obj):
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def _float(x: float) -> str:
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    return "%.12e" % x


def canonical_dumps(obj, indent: int = 1) -> str:
    """Sorted keys, fixed float format, stable indentation."""
    def enc(o, depth):
        pad = "\n" + " " * (indent * (depth + 1))
        end = "\n" + " " * (indent * depth)
        if o is None:
            return "null"
        if isinstance(o, bool):
            return "true" if o else "false"
        if isinstance(o, int):
            return str(o)
        if isinstance(o, float):
            return _float(o)
        if isinstance(o, str):
            return json.dumps(o, ensure_ascii=True)
        if isinstance(o, list):
            if not o:
                return "[]"
            if all(isinstance(v, (int, float)) and not isinstance(v, bool) or v is None for v in o):
                return "[" + ", ".join(enc(v, depth + 1) for v in o) + "]"
            return "[" + ",".join(pad + enc(v, depth + 1) for v in o) + end + "]"
        if isinstance(o, dict):
            if not o:
                return "{}"
            items = sorted(o.items())
            return "{" + ",".join(pad + json.dumps(k) + ": " + enc(v, depth + 1) for k, v in items) + end + "}"
        raise TypeError(f"cannot serialise {type(o).__name__}")
    return enc(_plain(obj), 0) + "\n"


def write_report(report: dict, path: Union[str, os.PathLike]) -> None:
    text = canonical_dumps(report)
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise IoError(f"cannot write report to {path}: {exc.strerror or exc}") from exc


def read_report(path: Union[str, os.PathLike]) -> dict:
    return json.loads(Path(path).read_text())


def summary_lines(report: dict) -> List[str]:
    """Human-readable lines, one per check, plus a verdict."""
    lines = [f"spec {report['spec']}  seed {report['seed']}  hash {report['spec_hash'][:12]}"]
    for c in report["checks"]:
        rel = ">" if c["expect"] == "fail" else "<"
        res = c["residual"]
        rtxt = f"{res:.3e}" if isinstance(res, float) else str(res)
        line = f"  {c['label']:<34} {c['status']:<8} residual {rtxt} {rel} {c['tolerance']:.1e}"
        if "error" in c["details"]:
            line += f"  ({c['details']['error']})"
        lines.append(line)
    s = report["summary"]
    verdict = "PASS" if report["passed"] else "FAIL"
    lines.append(f"{verdict}: {s['pass']} passed, {s['fail']} failed, {s['skipped']} skipped")
    return lines
