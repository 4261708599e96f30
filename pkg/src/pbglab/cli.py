"""pbglab command line: verify | holonomy | example | list-checks.

Exit codes: 0 all checks pass, 1 a check failed, 2 bad input.
"""
from __future__ import annotations

import argparse
import json
import sys
from importlib import resources
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import checks as ck
from . import io

EXAMPLES = {
    "hopf": "hopf.json",
    "ambrose-singer-su2": "ambrose-singer-su2.json",
    "transition-pipeline": "transition-pipeline.json",
}


class UsageError(Exception):
    pass


def shipped_spec(filename: str) -> Path:
    return Path(str(resources.files("pbglab") / "specs" / filename))


def _tol_overrides(items: List[str]) -> dict:
    out = {}
    for item in items or []:
        name, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"--tol expects NAME=VALUE, got {item!r}")
        if name not in ck.REGISTRY:
            raise UsageError(f"--tol names unknown check {name!r}")
        try:
            v = float(value)
        except ValueError:
            raise UsageError(f"--tol value for {name} is not a number: {value!r}") from None
        if not v > 0:
            raise UsageError(f"--tol value for {name} must be positive")
        out[name] = v
    return out


def _load(path: str, args) -> io.ExperimentSpec:
    raw = json.loads(Path(path).read_text()) if Path(path).is_file() else None
    if raw is None:
        raise io.ParseError(path, "no such file")
    overrides = _tol_overrides(getattr(args, "tol", None))
    if overrides or getattr(args, "seed", None) is not None or getattr(args, "samples", None) is not None:
        raw = dict(raw)
        if getattr(args, "seed", None) is not None:
            raw["seed"] = args.seed
        if getattr(args, "samples", None) is not None:
            raw["samples"] = args.samples
        if overrides:
            raw["tolerances"] = {**raw.get("tolerances", {}), **overrides}
            # a per-check tol in the file would shadow the override
            raw["checks"] = [dict(c, tol=overrides[c["name"]]) if isinstance(c, dict) and c["name"] in overrides
                             else c for c in raw.get("checks", [])]
        return io.parse_spec(raw, path)
    return io.load_spec(path)


def _verify(spec: io.ExperimentSpec, report_path: Optional[str], timings: bool) -> int:
    report = io.run_spec(spec, timings=timings)
    out = report_path or f"{spec.name}-report.json"
    io.write_report(report, out)
    for line in io.summary_lines(report):
        print(line)
    failed = [c["label"] for c in report["checks"] if c["status"] == "fail"]
    if failed:
        print("failing checks: " + ", ".join(failed))
    print(f"report written to {out}")
    return 0 if report["passed"] else 1


def cmd_verify(args) -> int:
    spec = _load(args.input, args)
    return _verify(spec, args.report, args.timings)


def _fmt_matrix(m) -> List[str]:
    rows = []
    for row in np.asarray(m):
        rows.append("  [" + ", ".join(f"{z.real:+.10f}{z.imag:+.10f}j" for z in row) + "]")
    return rows


def cmd_holonomy(args) -> int:
    spec = _load(args.input, args)
    ctx = spec.context()
    if not ctx.connection_names():
        raise UsageError("the spec has no connections block")
    name = args.connection
    if name is not None and name not in ctx.connection_names():
        raise UsageError(f"unknown connection {name!r}")
    try:
        loop = json.loads(args.loop)
    except json.JSONDecodeError as exc:
        raise UsageError(f"--loop is not valid JSON: {exc.msg}") from None
    if not isinstance(loop, dict) or loop.get("kind") not in ("rectangle", "param"):
        raise UsageError("--loop must be an object with kind 'rectangle' or 'param'")
    gamma = ctx.connection(name)
    steps = args.steps if args.steps is not None else int(spec.raw.get("steps", 1024))
    try:
        res = ck.loop_result(ctx, gamma, loop, steps)
    except (KeyError, TypeError) as exc:
        raise UsageError(f"bad loop: {exc}") from None
    except ValueError as exc:
        raise UsageError(f"bad loop: {exc}") from None
    print(f"holonomy of {gamma.label} ({steps} RK4 steps):")
    for line in _fmt_matrix(res["matrix"]):
        print(line)
    if res["log"] is None:
        print("log: outside the logarithm guard")
    else:
        log = res["log"]
        # values that print as zero get a plus sign
        log = [0.0 if abs(v) < 5e-13 else float(v) for v in log]
        print("log coordinates: [" + ", ".join(f"{v:+.12f}" for v in log) + "]")
        print(f"log norm: {float(np.linalg.norm(log)):.12f}")
    return 0


def cmd_example(args) -> int:
    if args.name not in EXAMPLES:
        raise UsageError(f"unknown example {args.name!r}; choose from {', '.join(EXAMPLES)}")
    spec = io.load_spec(shipped_spec(EXAMPLES[args.name]))
    report = io.run_spec(spec, timings=args.timings)
    out = args.report or f"{args.name}-report.json"
    io.write_report(report, out)
    for line in io.summary_lines(report):
        print(line)
    for c in report["checks"]:
        if c["name"] == "ambrose-singer":
            d = c["details"]
            print(f"dimension report {c['label']}: holonomy {d.get('holonomy_dim')} = "
                  f"curvature {d.get('curvature_dim')}")
    print(f"report written to {out}")
    return 0 if report["passed"] else 1


def cmd_list_checks(args) -> int:
    for name in sorted(ck.REGISTRY):
        c = ck.REGISTRY[name]
        needs = ", ".join(c.needs) or "-"
        print(f"{name:<24} tol {c.tolerance:.0e}  needs {needs:<22} {c.identity}")
    return 0


def _positive(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return v


def _nonneg(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError("must be non-negative")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pbglab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="run the checks listed in an experiment file")
    v.add_argument("--input", required=True)
    v.add_argument("--report", default=None)
    v.add_argument("--tol", action="append", metavar="NAME=VALUE", help="override a check tolerance")
    v.add_argument("--seed", type=_nonneg, default=None)
    v.add_argument("--samples", type=_positive, default=None)
    v.add_argument("--timings", action="store_true", help="record wall time per check (breaks byte-stability)")
    v.set_defaults(func=cmd_verify)

    h = sub.add_parser("holonomy", help="holonomy of one loop")
    h.add_argument("--input", required=True)
    h.add_argument("--loop", required=True, help="loop as JSON")
    h.add_argument("--steps", type=_positive, default=None)
    h.add_argument("--connection", default=None)
    h.set_defaults(func=cmd_holonomy)

    e = sub.add_parser("example", help="run a shipped example")
    e.add_argument("name")
    e.add_argument("--report", default=None)
    e.add_argument("--timings", action="store_true")
    e.set_defaults(func=cmd_example)

    lc = sub.add_parser("list-checks", help="list check names")
    lc.set_defaults(func=cmd_list_checks)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    try:
        return args.func(args)
    except (io.ParseError, io.ValidationError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except json.JSONDecodeError as exc:
        print(f"error: {args.input}: invalid JSON: {exc.msg}", file=sys.stderr)
        return 2
    except io.IoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
